//! Offline phase, online protocol and run-level metrics.

use std::collections::HashMap;
use std::time::Instant;

use olas_core::estimator::{estimate_confusion, regularize_and_invertibility};
use olas_core::hints::{HintKind, HintState};
use olas_core::learners::{
    atlas_meta_rate, build_step_pool, fth_prior, ftfwh_prior, reweight_classify, uogd_step_size, BaselineState,
    Ensemble, EnsembleConfig, MetaRate, PoolVariant, ProxConfig, RoundContext, StepPool, Uogd,
};
use olas_core::model::{
    estimate_constants, predict_label, predict_proba, project_to_domain, train_offline, OfflineTrainConfig,
};
use olas_core::prior::simplex_project;
use olas_core::rng::{substream, Substream};
use olas_core::shiftsim::{sample_categorical, GaussianClassModel, ShiftSchedule};
use olas_core::{
    ConfusionMatrix, DomainSpec, Features, LossConstants, ModelParams, OfflineData, OnlineBatch, PriorVector,
    ShiftTrace,
};
use rand::RngCore;
use rayon::prelude::*;

use crate::config::{AlgorithmId, DataConfig, KeywordOr, RunConfig};
use crate::dataset::load_dataset_csv;
use crate::error::{HarnessError, Result};

/// Where online batches come from.
#[derive(Debug, Clone)]
pub enum StreamSource {
    Synthetic(GaussianClassModel),
    /// Rows grouped by class; a batch draws a label from the prior, then a
    /// row of that class uniformly with replacement.
    Pool { dim: usize, by_class: Vec<Vec<Vec<f64>>> },
}

impl StreamSource {
    pub fn sample<R: RngCore>(&self, prior: &PriorVector, n: usize, rng: &mut R) -> Result<OnlineBatch> {
        match self {
            StreamSource::Synthetic(m) => Ok(olas_core::shiftsim::sample_batch(prior, m, n, rng)?),
            StreamSource::Pool { dim, by_class } => {
                if prior.classes() != by_class.len() {
                    return Err(HarnessError::Config("prior K does not match the online pool".into()));
                }
                let mut data = Vec::with_capacity(n * dim);
                let mut labels = Vec::with_capacity(n);
                for _ in 0..n {
                    let y = sample_categorical(prior, rng);
                    let rows = &by_class[y];
                    if rows.is_empty() {
                        return Err(HarnessError::Config(format!("online pool has no rows of class {}", y + 1)));
                    }
                    let i = (rng.next_u64() % rows.len() as u64) as usize;
                    data.extend_from_slice(&rows[i]);
                    labels.push(y);
                }
                Ok(OnlineBatch::new(Features::new(*dim, data)?, labels)?)
            }
        }
    }
}

/// Everything fixed before the first online round.
#[derive(Debug, Clone)]
pub struct OfflinePhase {
    pub offline: OfflineData,
    pub f0: ModelParams,
    pub domain: DomainSpec,
    /// Regularized confusion matrix.
    pub confusion: ConfusionMatrix,
    /// Smallest singular value before regularization.
    pub raw_sigma: f64,
    pub constants: LossConstants,
    pub offline_prior: PriorVector,
    pub source: StreamSource,
}

impl OfflinePhase {
    pub fn context(&self) -> RoundContext<'_> {
        RoundContext {
            f0: &self.f0,
            confusion: &self.confusion,
            offline: &self.offline,
            domain: &self.domain,
        }
    }

    pub fn classes(&self) -> usize {
        self.offline.classes()
    }

    pub fn sigma(&self) -> f64 {
        self.confusion.min_singular()
    }
}

/// Draws or loads `S_0`, trains `f0`, and estimates `C`, `sigma`, `G`, `B`.
pub fn prepare_offline(config: &RunConfig, seed: u64) -> Result<OfflinePhase> {
    let (samples, classes, source) = match &config.data {
        DataConfig::Synthetic { classes, block } => {
            let model = GaussianClassModel::block_pattern(*classes, *block);
            let mut rng = substream(seed, Substream::Offline);
            let s = model.sample_balanced(config.offline_size, &mut rng);
            (s, *classes, StreamSource::Synthetic(model))
        }
        DataConfig::Csv {
            offline_path,
            online_path,
        } => {
            let off = load_dataset_csv(offline_path)?;
            let on = load_dataset_csv(online_path)?;
            if on.dim != off.dim || on.classes > off.classes {
                return Err(HarnessError::Config("offline and online files disagree on d or K".into()));
            }
            let mut by_class = vec![Vec::new(); off.classes];
            for s in on.samples {
                by_class[s.label].push(s.features);
            }
            let src = StreamSource::Pool {
                dim: off.dim,
                by_class,
            };
            (off.samples, off.classes, src)
        }
    };
    let offline = OfflineData::new(&samples, classes)?;
    let train_cfg = OfflineTrainConfig {
        max_iters: config.offline.max_iters,
        tol: config.offline.tol,
    };
    let f0 = train_offline(&offline, &DomainSpec::new(config.offline.radius)?, &train_cfg)?;
    let domain = match config.radius {
        Some(r) => DomainSpec::new(r)?,
        None => DomainSpec::around(&f0),
    };
    let f0 = project_to_domain(&f0, &domain);
    let raw = estimate_confusion(&f0, &offline)?;
    let confusion = regularize_and_invertibility(&raw, config.offline.sigma_floor)?;
    let constants = estimate_constants(&f0, &offline, &domain, config.offline.safety_factor)?;
    Ok(OfflinePhase {
        offline_prior: offline.class_prior(),
        raw_sigma: raw.min_singular(),
        offline,
        f0,
        domain,
        confusion,
        constants,
        source,
    })
}

/// Builds the schedule named by the config for horizon `T`.
pub fn schedule_for(config: &RunConfig, classes: usize, seed: u64) -> Result<ShiftSchedule> {
    let mut s = ShiftSchedule::benchmark(config.shift.kind()?, classes, config.horizon, seed)?;
    if let Some(p) = config.shift.period {
        s.period = p;
    }
    if let Some(p) = config.shift.flip_prob {
        s.flip_prob = p;
    }
    if let Some(m) = &config.shift.mu1 {
        s.mu1 = PriorVector::new(m.clone())?;
    }
    if let Some(m) = &config.shift.mu2 {
        s.mu2 = PriorVector::new(m.clone())?;
    }
    s.validate()?;
    if s.mu1.classes() != classes {
        return Err(HarnessError::Config("shift priors disagree with the data on K".into()));
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub instant_error: f64,
    pub avg_error: f64,
    /// Norm of the deployed parameters.
    pub digest: f64,
    /// Simplex projection of the round's raw prior estimate.
    pub est_prior: Vec<f64>,
    /// Hedge weights; empty for single-model algorithms.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub algorithm: String,
    pub shift: String,
    pub final_avg_error: f64,
    pub variation: f64,
    pub wall_time_secs: f64,
    pub sigma: f64,
    pub grad_bound: f64,
    pub loss_bound: f64,
    pub radius: f64,
    pub pool_size: usize,
    pub regularized: bool,
    pub transductive: bool,
    /// Ensembles only.
    pub meta_regret: Option<f64>,
    /// `(2B/sigma) sqrt((ln N + 2) K T)`; fixed-rate ensembles only.
    pub meta_regret_bound: Option<f64>,
    /// `sum_t max_i ||grad R_t - grad H_t||^2` for hinted runs.
    pub hint_grad_gap: Option<f64>,
    /// `sum_t ||h_t - raw_t||^2` for hinted runs.
    pub hint_prior_gap: Option<f64>,
}

impl RunSummary {
    /// True when the meta-regret bound applies and holds.
    pub fn meta_regret_within_bound(&self) -> Option<bool> {
        Some(self.meta_regret? <= self.meta_regret_bound?)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub rounds: Vec<RoundRecord>,
    pub deployed: Vec<ModelParams>,
    pub true_trace: ShiftTrace,
    pub summary: RunSummary,
}

enum Learner {
    Fix,
    Fth(BaselineState),
    Ftfwh(BaselineState, usize),
    Uogd(Uogd),
    Ensemble(Box<Ensemble>),
}

/// The pool for `atlas` / `atlas_ada`, honoring a `pool_size` override.
pub fn pool_for(config: &RunConfig, phase: &OfflinePhase) -> Result<StepPool> {
    let variant = match config.algorithm.name {
        AlgorithmId::AtlasAda => PoolVariant::AtlasAda,
        _ => PoolVariant::Atlas,
    };
    let pool = build_step_pool(
        config.horizon,
        phase.classes(),
        phase.domain.diameter(),
        phase.constants.grad_bound,
        phase.sigma(),
        variant,
    )?;
    Ok(match config.algorithm.pool_size {
        Some(n) => StepPool::geometric(pool.etas()[0], n, variant)?,
        None => pool,
    })
}

/// Resolved Hedge rate.
pub fn meta_rate_for(config: &RunConfig, phase: &OfflinePhase, n: usize) -> MetaRate {
    let fixed = || {
        MetaRate::Fixed(atlas_meta_rate(
            n,
            phase.classes(),
            config.horizon,
            phase.constants.loss_bound,
            phase.sigma(),
        ))
    };
    match &config.algorithm.meta_rate {
        KeywordOr::Number(e) => MetaRate::Fixed(*e),
        KeywordOr::Keyword(k) if k == "self_confident" => MetaRate::SelfConfident,
        _ if config.algorithm.name == AlgorithmId::AtlasAda => MetaRate::SelfConfident,
        _ => fixed(),
    }
}

fn build_learner(config: &RunConfig, phase: &OfflinePhase) -> Result<(Learner, Option<HintKind>)> {
    let hint_kind = config.hint_kind()?;
    let learner = match config.algorithm.name {
        AlgorithmId::Fix => Learner::Fix,
        AlgorithmId::Fth => Learner::Fth(BaselineState::new(phase.offline_prior.clone())),
        AlgorithmId::Ftfwh => Learner::Ftfwh(BaselineState::new(phase.offline_prior.clone()), config.algorithm.window),
        AlgorithmId::Uogd => {
            let eta = config.algorithm.step_size.unwrap_or_else(|| {
                uogd_step_size(phase.domain.diameter(), phase.constants.grad_bound, config.horizon)
            });
            Learner::Uogd(Uogd::new(&phase.f0, eta)?)
        }
        AlgorithmId::Atlas | AlgorithmId::AtlasAda => {
            let pool = pool_for(config, phase)?;
            let meta_rate = meta_rate_for(config, phase, pool.len());
            let hint = match hint_kind {
                Some(k) => Some(HintState::new(k, phase.offline_prior.clone(), phase.offline.dim())?),
                None => None,
            };
            let cfg = EnsembleConfig {
                pool,
                meta_rate,
                prox: ProxConfig {
                    tol: config.algorithm.prox_tol,
                    max_iters: config.algorithm.prox_max_iters,
                },
            };
            Learner::Ensemble(Box::new(Ensemble::new(cfg, &phase.f0, hint)?))
        }
    };
    Ok((learner, hint_kind))
}

fn error_rate(pred: &[usize], labels: &[usize]) -> f64 {
    let wrong = pred.iter().zip(labels).filter(|(a, b)| a != b).count();
    wrong as f64 / labels.len() as f64
}

fn predict_all(w: &ModelParams, batch: &Features) -> Result<Vec<usize>> {
    batch.iter_rows().map(|x| Ok(predict_label(w, x)?)).collect()
}

fn predict_reweighted(phase: &OfflinePhase, target: &PriorVector, batch: &Features) -> Result<Vec<usize>> {
    batch
        .iter_rows()
        .map(|x| {
            let p = predict_proba(&phase.f0, x)?;
            Ok(reweight_classify(&p, target, &phase.offline_prior)?)
        })
        .collect()
}

/// Runs the online protocol for one seed on a prepared offline phase.
pub fn run_online(config: &RunConfig, seed: u64, phase: &OfflinePhase) -> Result<RunResult> {
    config.validate()?;
    let start = Instant::now();
    let schedule = schedule_for(config, phase.classes(), seed)?;
    let trace = schedule.trace()?;
    let (mut learner, hint_kind) = build_learner(config, phase)?;
    let ctx = phase.context();
    let mut rng = substream(seed, Substream::Stream);
    let t_total = config.horizon;
    let mut rounds = Vec::with_capacity(t_total);
    let mut deployed_all = Vec::with_capacity(t_total);
    let mut err_sum = 0.0;
    let mut grad_gap = 0.0;
    let mut prior_gap = 0.0;

    for (t, prior) in (1..=t_total).zip(&trace.priors) {
        let batch = phase.source.sample(prior, config.batch_size, &mut rng)?;
        let features = batch.features();
        let (deployed, preds, raw, weights) = match &mut learner {
            Learner::Fix => {
                let raw = ctx.raw_prior(features)?;
                (phase.f0.clone(), predict_all(&phase.f0, features)?, raw, Vec::new())
            }
            Learner::Fth(state) => {
                let preds = predict_reweighted(phase, &fth_prior(state)?, features)?;
                let raw = ctx.raw_prior(features)?;
                state.push(simplex_project(raw.as_slice())?);
                (phase.f0.clone(), preds, raw, Vec::new())
            }
            Learner::Ftfwh(state, window) => {
                let preds = predict_reweighted(phase, &ftfwh_prior(state, *window)?, features)?;
                let raw = ctx.raw_prior(features)?;
                state.push(simplex_project(raw.as_slice())?);
                (phase.f0.clone(), preds, raw, Vec::new())
            }
            Learner::Uogd(u) => {
                let out = u.round(&ctx, features)?;
                let preds = predict_all(&out.deployed, features)?;
                (out.deployed, preds, out.raw_prior, Vec::new())
            }
            Learner::Ensemble(e) => {
                let out = e.round(&ctx, features)?;
                if let Some(d) = out.hint_diagnostics {
                    grad_gap += d.grad_gap_sq;
                    prior_gap += d.prior_gap_sq;
                }
                let preds = predict_all(&out.deployed, features)?;
                (out.deployed, preds, out.raw_prior, out.weights)
            }
        };
        let e = error_rate(&preds, batch.hidden_labels());
        err_sum += e;
        rounds.push(RoundRecord {
            t,
            instant_error: e,
            avg_error: err_sum / t as f64,
            digest: deployed.norm(),
            est_prior: simplex_project(raw.as_slice())?.into_inner(),
            weights,
        });
        deployed_all.push(deployed);
    }

    let k = phase.classes();
    let (meta_regret, bound, pool_size) = match &learner {
        Learner::Ensemble(e) => {
            let n = e.config().pool.len();
            let bound = matches!(e.config().meta_rate, MetaRate::Fixed(_)).then(|| {
                2.0 * phase.constants.loss_bound / phase.sigma()
                    * (((n as f64).ln() + 2.0) * k as f64 * t_total as f64).sqrt()
            });
            (Some(e.meta_regret()), bound, n)
        }
        _ => (None, None, 1),
    };
    let hinted = config.algorithm.name == AlgorithmId::AtlasAda;
    let summary = RunSummary {
        seed,
        algorithm: config.algorithm.name.name().into(),
        shift: config.shift.kind()?.name().into(),
        final_avg_error: err_sum / t_total as f64,
        variation: trace.variation,
        wall_time_secs: start.elapsed().as_secs_f64(),
        sigma: phase.sigma(),
        grad_bound: phase.constants.grad_bound,
        loss_bound: phase.constants.loss_bound,
        radius: phase.domain.radius(),
        pool_size,
        regularized: phase.confusion.ridge().is_some(),
        transductive: hint_kind.is_some_and(|h| h.is_transductive()),
        meta_regret,
        meta_regret_bound: bound,
        hint_grad_gap: hinted.then_some(grad_gap),
        hint_prior_gap: hinted.then_some(prior_gap),
    };
    Ok(RunResult {
        rounds,
        deployed: deployed_all,
        true_trace: trace,
        summary,
    })
}

/// Offline phase followed by the online protocol.
pub fn run_experiment(config: &RunConfig, seed: u64) -> Result<RunResult> {
    let phase = prepare_offline(config, seed)?;
    run_online(config, seed, &phase)
}

/// One run per configured seed, in parallel; results follow seed order.
pub fn run_seeds(config: &RunConfig) -> Result<Vec<RunResult>> {
    config.seeds.par_iter().map(|&s| run_experiment(config, s)).collect()
}

/// `(1/T) sum_t (1/|S_t|) sum_n 1[pred != label]` over flat predictions and
/// labels split into rounds of the given sizes.
pub fn average_error(predictions: &[usize], labels: &[usize], sizes: &[usize]) -> Result<f64> {
    let total: usize = sizes.iter().sum();
    if predictions.len() != labels.len() || total != labels.len() || sizes.is_empty() || sizes.contains(&0) {
        return Err(HarnessError::Core(olas_core::Error::InvalidInput(
            "predictions, labels and round sizes are misaligned".into(),
        )));
    }
    let mut at = 0;
    let mut sum = 0.0;
    for &n in sizes {
        sum += error_rate(&predictions[at..at + n], &labels[at..at + n]);
        at += n;
    }
    Ok(sum / sizes.len() as f64)
}

/// Minimizer of `sum_k mu_k R_k` over the domain, by accelerated projected
/// gradient with backtracking and restarts. Stops once the gradient mapping
/// `L ||x+ - y||` drops below `tol`.
pub fn risk_minimizer(
    offline: &OfflineData,
    mu: &[f64],
    domain: &DomainSpec,
    start: &ModelParams,
    tol: f64,
    max_iters: usize,
) -> Result<ModelParams> {
    let eval = |w: &ModelParams| -> Result<(f64, ModelParams)> {
        let (v, g) = offline.weighted_risk(w, mu, true)?;
        Ok((v, g.expect("gradient")))
    };
    let mut x = project_to_domain(start, domain);
    let (mut fx, _) = eval(&x)?;
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut lip = 1.0f64;
    for _ in 0..max_iters {
        let (fy, gy) = eval(&y)?;
        let (x_new, f_new) = loop {
            let mut cand = y.clone();
            cand.axpy(-1.0 / lip, &gy);
            let cand = project_to_domain(&cand, domain);
            let (fc, _) = eval(&cand)?;
            let mut d = cand.clone();
            d.axpy(-1.0, &y);
            let lin: f64 = gy.as_slice().iter().zip(d.as_slice()).map(|(a, b)| a * b).sum();
            let dn = d.norm();
            if fc <= fy + lin + 0.5 * lip * dn * dn + 1e-15 {
                break (cand, fc);
            }
            lip *= 2.0;
        };
        let mapping = lip * x_new.distance(&y);
        if f_new > fx {
            // Restart the momentum from the better point.
            theta = 1.0;
            y = x.clone();
            continue;
        }
        let theta_new = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        let mut y_new = x_new.clone();
        let mut mom = x_new.clone();
        mom.axpy(-1.0, &x);
        y_new.axpy((theta - 1.0) / theta_new, &mom);
        x = x_new;
        fx = f_new;
        y = project_to_domain(&y_new, domain);
        theta = theta_new;
        lip *= 0.9;
        if mapping < tol {
            break;
        }
    }
    Ok(x)
}

/// `sum_t [R_t(w_t) - R_t(w_t*)]` with `R_t = sum_k mu_{t,k} R_k` over the
/// offline per-class risks. Comparators are cached per prior rounded to a
/// 1e-3 grid.
pub fn dynamic_regret_diagnostic(result: &RunResult, phase: &OfflinePhase) -> Result<f64> {
    let priors = &result.true_trace.priors;
    if priors.len() != result.deployed.len() || priors.is_empty() {
        return Err(HarnessError::Unsupported("the run carries no usable true prior trace".into()));
    }
    let mut cache: HashMap<Vec<i64>, ModelParams> = HashMap::new();
    let mut warm = phase.f0.clone();
    let mut total = 0.0;
    for (w, mu) in result.deployed.iter().zip(priors) {
        let key: Vec<i64> = mu.as_slice().iter().map(|p| (p * 1000.0).round() as i64).collect();
        let mu = mu.as_slice();
        if !cache.contains_key(&key) {
            let wstar = risk_minimizer(&phase.offline, mu, &phase.domain, &warm, 1e-8, 20_000)?;
            warm = wstar.clone();
            cache.insert(key.clone(), wstar);
        }
        let wstar = &cache[&key];
        let best = phase.offline.weighted_risk(wstar, mu, false)?.0;
        total += phase.offline.weighted_risk(w, mu, false)?.0 - best;
    }
    Ok(total)
}
