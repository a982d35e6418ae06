use alloc::vec;
use alloc::vec::Vec;

use crate::data::Features;
use crate::error::{invalid, Result};
use crate::estimator::{estimate_prior, predicted_histogram, ConfusionMatrix};
use crate::hints::{cap_hint, HintState};
use crate::math::{ln, sqrt};
use crate::model::{per_class_risks, project_in_place, DomainSpec, ModelParams, OfflineData};
use crate::prior::RawPriorEstimate;

use super::base::{prox_solve_from, HintObjective, ProxConfig};
use super::meta::{optimistic_hedge_update, MetaRate};
use super::pool::{PoolVariant, StepPool};

/// `sum_i weights[i] params[i]`.
pub fn combine(weights: &[f64], params: &[ModelParams]) -> Result<ModelParams> {
    let Some(first) = params.first() else {
        return Err(invalid("nothing to combine"));
    };
    if weights.len() != params.len() {
        return Err(invalid("weights and parameters differ in count"));
    }
    let mut out = ModelParams::zeros(first.classes(), first.dim());
    for (p, w) in weights.iter().zip(params) {
        if !w.same_shape(first) {
            return Err(invalid("base parameters differ in shape"));
        }
        out.axpy(*p, w);
    }
    Ok(out)
}

/// Read-only inputs shared by every round.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub f0: &'a ModelParams,
    /// Already regularized.
    pub confusion: &'a ConfusionMatrix,
    pub offline: &'a OfflineData,
    pub domain: &'a DomainSpec,
}

impl RoundContext<'_> {
    /// `C^{-1}` applied to `f0`'s prediction histogram on the batch.
    pub fn raw_prior(&self, batch: &Features) -> Result<RawPriorEstimate> {
        let hist = predicted_histogram(self.f0, batch)?;
        estimate_prior(self.confusion, &hist)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub pool: StepPool,
    pub meta_rate: MetaRate,
    pub prox: ProxConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    /// Intermediate iterates; the base models themselves when there is no
    /// hint.
    pub hat: Vec<ModelParams>,
    /// Weights used in the latest round.
    pub weights: Vec<f64>,
    pub cum_losses: Vec<f64>,
    /// `sum_t sum_i p_{t,i} loss_{t,i}`.
    pub mixture_loss: f64,
    /// Running sum of squared deviations for the self-confident rate.
    pub deviation_sq: f64,
    pub round: usize,
}

/// Per-round gap between the risk estimate and the hint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HintDiagnostics {
    /// `max_i ||grad R(w_i) - grad H(w_i)||^2`.
    pub grad_gap_sq: f64,
    /// `||h - raw||_2^2`.
    pub prior_gap_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutput {
    pub deployed: ModelParams,
    pub weights: Vec<f64>,
    pub raw_prior: RawPriorEstimate,
    /// Capped hint prior, when the ensemble is optimistic.
    pub hint: Option<Vec<f64>>,
    pub meta_rate: f64,
    pub base_losses: Vec<f64>,
    pub hint_diagnostics: Option<HintDiagnostics>,
    /// Prox iterations summed over bases.
    pub prox_iterations: usize,
}

/// Hedge over a pool of projected gradient learners on the unbiased risk,
/// optionally optimistic: with a hint each base plays the prox of the hint
/// around its intermediate iterate, and the hint's losses enter the Hedge
/// weights ahead of the round.
#[derive(Debug, Clone)]
pub struct Ensemble {
    config: EnsembleConfig,
    state: EnsembleState,
    hint: Option<HintState>,
    optimistic: bool,
    /// Per-base line-search step carried between rounds.
    prox_steps: Vec<f64>,
}

impl Ensemble {
    /// Every base starts at `f0` with uniform weights. Passing a hint state
    /// requires the `AtlasAda` pool; `AtlasAda` without one plays zero
    /// hints.
    pub fn new(config: EnsembleConfig, f0: &ModelParams, hint: Option<HintState>) -> Result<Self> {
        let n = config.pool.len();
        if n == 0 {
            return Err(invalid("empty step pool"));
        }
        let optimistic = config.pool.variant() == PoolVariant::AtlasAda;
        if hint.is_some() && !optimistic {
            return Err(invalid("hints need the optimistic variant"));
        }
        if let MetaRate::Fixed(e) = config.meta_rate {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(invalid("meta rate must be finite and nonnegative"));
            }
        }
        Ok(Self {
            state: EnsembleState {
                hat: vec![f0.clone(); n],
                weights: vec![1.0 / n as f64; n],
                cum_losses: vec![0.0; n],
                mixture_loss: 0.0,
                deviation_sq: 0.0,
                round: 0,
            },
            config,
            hint,
            optimistic,
            prox_steps: vec![1.0; n],
        })
    }

    pub fn state(&self) -> &EnsembleState {
        &self.state
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn hint_state(&self) -> Option<&HintState> {
        self.hint.as_ref()
    }

    /// `sum_t p_t . loss_t - min_i sum_t loss_{t,i}`.
    pub fn meta_regret(&self) -> f64 {
        let best = self.state.cum_losses.iter().copied().fold(f64::INFINITY, f64::min);
        self.state.mixture_loss - best
    }

    /// Plays one round on `batch` and returns the model deployed on it. The
    /// deployed model depends on the batch only through the forward hint.
    pub fn round(&mut self, ctx: &RoundContext<'_>, batch: &Features) -> Result<RoundOutput> {
        let n = self.config.pool.len();
        let t = self.state.round + 1;
        let raw = ctx.raw_prior(batch)?;
        let k = raw.classes();

        let hint = if self.optimistic {
            let mut h = match &self.hint {
                Some(s) => s.hint(&raw),
                None => vec![0.0; k],
            };
            cap_hint(&mut h, ctx.confusion.min_singular());
            Some(h)
        } else {
            None
        };

        let mut prox_iterations = 0;
        let bases: Vec<ModelParams> = match &hint {
            Some(h) if h.iter().any(|&x| x != 0.0) => {
                let obj = HintObjective {
                    hint: h,
                    offline: ctx.offline,
                };
                let mut out = Vec::with_capacity(n);
                let etas = self.config.pool.etas();
                for ((w_hat, &eta), step) in self.state.hat.iter().zip(etas).zip(&mut self.prox_steps) {
                    let p = prox_solve_from(w_hat, &obj, eta, ctx.domain, &self.config.prox, 2.0 * *step)?;
                    *step = p.step;
                    prox_iterations += p.iterations;
                    out.push(p.w);
                }
                out
            }
            _ => self.state.hat.clone(),
        };

        let mut losses = Vec::with_capacity(n);
        let mut hint_losses = vec![0.0; n];
        let mut grads = Vec::with_capacity(n);
        let mut grad_gap_sq = 0.0f64;
        for (i, w) in bases.iter().enumerate() {
            let pcr = per_class_risks(w, ctx.offline, true)?;
            let (loss, grad) = pcr.combine(raw.as_slice())?;
            let grad = grad.expect("gradients requested");
            if let Some(h) = &hint {
                let (hl, hg) = pcr.combine(h)?;
                hint_losses[i] = hl;
                let mut gap = grad.clone();
                gap.axpy(-1.0, &hg.expect("gradients requested"));
                grad_gap_sq = grad_gap_sq.max(gap.norm() * gap.norm());
            }
            losses.push(loss);
            grads.push(grad);
        }

        let eps = match self.config.meta_rate {
            MetaRate::Fixed(e) => e,
            MetaRate::SelfConfident => sqrt((ln(n as f64) + 2.0) / (1.0 + self.state.deviation_sq)),
        };
        let weights = optimistic_hedge_update(&self.state.cum_losses, &hint_losses, eps)?;
        let deployed = combine(&weights, &bases)?;

        self.state.mixture_loss += weights.iter().zip(&losses).map(|(p, l)| p * l).sum::<f64>();
        for (c, l) in self.state.cum_losses.iter_mut().zip(&losses) {
            *c += l;
        }
        if self.config.meta_rate == MetaRate::SelfConfident {
            let pcr = per_class_risks(&deployed, ctx.offline, false)?;
            let r_ref = pcr.combine(raw.as_slice())?.0;
            let h_ref = match &hint {
                Some(h) => pcr.combine(h)?.0,
                None => 0.0,
            };
            let d = losses
                .iter()
                .zip(&hint_losses)
                .map(|(l, m)| ((l - r_ref) - (m - h_ref)).abs())
                .fold(0.0, f64::max);
            self.state.deviation_sq += d * d;
        }

        // Step from the intermediate iterate along the gradient at the base.
        for ((w_hat, g), &eta) in self.state.hat.iter_mut().zip(&grads).zip(self.config.pool.etas()) {
            if !g.is_finite() {
                return Err(crate::error::numerical("non-finite risk gradient"));
            }
            w_hat.axpy(-eta, g);
            project_in_place(w_hat, ctx.domain);
        }

        if let Some(s) = self.hint.as_mut() {
            s.observe(t, &raw, batch)?;
        }
        self.state.weights = weights.clone();
        self.state.round = t;

        let hint_diagnostics = hint.as_ref().map(|h| HintDiagnostics {
            grad_gap_sq,
            prior_gap_sq: h.iter().zip(raw.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum(),
        });
        Ok(RoundOutput {
            deployed,
            weights,
            raw_prior: raw,
            hint,
            meta_rate: eps,
            base_losses: losses,
            hint_diagnostics,
            prox_iterations,
        })
    }
}
