//! Independent oracles.
//!
//! Everything numerical in here (scores, cross-entropy and its gradient,
//! small linear solves, ball projection, Hedge weights, the prox solve) is
//! written out again with plain loops in [`naive`] rather than calling the
//! kernels it checks. The library is only invoked as the system under test.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use olas_core::estimator::{
    estimate_confusion, estimate_prior, predicted_histogram, regularize_and_invertibility, unbiased_risk,
};
use olas_core::hints::{HintKind, HintState, Mix};
use olas_core::learners::{Ensemble, EnsembleConfig, MetaRate, PoolVariant, ProxConfig, RoundContext, StepPool};
use olas_core::model::{per_class_risks, surrogate_loss_gradient};
use olas_core::prior::simplex_project;
use olas_core::rng::{indexed_substream, substream, Substream};
use olas_core::shiftsim::GaussianClassModel;
use olas_core::{
    ConfusionMatrix, DomainSpec, Features, LabeledSample, ModelParams, OfflineData, PerClassRisks, PriorVector,
};
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::config::{AlgorithmId, RunConfig};
use crate::error::{HarnessError, Result};
use crate::harness::prepare_offline;

/// Outcome of one oracle run.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub oracle: String,
    /// Named statistics in a fixed order.
    pub statistics: Vec<(String, f64)>,
    pub tolerance: f64,
    pub samples: usize,
    /// `None` when the statistic is undefined and no verdict is possible.
    pub passed: Option<bool>,
    pub notes: Vec<String>,
    /// Inputs needed to reproduce a failure.
    pub replay: Option<String>,
}

impl OracleReport {
    fn new(oracle: impl Into<String>, tolerance: f64, samples: usize) -> Self {
        Self {
            oracle: oracle.into(),
            statistics: Vec::new(),
            tolerance,
            samples,
            passed: None,
            notes: Vec::new(),
            replay: None,
        }
    }

    fn push(&mut self, name: &str, value: f64) {
        self.statistics.push((name.to_string(), value));
    }

    pub fn stat(&self, name: &str) -> Option<f64> {
        self.statistics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn verdict(&self) -> &'static str {
        match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "UNDEFINED",
        }
    }

    /// One line per report, plus notes and replay inputs.
    pub fn summary(&self) -> String {
        let mut s = format!("{} {} (n={}, tol={:e})", self.verdict(), self.oracle, self.samples, self.tolerance);
        for (k, v) in &self.statistics {
            let _ = write!(s, " {k}={v:.6e}");
        }
        for n in &self.notes {
            let _ = write!(s, "\n  note: {n}");
        }
        if let Some(r) = &self.replay {
            let _ = write!(s, "\n  replay: {r}");
        }
        s
    }
}

/// Writes `oracle,verdict,samples,tolerance,statistic,value`, one row per
/// statistic.
pub fn write_reports_csv(path: &Path, reports: &[OracleReport]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| HarnessError::io(path, e);
    writeln!(w, "oracle,verdict,samples,tolerance,statistic,value").map_err(io)?;
    for r in reports {
        for (k, v) in &r.statistics {
            writeln!(w, "{},{},{},{:?},{},{:?}", r.oracle, r.verdict(), r.samples, r.tolerance, k, v).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Straight-line reference kernels.
pub mod naive {
    /// `W [x; 1]` for row-major `W` of shape `k x (d + 1)`.
    pub fn scores(w: &[f64], k: usize, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut out = vec![0.0; k];
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = w[c * (d + 1) + d];
            for j in 0..d {
                s += w[c * (d + 1) + j] * x[j];
            }
            *o = s;
        }
        out
    }

    pub fn argmax(s: &[f64]) -> usize {
        let mut best = 0;
        for i in 1..s.len() {
            if s[i] > s[best] {
                best = i;
            }
        }
        best
    }

    pub fn cross_entropy(w: &[f64], k: usize, x: &[f64], y: usize) -> f64 {
        let s = scores(w, k, x);
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
        m + z.ln() - s[y]
    }

    pub fn cross_entropy_grad(w: &[f64], k: usize, x: &[f64], y: usize) -> Vec<f64> {
        let d = x.len();
        let s = scores(w, k, x);
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut g = vec![0.0; k * (d + 1)];
        for c in 0..k {
            let coef = e[c] / z - if c == y { 1.0 } else { 0.0 };
            for j in 0..d {
                g[c * (d + 1) + j] = coef * x[j];
            }
            g[c * (d + 1) + d] = coef;
        }
        g
    }

    /// Mean loss (and gradient) over rows of one class.
    pub fn class_risk(w: &[f64], k: usize, rows: &[Vec<f64>], y: usize) -> (f64, Vec<f64>) {
        let mut v = 0.0;
        let mut g = vec![0.0; w.len()];
        for x in rows {
            v += cross_entropy(w, k, x, y);
            for (a, b) in g.iter_mut().zip(cross_entropy_grad(w, k, x, y)) {
                *a += b;
            }
        }
        let n = rows.len() as f64;
        for a in g.iter_mut() {
            *a /= n;
        }
        (v / n, g)
    }

    /// Gaussian elimination with partial pivoting on a row-major `n x n`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = (0..n).map(|i| {
            let mut r = a[i * n..(i + 1) * n].to_vec();
            r.push(b[i]);
            r
        }).collect();
        for col in 0..n {
            let p = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
            if m[p][col].abs() < 1e-300 {
                return None;
            }
            m.swap(col, p);
            for r in col + 1..n {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = m[i][n];
            for j in i + 1..n {
                s -= m[i][j] * x[j];
            }
            x[i] = s / m[i][i];
        }
        Some(x)
    }

    /// Smallest singular value of a 2 x 2 matrix, in closed form.
    pub fn min_singular_2x2(a: &[f64]) -> f64 {
        let fro = a.iter().map(|v| v * v).sum::<f64>();
        let det = a[0] * a[3] - a[1] * a[2];
        let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
        ((fro - disc) / 2.0).max(0.0).sqrt()
    }

    pub fn project_ball(w: &mut [f64], r: f64) {
        let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > r {
            for v in w.iter_mut() {
                *v *= r / n;
            }
        }
    }
}

/// Central differences `(f(w + h e_i) - f(w - h e_i)) / 2h` per coordinate.
pub fn finite_difference_gradient<F>(f: F, w: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(olas_core::Error::InvalidInput("difference step must be positive".into()).into());
    }
    let mut probe = w.to_vec();
    let mut g = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        probe[i] = w[i] + h;
        let up = f(&probe);
        probe[i] = w[i] - h;
        let down = f(&probe);
        probe[i] = w[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(olas_core::Error::Numerical(format!("non-finite function value at coordinate {i}")).into());
        }
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Euclidean projection onto the simplex by enumerating every support set:
/// each candidate is `max(v_S - theta, 0)` with `theta` fixing the sum on
/// `S`, and the closest feasible candidate wins.
pub fn brute_force_simplex_projection(v: &[f64]) -> Vec<f64> {
    let k = v.len();
    assert!((1..=16).contains(&k), "support enumeration is limited to small K");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let size = mask.count_ones() as f64;
        let sum: f64 = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).sum();
        let theta = (sum - 1.0) / size;
        let x: Vec<f64> = (0..k).map(|i| if mask >> i & 1 == 1 { v[i] - theta } else { 0.0 }).collect();
        if x.iter().any(|&xi| xi < 0.0) {
            continue;
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("the singleton support of the largest entry is always feasible").1
}

/// Library projection against [`brute_force_simplex_projection`] on
/// `cases` random vectors with `2 <= K <= 5`.
pub fn simplex_projection_check(cases: usize, seed: u64) -> Result<OracleReport> {
    let tol = 1e-8;
    let mut rng = substream(seed, Substream::Reference);
    let mut report = OracleReport::new("simplex_projection", tol, cases);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let k = 2 + (rng.next_u32() % 4) as usize;
        let scale = [0.1, 1.0, 10.0][case % 3];
        let v: Vec<f64> = (0..k).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let lib = simplex_project(&v)?;
        let bf = brute_force_simplex_projection(&v);
        let err = lib.as_slice().iter().zip(&bf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err > tol && report.replay.is_none() {
            report.replay = Some(format!("case {case}: v = {v:?}"));
        }
        worst = worst.max(err);
    }
    report.push("max_abs_error", worst);
    report.passed = Some(worst <= tol);
    Ok(report)
}

fn random_params<R: RngCore>(rng: &mut R, k: usize, d: usize, scale: f64) -> ModelParams {
    let w = (0..k * (d + 1)).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    ModelParams::from_weights(k, d, w).expect("shape is consistent")
}

fn random_rows<R: RngCore>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| 3.0 * (2.0 * rng.random::<f64>() - 1.0)).collect()).collect()
}

/// Which analytic gradient [`gradient_check`] exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientTarget {
    /// Per-sample softmax cross-entropy.
    SurrogateLoss,
    /// `sum_k mu_hat[k] R_k(w)` with a raw (possibly negative) prior.
    UnbiasedRisk,
    /// `sum_k h[k] R_k(w)` with a hint prior.
    Hint,
}

impl GradientTarget {
    pub const ALL: [GradientTarget; 3] = [Self::SurrogateLoss, Self::UnbiasedRisk, Self::Hint];

    pub fn name(self) -> &'static str {
        match self {
            Self::SurrogateLoss => "gradient_surrogate_loss",
            Self::UnbiasedRisk => "gradient_unbiased_risk",
            Self::Hint => "gradient_hint",
        }
    }
}

/// Library gradients against central differences of the reference loss on
/// `instances` random problems (`K` in 2..=4, `d` in 1..=5).
pub fn gradient_check(target: GradientTarget, instances: usize, seed: u64) -> Result<OracleReport> {
    let tol = 1e-5;
    let h = 1e-5;
    let mut report = OracleReport::new(target.name(), tol, instances);
    let mut worst = 0.0f64;
    for inst in 0..instances {
        let mut rng = indexed_substream(seed, Substream::Reference, inst as u64);
        let k = 2 + (rng.next_u32() % 3) as usize;
        let d = 1 + (rng.next_u32() % 5) as usize;
        let w = random_params(&mut rng, k, d, 1.0);
        let (analytic, fd) = match target {
            GradientTarget::SurrogateLoss => {
                let x = random_rows(&mut rng, 1, d).remove(0);
                let y = (rng.next_u32() as usize) % k;
                let a = surrogate_loss_gradient(&w, &x, y)?.into_inner();
                let fd = finite_difference_gradient(|p| naive::cross_entropy(p, k, &x, y), w.as_slice(), h)?;
                (a, fd)
            }
            GradientTarget::UnbiasedRisk | GradientTarget::Hint => {
                let per_class = 1 + (rng.next_u32() % 6) as usize;
                let mut samples = Vec::new();
                let mut rows = vec![Vec::new(); k];
                for (y, r) in rows.iter_mut().enumerate() {
                    for x in random_rows(&mut rng, per_class, d) {
                        samples.push(LabeledSample { features: x.clone(), label: y });
                        r.push(x);
                    }
                }
                let offline = OfflineData::new(&samples, k)?;
                let coeffs: Vec<f64> = match target {
                    // Raw estimates may leave the simplex.
                    GradientTarget::UnbiasedRisk => (0..k).map(|_| 1.5 * rng.random::<f64>() - 0.25).collect(),
                    _ => {
                        let c: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
                        let s: f64 = c.iter().sum();
                        c.iter().map(|v| v / s).collect()
                    }
                };
                let pcr = per_class_risks(&w, &offline, true)?;
                let a = match target {
                    GradientTarget::UnbiasedRisk => {
                        let raw = olas_core::RawPriorEstimate(coeffs.clone());
                        unbiased_risk(&raw, &pcr)?.gradient.expect("gradients requested")
                    }
                    _ => olas_core::hints::hint_eval(&coeffs, &pcr)?.1.expect("gradients requested"),
                };
                let f = |p: &[f64]| {
                    (0..k).map(|y| coeffs[y] * naive::class_risk(p, k, &rows[y], y).0).sum::<f64>()
                };
                (a.into_inner(), finite_difference_gradient(f, w.as_slice(), h)?)
            }
        };
        let err = relative_error(&analytic, &fd);
        if err > tol && report.replay.is_none() {
            report.replay = Some(format!("{}: seed {seed}, instance {inst}", target.name()));
        }
        worst = worst.max(err);
    }
    report.push("max_relative_error", worst);
    report.passed = Some(worst < tol);
    Ok(report)
}

/// Inputs to [`monte_carlo_unbiasedness`]. Batches are drawn from `pool`
/// (labels from `true_prior`, then a uniform row of that class), so the
/// pool's per-class risks and confusion matrix are the exact population
/// quantities.
#[derive(Debug, Clone, Copy)]
pub struct UnbiasednessSetup<'a> {
    pub w: &'a ModelParams,
    pub true_prior: &'a PriorVector,
    pub pool: &'a OfflineData,
    pub f0: &'a ModelParams,
    pub confusion: &'a ConfusionMatrix,
    pub pcr: &'a PerClassRisks,
    pub batch_size: usize,
}

fn draw_from_pool<R: RngCore>(
    rows: &[Vec<Vec<f64>>],
    prior: &[f64],
    n: usize,
    dim: usize,
    rng: &mut R,
) -> Result<Features> {
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut y = prior.len() - 1;
        for (k, p) in prior.iter().enumerate() {
            acc += p;
            if u < acc {
                y = k;
                break;
            }
        }
        // Skip classes with zero prior mass that the fallback may land on.
        while prior[y] == 0.0 && y > 0 {
            y -= 1;
        }
        let class = &rows[y];
        data.extend_from_slice(&class[(rng.next_u64() % class.len() as u64) as usize]);
    }
    Ok(Features::new(dim, data)?)
}

fn rows_by_class(pool: &OfflineData) -> Vec<Vec<Vec<f64>>> {
    (0..pool.classes())
        .map(|k| pool.class_features(k).map(|x| x[..pool.dim()].to_vec()).collect())
        .collect()
}

/// Mean of the library's risk estimate over `n_trials` batches against the
/// reference true risk `sum_k mu[k] R_k(w)`.
pub fn monte_carlo_unbiasedness(setup: &UnbiasednessSetup<'_>, n_trials: usize, seed: u64) -> Result<OracleReport> {
    if n_trials == 0 || setup.batch_size == 0 {
        return Err(olas_core::Error::InvalidInput("need at least one trial and one sample".into()).into());
    }
    let k = setup.pool.classes();
    let dim = setup.pool.dim();
    let rows = rows_by_class(setup.pool);
    let prior = setup.true_prior.as_slice();
    let true_risk: f64 = (0..k)
        .map(|y| prior[y] * naive::class_risk(setup.w.as_slice(), k, &rows[y], y).0)
        .sum();

    let estimates: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = indexed_substream(seed, Substream::Reference, trial as u64);
            let batch = draw_from_pool(&rows, prior, setup.batch_size, dim, &mut rng)?;
            let hist = predicted_histogram(setup.f0, &batch)?;
            let raw = estimate_prior(setup.confusion, &hist)?;
            Ok(unbiased_risk(&raw, setup.pcr)?.value)
        })
        .collect::<Result<_>>()?;

    let n = n_trials as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let mut report = OracleReport::new("monte_carlo_unbiasedness", 3.0, n_trials);
    report.push("mean_estimate", mean);
    report.push("true_risk", true_risk);
    if n_trials < 2 {
        report.push("stderr", f64::NAN);
        report.push("z_score", f64::NAN);
        report.notes.push("a single trial leaves the standard error undefined".into());
        return Ok(report);
    }
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let gap = (mean - true_risk).abs();
    let z = if stderr > 0.0 {
        gap / stderr
    } else if gap <= 1e-12 * true_risk.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    };
    report.push("stderr", stderr);
    report.push("z_score", z);
    if n_trials < 1000 {
        report.notes.push(format!("{n_trials} trials is below the recommended 1000"));
    }
    report.passed = Some(z < 3.0);
    if report.passed == Some(false) {
        report.replay = Some(format!(
            "seed {seed}, batch size {}, prior {prior:?}, w {:?}",
            setup.batch_size,
            setup.w.as_slice()
        ));
    }
    Ok(report)
}

/// Inputs to [`bias_decay_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct BiasDecaySetup {
    /// Offline sizes, strictly increasing, at least three.
    pub sizes: Vec<usize>,
    /// Offline sets drawn per size.
    pub repetitions: usize,
    /// Prior of the target stream.
    pub target_prior: Vec<f64>,
    /// Samples per class in the reference sample standing in for the
    /// population.
    pub reference_per_class: usize,
    /// Constant added to every measured bias (negative control).
    pub injected_bias: f64,
    pub seed: u64,
}

impl BiasDecaySetup {
    pub fn benchmark(seed: u64) -> Self {
        Self {
            sizes: vec![100, 1000, 10000],
            repetitions: 100,
            target_prior: vec![0.6, 0.3, 0.1],
            reference_per_class: 100_000,
            injected_bias: 0.0,
            seed,
        }
    }
}

/// Least-squares slope of `y` on `x` and its residual-free weights.
fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxy / sxx, sxx)
}

/// Bias of the risk estimate built from a finite offline set, as a function
/// of its size.
///
/// A fixed `f0` (trained once on separate data) scores the stream. For each
/// offline set `S_0` the library estimates the confusion matrix and the
/// per-class risks on `S_0` and evaluates the estimator on the stream's
/// expected prediction histogram, so the only error left is the one due to
/// `S_0`. Its absolute gap to the reference risk is averaged over
/// repetitions and regressed on size in log-log scale.
pub fn bias_decay_experiment(setup: &BiasDecaySetup) -> Result<OracleReport> {
    let sizes = &setup.sizes;
    if sizes.len() < 3 || sizes.windows(2).any(|p| p[0] >= p[1]) || setup.repetitions == 0 {
        return Err(olas_core::Error::InvalidInput(
            "sizes must be strictly increasing with at least three points".into(),
        )
        .into());
    }
    let model = GaussianClassModel::benchmark();
    let k = model.classes();
    if setup.target_prior.len() != k {
        return Err(olas_core::Error::InvalidInput("target prior must have K entries".into()).into());
    }
    let mut rng = substream(setup.seed, Substream::Offline);
    let train = OfflineData::new(&model.sample_balanced(1200 * k / 3, &mut rng), k)?;
    let f0 = olas_core::model::train_offline(&train, &DomainSpec::new(100.0)?, &Default::default())?;

    // Reference quantities, computed with the naive kernels.
    let mut rng = substream(setup.seed, Substream::Reference);
    let reference = model.sample_balanced(setup.reference_per_class * k, &mut rng);
    let mut ref_rows = vec![Vec::new(); k];
    for s in reference {
        ref_rows[s.label].push(s.features);
    }
    let mut c_ref = vec![0.0; k * k];
    let mut r_ref = vec![0.0; k];
    for (y, rows) in ref_rows.iter().enumerate() {
        for x in rows {
            let i = naive::argmax(&naive::scores(f0.as_slice(), k, x));
            c_ref[i * k + y] += 1.0 / rows.len() as f64;
            r_ref[y] += naive::cross_entropy(f0.as_slice(), k, x, y) / rows.len() as f64;
        }
    }
    let mu = &setup.target_prior;
    let hist: Vec<f64> = (0..k).map(|i| (0..k).map(|j| c_ref[i * k + j] * mu[j]).sum()).collect();
    let hist = PriorVector::new(hist)?;
    let truth: f64 = mu.iter().zip(&r_ref).map(|(m, r)| m * r).sum();

    let mut log_n = Vec::new();
    let mut log_bias = Vec::new();
    let mut var_log = Vec::new();
    let mut report = OracleReport::new("bias_decay", 0.0, sizes.len() * setup.repetitions);
    for (si, &n) in sizes.iter().enumerate() {
        let gaps: Vec<f64> = (0..setup.repetitions)
            .into_par_iter()
            .map(|rep| {
                let idx = (si * setup.repetitions + rep) as u64;
                let mut rng = indexed_substream(setup.seed, Substream::Offline, idx);
                let s0 = OfflineData::new(&model.sample_balanced(n, &mut rng), k)?;
                let c = regularize_and_invertibility(&estimate_confusion(&f0, &s0)?, 1e-3)?;
                let raw = estimate_prior(&c, &hist)?;
                let pcr = per_class_risks(&f0, &s0, false)?;
                Ok((unbiased_risk(&raw, &pcr)?.value - truth).abs() + setup.injected_bias)
            })
            .collect::<Result<_>>()?;
        let r = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / r;
        let var = if gaps.len() > 1 {
            gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (r - 1.0)
        } else {
            f64::NAN
        };
        report.push(&format!("bias_n{n}"), mean);
        log_n.push((n as f64).ln());
        log_bias.push(mean.ln());
        // Delta method for the log of a sample mean.
        var_log.push(var / (r * mean * mean));
    }
    let (slope, sxx) = ols_slope(&log_n, &log_bias);
    let mx = log_n.iter().sum::<f64>() / log_n.len() as f64;
    let half_width = if setup.repetitions > 1 {
        let v: f64 = log_n.iter().zip(&var_log).map(|(x, v)| (x - mx) * (x - mx) * v).sum::<f64>() / (sxx * sxx);
        1.96 * v.sqrt()
    } else {
        report.notes.push("single repetition: the confidence interval is unbounded".into());
        f64::INFINITY
    };
    report.push("slope", slope);
    report.push("ci_low", slope - half_width);
    report.push("ci_high", slope + half_width);
    report.passed = Some((-0.7..=-0.3).contains(&slope));
    if report.passed == Some(false) {
        report.replay = Some(format!("{setup:?}"));
    }
    Ok(report)
}

/// Hint used by a replay instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplayHint {
    /// Plain ensemble.
    None,
    /// Optimistic ensemble with an all-zero hint.
    Zero,
    /// The current batch's raw estimate.
    Forward,
    /// Running-average periodic buffer of the given length.
    Periodic(usize),
}

/// A tiny two-class ensemble problem.
#[derive(Debug, Clone)]
pub struct ReplayInstance {
    pub offline: Vec<LabeledSample>,
    pub f0: Vec<f64>,
    pub dim: usize,
    pub radius: f64,
    pub etas: Vec<f64>,
    pub meta_rate: MetaRate,
    pub hint: ReplayHint,
    /// One feature matrix (rows) per round.
    pub batches: Vec<Vec<Vec<f64>>>,
}

impl ReplayInstance {
    /// `d = 2`, four offline points per class, batches of five drawn from a
    /// prior that alternates between two skewed values.
    pub fn synthetic(rounds: usize, hint: ReplayHint, meta_rate: MetaRate, seed: u64) -> Result<Self> {
        let model = GaussianClassModel::new(vec![vec![1.0, 0.5], vec![-1.0, -0.5]], vec![0.5, 0.5])?;
        let mut rng = substream(seed, Substream::Offline);
        let offline = model.sample_balanced(8, &mut rng);
        let mut rng = substream(seed, Substream::Stream);
        let priors = [PriorVector::new(vec![0.8, 0.2])?, PriorVector::new(vec![0.3, 0.7])?];
        let batches = (0..rounds)
            .map(|t| {
                let b = olas_core::shiftsim::sample_batch(&priors[t % 2], &model, 5, &mut rng)?;
                Ok(b.features().iter_rows().map(<[f64]>::to_vec).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            offline,
            f0: vec![0.8, 0.3, 0.1, -0.7, -0.4, -0.1],
            dim: 2,
            radius: 2.0,
            etas: vec![0.05, 0.4],
            meta_rate,
            hint,
            batches,
        })
    }
}

/// Trajectory of one run: deployed parameters and weights per round.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub deployed: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

fn library_trajectory(inst: &ReplayInstance) -> Result<Trajectory> {
    let k = 2;
    let offline = OfflineData::new(&inst.offline, k)?;
    let f0 = ModelParams::from_weights(k, inst.dim, inst.f0.clone())?;
    let domain = DomainSpec::new(inst.radius)?;
    let confusion = regularize_and_invertibility(&estimate_confusion(&f0, &offline)?, 1e-3)?;
    let variant = match inst.hint {
        ReplayHint::None => PoolVariant::Atlas,
        _ => PoolVariant::AtlasAda,
    };
    let hint = match inst.hint {
        ReplayHint::Forward => Some(HintState::new(HintKind::Forward, offline.class_prior(), inst.dim)?),
        ReplayHint::Periodic(len) => Some(HintState::new(
            HintKind::Periodic {
                len,
                mix: Mix::RunningAverage,
            },
            offline.class_prior(),
            inst.dim,
        )?),
        _ => None,
    };
    let config = EnsembleConfig {
        pool: StepPool::from_etas(inst.etas.clone(), variant)?,
        meta_rate: inst.meta_rate,
        prox: ProxConfig {
            tol: 1e-13,
            max_iters: 100_000,
        },
    };
    let mut ens = Ensemble::new(config, &f0, hint)?;
    let ctx = RoundContext {
        f0: &f0,
        confusion: &confusion,
        offline: &offline,
        domain: &domain,
    };
    let mut out = Trajectory {
        deployed: Vec::new(),
        weights: Vec::new(),
    };
    for rows in &inst.batches {
        let batch = Features::from_rows(inst.dim, rows.iter().map(Vec::as_slice))?;
        let r = ens.round(&ctx, &batch)?;
        out.deployed.push(r.deployed.into_inner());
        out.weights.push(r.weights);
    }
    Ok(out)
}

/// `argmin_{||w|| <= r} eta sum_k h[k] R_k(w) + ||w - w_hat||^2 / 2` by
/// projected gradient descent with a fixed step from a curvature bound.
fn reference_prox(w_hat: &[f64], h: &[f64], rows: &[Vec<Vec<f64>>], eta: f64, r: f64) -> Vec<f64> {
    let max_sq = rows.iter().flatten().map(|x| 1.0 + x.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
    let curvature = 1.0 + eta * h.iter().map(|v| v.abs()).sum::<f64>() * max_sq / 2.0;
    let step = 1.0 / curvature;
    let mut w = w_hat.to_vec();
    for _ in 0..200_000 {
        let mut g: Vec<f64> = w.iter().zip(w_hat).map(|(a, b)| a - b).collect();
        for (y, class_rows) in rows.iter().enumerate() {
            let (_, gy) = naive::class_risk(&w, 2, class_rows, y);
            for (a, b) in g.iter_mut().zip(gy) {
                *a += eta * h[y] * b;
            }
        }
        let mut next: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        naive::project_ball(&mut next, r);
        let moved = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        w = next;
        if moved < 1e-16 {
            break;
        }
    }
    w
}

/// The ensemble recomputed round by round with the naive kernels.
fn reference_trajectory(inst: &ReplayInstance) -> Trajectory {
    let n = inst.etas.len();
    let mut rows = vec![Vec::new(); 2];
    for s in &inst.offline {
        rows[s.label].push(s.features.clone());
    }
    let risk = |w: &[f64], y: usize| naive::class_risk(w, 2, &rows[y], y);

    // Confusion matrix C[i][j] = P(predict i | y = j), with the same ridge
    // rule as the estimator.
    let mut c = [0.0; 4];
    for (y, class_rows) in rows.iter().enumerate() {
        for x in class_rows {
            let i = naive::argmax(&naive::scores(&inst.f0, 2, x));
            c[i * 2 + y] += 1.0 / class_rows.len() as f64;
        }
    }
    if naive::min_singular_2x2(&c) < 1e-3 {
        let mut lambda = 1e-6;
        loop {
            let l = [c[0] + lambda, c[1], c[2], c[3] + lambda];
            if naive::min_singular_2x2(&l) >= 1e-3 {
                c = l;
                break;
            }
            lambda *= 10.0;
        }
    }
    let sigma = naive::min_singular_2x2(&c);
    let total = (rows[0].len() + rows[1].len()) as f64;
    let offline_prior = [rows[0].len() as f64 / total, rows[1].len() as f64 / total];

    let optimistic = inst.hint != ReplayHint::None;
    let mut hat = vec![inst.f0.clone(); n];
    let mut cum = vec![0.0; n];
    let mut dev_sq = 0.0;
    let mut slots: Vec<[f64; 2]> = vec![offline_prior; if let ReplayHint::Periodic(l) = inst.hint { l } else { 1 }];
    let mut slot_updates = vec![0usize; slots.len()];
    let mut next_hint = match inst.hint {
        ReplayHint::Periodic(l) => slots[1 % l],
        _ => offline_prior,
    };
    let mut out = Trajectory {
        deployed: Vec::new(),
        weights: Vec::new(),
    };

    for (t0, batch) in inst.batches.iter().enumerate() {
        let t = t0 + 1;
        let mut hist = [0.0; 2];
        for x in batch {
            hist[naive::argmax(&naive::scores(&inst.f0, 2, x))] += 1.0 / batch.len() as f64;
        }
        let det = c[0] * c[3] - c[1] * c[2];
        let raw = [(hist[0] * c[3] - c[1] * hist[1]) / det, (c[0] * hist[1] - c[2] * hist[0]) / det];

        let mut h = match inst.hint {
            ReplayHint::None | ReplayHint::Zero => [0.0, 0.0],
            ReplayHint::Forward => raw,
            ReplayHint::Periodic(_) => next_hint,
        };
        let l1 = h[0].abs() + h[1].abs();
        if sigma * l1 > 1.0 {
            let s = 1.0 / (sigma * l1);
            h = [h[0] * s, h[1] * s];
        }

        let bases: Vec<Vec<f64>> = if optimistic && (h[0] != 0.0 || h[1] != 0.0) {
            hat.iter().zip(&inst.etas).map(|(w, &eta)| reference_prox(w, &h, &rows, eta, inst.radius)).collect()
        } else {
            hat.clone()
        };

        let mut losses = vec![0.0; n];
        let mut hint_losses = vec![0.0; n];
        let mut grads = Vec::with_capacity(n);
        for (i, w) in bases.iter().enumerate() {
            let (r0, g0) = risk(w, 0);
            let (r1, g1) = risk(w, 1);
            losses[i] = raw[0] * r0 + raw[1] * r1;
            if optimistic {
                hint_losses[i] = h[0] * r0 + h[1] * r1;
            }
            grads.push(g0.iter().zip(&g1).map(|(a, b)| raw[0] * a + raw[1] * b).collect::<Vec<f64>>());
        }

        let eps = match inst.meta_rate {
            MetaRate::Fixed(e) => e,
            MetaRate::SelfConfident => (((n as f64).ln() + 2.0) / (1.0 + dev_sq)).sqrt(),
        };
        let expo: Vec<f64> = (0..n).map(|i| -eps * (cum[i] + hint_losses[i])).collect();
        let top = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let un: Vec<f64> = expo.iter().map(|e| (e - top).exp()).collect();
        let z: f64 = un.iter().sum();
        let p: Vec<f64> = un.iter().map(|u| u / z).collect();

        let mut deployed = vec![0.0; inst.f0.len()];
        for (pi, b) in p.iter().zip(&bases) {
            for (d, v) in deployed.iter_mut().zip(b) {
                *d += pi * v;
            }
        }

        for i in 0..n {
            cum[i] += losses[i];
        }
        if inst.meta_rate == MetaRate::SelfConfident {
            let (r0, _) = risk(&deployed, 0);
            let (r1, _) = risk(&deployed, 1);
            let r_ref = raw[0] * r0 + raw[1] * r1;
            let h_ref = if optimistic { h[0] * r0 + h[1] * r1 } else { 0.0 };
            let mut d = 0.0f64;
            for i in 0..n {
                d = d.max(((losses[i] - r_ref) - (hint_losses[i] - h_ref)).abs());
            }
            dev_sq += d * d;
        }

        for i in 0..n {
            for (w, g) in hat[i].iter_mut().zip(&grads[i]) {
                *w -= inst.etas[i] * g;
            }
            naive::project_ball(&mut hat[i], inst.radius);
        }

        if let ReplayHint::Periodic(l) = inst.hint {
            let s = t % l;
            slot_updates[s] += 1;
            let lam = 1.0 / slot_updates[s] as f64;
            for (v, r) in slots[s].iter_mut().zip(raw) {
                *v = (1.0 - lam) * *v + lam * r;
            }
            next_hint = slots[(t + 1) % l];
        }

        out.deployed.push(deployed);
        out.weights.push(p);
    }
    out
}

/// Runs the library ensemble and the straight-line recomputation on the
/// same instance and compares deployed parameters and weights elementwise.
pub fn replay_small_instance(inst: &ReplayInstance) -> Result<OracleReport> {
    let tol = 1e-9;
    let t = inst.batches.len();
    if t == 0 || t > 20 || inst.etas.len() != 2 || inst.f0.len() != 2 * (inst.dim + 1) {
        return Err(olas_core::Error::InvalidInput("replay needs K = 2, N = 2 and 1 <= T <= 20".into()).into());
    }
    let lib = library_trajectory(inst)?;
    let reference = reference_trajectory(inst);
    let mut report = OracleReport::new("replay_small_instance", tol, t);
    let mut max_dep = 0.0f64;
    let mut max_w = 0.0f64;
    let mut first_bad = None;
    for r in 0..t {
        let dd = lib.deployed[r].iter().zip(&reference.deployed[r]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dw = lib.weights[r].iter().zip(&reference.weights[r]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if (dd > tol || dw > tol) && first_bad.is_none() {
            first_bad = Some(r + 1);
        }
        max_dep = max_dep.max(dd);
        max_w = max_w.max(dw);
    }
    report.push("max_abs_diff_deployed", max_dep);
    report.push("max_abs_diff_weights", max_w);
    report.passed = Some(first_bad.is_none());
    if let Some(r) = first_bad {
        report.replay = Some(format!(
            "first differing round {r}: library {:?} vs reference {:?}; instance {:?}",
            lib.deployed[r - 1],
            reference.deployed[r - 1],
            inst
        ));
    }
    Ok(report)
}

/// Library trajectory alone, e.g. to check weight behavior.
pub fn replay_library(inst: &ReplayInstance) -> Result<Trajectory> {
    library_trajectory(inst)
}

/// Names accepted by [`run_suite`].
pub const SUITES: [&str; 6] = ["unbiasedness", "bias-decay", "gradients", "simplex", "replay", "all"];

/// Unbiasedness on the synthetic benchmark offline phase: the offline pool
/// doubles as the population, at the offline prior and a skewed prior, for
/// each batch size.
pub fn unbiasedness_suite(batch_sizes: &[usize], n_trials: usize, seed: u64) -> Result<Vec<OracleReport>> {
    let config = RunConfig::benchmark(AlgorithmId::Fix, olas_core::shiftsim::ShiftKind::Squ);
    let phase = prepare_offline(&config, seed)?;
    let k = phase.classes();
    // Exact with respect to the pool, without regularization.
    let confusion = estimate_confusion(&phase.f0, &phase.offline)?;
    let mut rng = substream(seed, Substream::Algorithm);
    let mut w = random_params(&mut rng, k, phase.offline.dim(), 0.3);
    w.axpy(1.0, &phase.f0);
    let pcr = per_class_risks(&w, &phase.offline, false)?;
    let skewed = PriorVector::new(vec![0.6, 0.3, 0.1])?;
    let mut out = Vec::new();
    for prior in [&phase.offline_prior, &skewed] {
        for &n in batch_sizes {
            let setup = UnbiasednessSetup {
                w: &w,
                true_prior: prior,
                pool: &phase.offline,
                f0: &phase.f0,
                confusion: &confusion,
                pcr: &pcr,
                batch_size: n,
            };
            let mut r = monte_carlo_unbiasedness(&setup, n_trials, seed ^ n as u64)?;
            r.oracle = format!("unbiasedness_n{n}_prior{:?}", prior.as_slice());
            out.push(r);
        }
    }
    Ok(out)
}

/// Every replay configuration: plain, zero-hint, forward and periodic
/// hints, fixed and self-confident rates.
pub fn replay_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let cases = [
        (ReplayHint::None, MetaRate::Fixed(0.5)),
        (ReplayHint::None, MetaRate::SelfConfident),
        (ReplayHint::Zero, MetaRate::SelfConfident),
        (ReplayHint::Forward, MetaRate::Fixed(0.5)),
        (ReplayHint::Forward, MetaRate::SelfConfident),
        (ReplayHint::Periodic(2), MetaRate::SelfConfident),
        (ReplayHint::Periodic(3), MetaRate::Fixed(0.5)),
    ];
    let mut out = Vec::new();
    for (i, (hint, rate)) in cases.into_iter().enumerate() {
        for t in [1, 3, 20] {
            let inst = ReplayInstance::synthetic(t, hint, rate, seed + i as u64)?;
            let mut r = replay_small_instance(&inst)?;
            r.oracle = format!("replay_{hint:?}_{rate:?}_T{t}");
            out.push(r);
        }
    }
    Ok(out)
}

/// Runs a named suite with its default sizes.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<OracleReport>> {
    match name {
        "unbiasedness" => unbiasedness_suite(&[1, 10, 100], 10_000, seed),
        "bias-decay" => Ok(vec![bias_decay_experiment(&BiasDecaySetup::benchmark(seed))?]),
        "gradients" => GradientTarget::ALL.iter().map(|&t| gradient_check(t, 100, seed)).collect(),
        "simplex" => Ok(vec![simplex_projection_check(1000, seed)?]),
        "replay" => replay_suite(seed),
        "all" => {
            let mut out = Vec::new();
            for s in &SUITES[..SUITES.len() - 1] {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        other => Err(HarnessError::Config(format!(
            "unknown suite `{other}`; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_differences_of_quadratic_and_linear() {
        let w = [0.3, -1.2, 2.0];
        let g = finite_difference_gradient(|v| 0.5 * v.iter().map(|x| x * x).sum::<f64>(), &w, 1e-4).unwrap();
        for (a, b) in g.iter().zip(&w) {
            assert!((a - b).abs() < 1e-8);
        }
        let g = finite_difference_gradient(|v| 2.0 * v[0] - 3.0 * v[1] + v[2], &w, 0.5).unwrap();
        for (a, b) in g.iter().zip([2.0, -3.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(finite_difference_gradient(|_| 0.0, &w, 0.0).is_err());
        assert!(finite_difference_gradient(|v| v[0].ln(), &[0.0], 1e-3).is_err());
    }

    #[test]
    fn brute_force_projection_examples() {
        assert_eq!(brute_force_simplex_projection(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(brute_force_simplex_projection(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = brute_force_simplex_projection(&[0.5, 0.5, 0.5]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn naive_solve_and_singular_value() {
        let x = naive::solve(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!((naive::min_singular_2x2(&[3.0, 0.0, 0.0, 0.5]) - 0.5).abs() < 1e-14);
        assert!(naive::solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn single_trial_leaves_verdict_undefined() {
        let samples: Vec<_> = (0..4)
            .map(|i| LabeledSample {
                features: vec![if i % 2 == 0 { 5.0 } else { -5.0 }],
                label: i % 2,
            })
            .collect();
        let pool = OfflineData::new(&samples, 2).unwrap();
        let f0 = ModelParams::from_weights(2, 1, vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        let pcr = per_class_risks(&f0, &pool, false).unwrap();
        let c = ConfusionMatrix::identity(2);
        let prior = PriorVector::one_hot(2, 1).unwrap();
        let setup = UnbiasednessSetup {
            w: &f0,
            true_prior: &prior,
            pool: &pool,
            f0: &f0,
            confusion: &c,
            pcr: &pcr,
            batch_size: 3,
        };
        let r = monte_carlo_unbiasedness(&setup, 1, 0).unwrap();
        assert_eq!(r.passed, None);
        assert!(r.stat("stderr").unwrap().is_nan());

        // A perfect classifier with identity C and a one-hot prior: every
        // trial's estimate is exactly class 1's risk.
        let r = monte_carlo_unbiasedness(&setup, 50, 0).unwrap();
        assert_eq!(r.stat("stderr"), Some(0.0));
        assert_eq!(r.stat("mean_estimate"), Some(pcr.values[1]));
        assert_eq!(r.passed, Some(true));
    }

    #[test]
    fn replay_at_t1_deploys_f0() {
        let inst = ReplayInstance::synthetic(1, ReplayHint::None, MetaRate::Fixed(0.5), 3).unwrap();
        let traj = replay_library(&inst).unwrap();
        assert_eq!(traj.weights[0], vec![0.5, 0.5]);
        for (a, b) in traj.deployed[0].iter().zip(&inst.f0) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unknown_suite_is_a_config_error() {
        let e = run_suite("nope", 0).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
