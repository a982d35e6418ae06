//! Multiclass linear model with softmax cross-entropy loss.
//!
//! Parameters are a `K x (d+1)` row-major matrix; the last column multiplies
//! the constant feature 1, so the bias sits inside the norm constraint and the
//! domain projection stays a single rescale.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::LabeledSample;
use crate::error::{invalid, Error, Result};
use crate::math::{argmax, norm2, softmax_in_place, sqrt};
use crate::prior::PriorVector;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    classes: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; classes * (dim + 1)],
        }
    }

    /// `weights` is row-major `classes x (dim + 1)`.
    pub fn from_weights(classes: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if classes < 2 || dim == 0 {
            return Err(invalid("model needs K >= 2 and d >= 1"));
        }
        if weights.len() != classes * (dim + 1) {
            return Err(invalid("weight buffer has the wrong length"));
        }
        Ok(Self {
            classes,
            dim,
            weights,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Feature dimension `d` (without the bias column).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.weights
    }

    /// Row `k` of the weight matrix, bias last.
    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.weights[k * w..(k + 1) * w]
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.weights)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|x| x.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.classes == other.classes && self.dim == other.dim
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.weights.iter_mut().zip(&other.weights) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in self.weights.iter_mut() {
            *x *= a;
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        sqrt(
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
        )
    }
}

/// Origin-centred L2 ball of the given radius. Its diameter is `2 * radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    radius: f64,
}

impl DomainSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("domain radius must be positive and finite"));
        }
        Ok(Self { radius })
    }

    /// Default radius `2 * max(1, ||f0||)`.
    pub fn around(f0: &ModelParams) -> Self {
        Self {
            radius: 2.0 * f0.norm().max(1.0),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, w: &ModelParams) -> bool {
        w.norm() <= self.radius * (1.0 + 1e-12)
    }
}

pub fn project_to_domain(params: &ModelParams, domain: &DomainSpec) -> ModelParams {
    let mut out = params.clone();
    project_in_place(&mut out, domain);
    out
}

pub(crate) fn project_in_place(params: &mut ModelParams, domain: &DomainSpec) {
    let n = params.norm();
    if n > domain.radius {
        params.scale(domain.radius / n);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    pub grad_bound: f64,
    pub loss_bound: f64,
}

fn check_input(params: &ModelParams, x: &[f64]) -> Result<()> {
    if x.len() != params.dim {
        return Err(invalid("feature dimension does not match the model"));
    }
    Ok(())
}

#[inline]
fn scores_into(params: &ModelParams, x: &[f64], out: &mut [f64]) {
    let w = params.dim + 1;
    for (k, s) in out.iter_mut().enumerate() {
        let row = &params.weights[k * w..(k + 1) * w];
        let mut acc = row[params.dim];
        for (a, b) in row[..params.dim].iter().zip(x) {
            acc += a * b;
        }
        *s = acc;
    }
}

/// Linear scores `W [x; 1]`.
pub fn predict_scores(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    check_input(params, x)?;
    let mut s = vec![0.0; params.classes];
    scores_into(params, x, &mut s);
    Ok(s)
}

/// Argmax class (0-based), smallest index on ties.
pub fn predict_label(params: &ModelParams, x: &[f64]) -> Result<usize> {
    Ok(argmax(&predict_scores(params, x)?))
}

/// Class probabilities `softmax(W [x; 1])`.
pub fn predict_proba(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    let mut s = predict_scores(params, x)?;
    softmax_in_place(&mut s);
    Ok(s)
}

/// Softmax cross-entropy `-log softmax(W [x; 1])[y]`.
pub fn surrogate_loss(params: &ModelParams, x: &[f64], y: usize) -> Result<f64> {
    if y >= params.classes {
        return Err(invalid("label out of range"));
    }
    let mut s = predict_scores(params, x)?;
    let sy = s[y];
    let lse = softmax_in_place(&mut s);
    Ok(lse - sy)
}

/// `(softmax(scores) - onehot(y)) [x; 1]^T`.
pub fn surrogate_loss_gradient(params: &ModelParams, x: &[f64], y: usize) -> Result<ModelParams> {
    if y >= params.classes {
        return Err(invalid("label out of range"));
    }
    let mut p = predict_scores(params, x)?;
    softmax_in_place(&mut p);
    let mut g = ModelParams::zeros(params.classes, params.dim);
    let w = params.dim + 1;
    for (k, &pk) in p.iter().enumerate() {
        let c = pk - if k == y { 1.0 } else { 0.0 };
        let row = &mut g.weights[k * w..(k + 1) * w];
        for (r, xi) in row[..params.dim].iter_mut().zip(x) {
            *r = c * xi;
        }
        row[params.dim] = c;
    }
    Ok(g)
}

/// Labeled offline set grouped by class, with features stored augmented as
/// `[x; 1]` so that risk evaluation is a tight loop.
#[derive(Debug, Clone)]
pub struct OfflineData {
    classes: usize,
    dim: usize,
    by_class: Vec<Vec<f64>>,
    counts: Vec<usize>,
    max_sq_norm: Vec<f64>,
}

impl OfflineData {
    /// Every class `0..classes` must appear at least once.
    pub fn new(samples: &[LabeledSample], classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(invalid("need at least two classes"));
        }
        let Some(first) = samples.first() else {
            return Err(invalid("offline set is empty"));
        };
        let dim = first.features.len();
        if dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        let mut by_class = vec![Vec::new(); classes];
        let mut counts = vec![0usize; classes];
        let mut max_sq_norm = vec![0.0f64; classes];
        for s in samples {
            if s.features.len() != dim {
                return Err(invalid("offline samples must share the dimension"));
            }
            if s.label >= classes {
                return Err(invalid("offline label out of range"));
            }
            let buf = &mut by_class[s.label];
            buf.extend_from_slice(&s.features);
            buf.push(1.0);
            counts[s.label] += 1;
            let sq = 1.0 + s.features.iter().map(|x| x * x).sum::<f64>();
            max_sq_norm[s.label] = max_sq_norm[s.label].max(sq);
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::MissingClass { class: k + 1 });
        }
        Ok(Self {
            classes,
            dim,
            by_class,
            counts,
            max_sq_norm,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.counts
    }

    /// Empirical class prior of the offline set.
    pub fn class_prior(&self) -> PriorVector {
        PriorVector::from_counts(&self.counts).expect("every class is present")
    }

    /// Feature rows (without the appended 1) of class `k`.
    pub fn class_features(&self, k: usize) -> impl Iterator<Item = &[f64]> + '_ {
        self.by_class[k].chunks_exact(self.dim + 1).map(move |r| &r[..self.dim])
    }

    /// All samples as `(features, label)`, grouped by class.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        (0..self.classes).flat_map(move |k| self.class_features(k).map(move |x| (x, k)))
    }

    /// Largest `||[x; 1]||^2` within class `k`.
    pub fn max_augmented_sq_norm(&self, k: usize) -> f64 {
        self.max_sq_norm[k]
    }

    /// Accumulates class `k`'s summed loss and, when `grad` is given, adds
    /// `scale * sum of gradients` into it.
    fn class_pass(
        &self,
        params: &ModelParams,
        k: usize,
        scratch: &mut [f64],
        grad: Option<(&mut [f64], f64)>,
    ) -> f64 {
        let w = self.dim + 1;
        let kk = self.classes;
        let weights = &params.weights;
        let mut loss = 0.0;
        match grad {
            None => {
                for row in self.by_class[k].chunks_exact(w) {
                    for (j, s) in scratch.iter_mut().enumerate() {
                        *s = dot_row(&weights[j * w..(j + 1) * w], row);
                    }
                    let sy = scratch[k];
                    loss += log_sum_exp(scratch) - sy;
                }
            }
            Some((g, scale)) => {
                for row in self.by_class[k].chunks_exact(w) {
                    for (j, s) in scratch.iter_mut().enumerate() {
                        *s = dot_row(&weights[j * w..(j + 1) * w], row);
                    }
                    let sy = scratch[k];
                    let lse = softmax_in_place(scratch);
                    loss += lse - sy;
                    for j in 0..kk {
                        let c = scale * (scratch[j] - if j == k { 1.0 } else { 0.0 });
                        let gr = &mut g[j * w..(j + 1) * w];
                        for (a, b) in gr.iter_mut().zip(row) {
                            *a += c * b;
                        }
                    }
                }
            }
        }
        loss
    }

    /// `sum_k coeffs[k] * R_k(w)` and optionally its gradient, where `R_k` is
    /// the mean loss over class `k`. Classes with a zero coefficient are
    /// skipped.
    pub fn weighted_risk(
        &self,
        params: &ModelParams,
        coeffs: &[f64],
        with_gradient: bool,
    ) -> Result<(f64, Option<ModelParams>)> {
        self.check_params(params)?;
        if coeffs.len() != self.classes {
            return Err(invalid("risk coefficients must have K entries"));
        }
        let mut scratch = vec![0.0; self.classes];
        let mut grad = with_gradient.then(|| ModelParams::zeros(self.classes, self.dim));
        let mut value = 0.0;
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let n = self.counts[k] as f64;
            let g = grad.as_mut().map(|g| (g.weights.as_mut_slice(), c / n));
            value += c * self.class_pass(params, k, &mut scratch, g) / n;
        }
        Ok((value, grad))
    }

    fn check_params(&self, params: &ModelParams) -> Result<()> {
        if params.classes != self.classes || params.dim != self.dim {
            return Err(invalid("model shape does not match the offline data"));
        }
        Ok(())
    }
}

#[inline]
fn dot_row(w: &[f64], x: &[f64]) -> f64 {
    // Four independent accumulators; rows are short, so the add chain
    // dominates otherwise.
    let n = w.len().min(x.len());
    let (w, x) = (&w[..n], &x[..n]);
    let mut acc = [0.0f64; 4];
    let mut wc = w.chunks_exact(4);
    let mut xc = x.chunks_exact(4);
    for (a, b) in (&mut wc).zip(&mut xc) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    let mut tail = 0.0;
    for (a, b) in wc.remainder().iter().zip(xc.remainder()) {
        tail += a * b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn log_sum_exp(s: &[f64]) -> f64 {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    for &x in s {
        acc += crate::math::exp(x - m);
    }
    m + crate::math::ln(acc)
}

/// Per-class mean losses (and gradients) over the offline set.
#[derive(Debug, Clone, PartialEq)]
pub struct PerClassRisks {
    pub values: Vec<f64>,
    pub gradients: Option<Vec<ModelParams>>,
}

impl PerClassRisks {
    /// `sum_k coeffs[k] * values[k]` and the matching gradient combination.
    pub fn combine(&self, coeffs: &[f64]) -> Result<(f64, Option<ModelParams>)> {
        if coeffs.len() != self.values.len() {
            return Err(invalid("coefficient count does not match K"));
        }
        let value = coeffs.iter().zip(&self.values).map(|(c, v)| c * v).sum();
        let gradient = self.gradients.as_ref().map(|gs| {
            let mut g = ModelParams::zeros(gs[0].classes, gs[0].dim);
            for (c, gk) in coeffs.iter().zip(gs) {
                g.axpy(*c, gk);
            }
            g
        });
        Ok((value, gradient))
    }
}

pub fn per_class_risks(
    params: &ModelParams,
    offline: &OfflineData,
    with_gradients: bool,
) -> Result<PerClassRisks> {
    offline.check_params(params)?;
    let mut scratch = vec![0.0; offline.classes];
    let mut values = Vec::with_capacity(offline.classes);
    let mut gradients = with_gradients.then(Vec::new);
    for k in 0..offline.classes {
        let n = offline.counts[k] as f64;
        match gradients.as_mut() {
            Some(gs) => {
                let mut g = ModelParams::zeros(offline.classes, offline.dim);
                let l = offline.class_pass(params, k, &mut scratch, Some((&mut g.weights, 1.0 / n)));
                values.push(l / n);
                gs.push(g);
            }
            None => values.push(offline.class_pass(params, k, &mut scratch, None) / n),
        }
    }
    Ok(PerClassRisks { values, gradients })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineTrainConfig {
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for OfflineTrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-6,
        }
    }
}

/// Projected full-batch gradient descent on the mean loss, starting from
/// zero with step `1 / L` where `L = max ||[x; 1]||^2 / 4`.
pub fn train_offline(
    offline: &OfflineData,
    domain: &DomainSpec,
    config: &OfflineTrainConfig,
) -> Result<ModelParams> {
    let total = offline.len() as f64;
    let coeffs: Vec<f64> = offline.counts.iter().map(|&c| c as f64 / total).collect();
    let curvature = offline.max_sq_norm.iter().copied().fold(0.0, f64::max) / 4.0;
    let step = 1.0 / curvature;
    let mut w = ModelParams::zeros(offline.classes, offline.dim);
    for _ in 0..config.max_iters {
        let (_, g) = offline.weighted_risk(&w, &coeffs, true)?;
        let g = g.expect("gradient requested");
        if g.norm() < config.tol {
            break;
        }
        w.axpy(-step, &g);
        project_in_place(&mut w, domain);
        if !w.is_finite() {
            return Err(Error::Numerical("offline training diverged".into()));
        }
    }
    Ok(w)
}

/// Mean loss over every offline sample.
pub fn offline_mean_loss(params: &ModelParams, offline: &OfflineData) -> Result<f64> {
    let total = offline.len() as f64;
    let coeffs: Vec<f64> = offline.counts.iter().map(|&c| c as f64 / total).collect();
    Ok(offline.weighted_risk(params, &coeffs, false)?.0)
}

/// Bounds on the per-sample gradient norm and loss, taken as
/// `safety_factor` times the maxima over the offline set evaluated at `f0`
/// and at the domain boundary along `f0`'s direction.
pub fn estimate_constants(
    f0: &ModelParams,
    offline: &OfflineData,
    domain: &DomainSpec,
    safety_factor: f64,
) -> Result<LossConstants> {
    offline.check_params(f0)?;
    let mut points = vec![f0.clone()];
    let n = f0.norm();
    if n > 0.0 {
        let mut b = f0.clone();
        b.scale(domain.radius() / n);
        points.push(b);
    }
    let mut gmax = 0.0f64;
    let mut lmax = 0.0f64;
    for w in &points {
        for (x, y) in offline.iter() {
            lmax = lmax.max(surrogate_loss(w, x, y)?);
            gmax = gmax.max(surrogate_loss_gradient(w, x, y)?.norm());
        }
    }
    Ok(LossConstants {
        grad_bound: safety_factor * gmax,
        loss_bound: safety_factor * lmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(features: Vec<f64>, label: usize) -> LabeledSample {
        LabeledSample { features, label }
    }

    #[test]
    fn zero_params_give_zero_scores_and_first_class() {
        let w = ModelParams::zeros(3, 4);
        assert_eq!(predict_scores(&w, &[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(predict_label(&w, &[1.0, 2.0, 3.0, 4.0]).unwrap(), 0);
    }

    #[test]
    fn one_hot_feature_selects_weight_column() {
        let w = ModelParams::from_weights(2, 2, vec![1.0, 2.0, 0.0, 3.0, 4.0, 0.0]).unwrap();
        assert_eq!(predict_scores(&w, &[0.0, 1.0]).unwrap(), vec![2.0, 4.0]);
        assert_eq!(predict_label(&w, &[0.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn argmax_ties_break_low() {
        // bias-only models: scores equal the biases.
        let w = ModelParams::from_weights(3, 1, vec![0.0, 0.5, 0.0, 0.5, 0.0, 0.2]).unwrap();
        assert_eq!(predict_label(&w, &[7.0]).unwrap(), 0);
        let w = ModelParams::from_weights(2, 1, vec![0.0, 0.1, 0.0, 0.9]).unwrap();
        assert_eq!(predict_label(&w, &[7.0]).unwrap(), 1);
    }

    #[test]
    fn uniform_softmax_loss() {
        let w = ModelParams::zeros(2, 3);
        assert!((surrogate_loss(&w, &[1.0, -1.0, 2.0], 1).unwrap() - 2f64.ln()).abs() < 1e-15);
        let w = ModelParams::zeros(10, 3);
        assert!((surrogate_loss(&w, &[1.0, -1.0, 2.0], 4).unwrap() - 10f64.ln()).abs() < 1e-14);
        assert!(surrogate_loss(&w, &[1.0, -1.0, 2.0], 10).is_err());
        assert!(surrogate_loss(&w, &[1.0, -1.0], 0).is_err());
    }

    #[test]
    fn zero_param_gradient_rows() {
        let w = ModelParams::zeros(2, 2);
        let g = surrogate_loss_gradient(&w, &[2.0, -1.0], 0).unwrap();
        assert_eq!(g.row(0), &[-1.0, 0.5, -0.5]);
        assert_eq!(g.row(1), &[1.0, -0.5, 0.5]);
        let g = surrogate_loss_gradient(&w, &[0.0, 0.0], 1).unwrap();
        assert_eq!(g.row(0), &[0.0, 0.0, 0.5]);
        assert_eq!(g.row(1), &[0.0, 0.0, -0.5]);
    }

    #[test]
    fn projection_contract() {
        let d = DomainSpec::new(2.0).unwrap();
        let w = ModelParams::from_weights(2, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(project_to_domain(&w, &d), w);
        let w = ModelParams::from_weights(2, 1, vec![4.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((project_to_domain(&w, &d).norm() - 2.0).abs() < 1e-12);
        let z = ModelParams::zeros(2, 1);
        assert_eq!(project_to_domain(&z, &d), z);
        assert!(DomainSpec::new(0.0).is_err());
    }

    #[test]
    fn per_class_risks_single_sample_per_class() {
        let data = vec![sample(vec![1.0, 2.0], 0), sample(vec![-1.0, 0.5], 1)];
        let off = OfflineData::new(&data, 2).unwrap();
        let w = ModelParams::from_weights(2, 2, vec![0.3, -0.2, 0.1, -0.4, 0.5, 0.0]).unwrap();
        let r = per_class_risks(&w, &off, true).unwrap();
        assert!((r.values[0] - surrogate_loss(&w, &[1.0, 2.0], 0).unwrap()).abs() < 1e-14);
        assert!((r.values[1] - surrogate_loss(&w, &[-1.0, 0.5], 1).unwrap()).abs() < 1e-14);
        let g1 = surrogate_loss_gradient(&w, &[-1.0, 0.5], 1).unwrap();
        assert!(r.gradients.unwrap()[1].distance(&g1) < 1e-14);
    }

    #[test]
    fn duplicated_samples_leave_risks_unchanged() {
        let data = vec![sample(vec![1.0, 2.0], 0), sample(vec![-1.0, 0.5], 1), sample(vec![0.2, 0.1], 1)];
        let mut doubled = data.clone();
        doubled.extend(data.iter().cloned());
        let w = ModelParams::from_weights(2, 2, vec![0.3, -0.2, 0.1, -0.4, 0.5, 0.0]).unwrap();
        let a = per_class_risks(&w, &OfflineData::new(&data, 2).unwrap(), false).unwrap();
        let b = per_class_risks(&w, &OfflineData::new(&doubled, 2).unwrap(), false).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_class_is_named() {
        let data = vec![sample(vec![1.0], 0), sample(vec![2.0], 2)];
        assert_eq!(OfflineData::new(&data, 3).unwrap_err(), Error::MissingClass { class: 2 });
    }

    #[test]
    fn zero_iterations_return_zero_params() {
        let data = vec![sample(vec![1.0], 0), sample(vec![-1.0], 1)];
        let off = OfflineData::new(&data, 2).unwrap();
        let cfg = OfflineTrainConfig { max_iters: 0, tol: 1e-6 };
        let w = train_offline(&off, &DomainSpec::new(10.0).unwrap(), &cfg).unwrap();
        assert_eq!(w, ModelParams::zeros(2, 1));
    }

    #[test]
    fn offline_training_descends_monotonically() {
        let data = vec![sample(vec![1.0, 0.5], 0), sample(vec![-1.0, 0.2], 1)];
        let off = OfflineData::new(&data, 2).unwrap();
        let dom = DomainSpec::new(100.0).unwrap();
        let mut prev = f64::INFINITY;
        for iters in 0..30 {
            let cfg = OfflineTrainConfig { max_iters: iters, tol: 0.0 };
            let w = train_offline(&off, &dom, &cfg).unwrap();
            let l = offline_mean_loss(&w, &off).unwrap();
            assert!(l <= prev + 1e-15, "loss rose at iteration {iters}");
            prev = l;
        }
    }

    #[test]
    fn constants_of_identical_samples() {
        let data = vec![sample(vec![1.0, -2.0], 0), sample(vec![1.0, -2.0], 1)];
        let off = OfflineData::new(&data, 2).unwrap();
        let f0 = ModelParams::zeros(2, 2);
        let dom = DomainSpec::new(1.0).unwrap();
        let c1 = estimate_constants(&f0, &off, &dom, 1.0).unwrap();
        let g = surrogate_loss_gradient(&f0, &[1.0, -2.0], 0).unwrap().norm();
        assert!((c1.loss_bound - 2f64.ln()).abs() < 1e-15);
        assert!((c1.grad_bound - g).abs() < 1e-15);
        let c2 = estimate_constants(&f0, &off, &dom, 2.0).unwrap();
        assert!((c2.loss_bound - 2.0 * c1.loss_bound).abs() < 1e-15);
        assert!(c2.grad_bound >= c1.grad_bound);
    }
}
