//! Shift schedules and the Gaussian class model behind synthetic streams.
//!
//! The prior at round `t` is `(1 - alpha_t) mu1 + alpha_t mu2`, with
//! `alpha_t` from one of four schedules:
//!
//! * `Lin`: `t / T`.
//! * `Squ`: 1 for the first `L/2` rounds, 0 for the next `L/2`, repeating.
//! * `Sin`: `sin((t mod L) pi / L)`.
//! * `Ber`: starts at 0 and flips with probability `p` each round.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::data::{Features, LabeledSample, OnlineBatch};
use crate::error::{invalid, Result};
use crate::math::{round, sin, sqrt};
use crate::prior::{PriorVector, ShiftTrace};
use crate::rng::{substream, Substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShiftKind {
    Lin,
    Squ,
    Sin,
    Ber,
}

impl ShiftKind {
    pub const ALL: [ShiftKind; 4] = [ShiftKind::Lin, ShiftKind::Squ, ShiftKind::Sin, ShiftKind::Ber];

    pub fn name(self) -> &'static str {
        match self {
            ShiftKind::Lin => "lin",
            ShiftKind::Squ => "squ",
            ShiftKind::Sin => "sin",
            ShiftKind::Ber => "ber",
        }
    }
}

impl FromStr for ShiftKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lin" => Ok(ShiftKind::Lin),
            "squ" | "square" => Ok(ShiftKind::Squ),
            "sin" | "sine" => Ok(ShiftKind::Sin),
            "ber" | "bernoulli" => Ok(ShiftKind::Ber),
            _ => Err(invalid("unknown shift kind")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSchedule {
    pub kind: ShiftKind,
    pub mu1: PriorVector,
    pub mu2: PriorVector,
    /// Period `L` for `Squ` and `Sin`.
    pub period: usize,
    /// Flip probability for `Ber`.
    pub flip_prob: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl ShiftSchedule {
    /// Benchmark schedule: `mu1` uniform over `K`, `mu2 = e_1`,
    /// `L = sqrt(T)` rounded to an even number (at least 2), `p = 1/sqrt(T)`.
    pub fn benchmark(kind: ShiftKind, classes: usize, horizon: usize, seed: u64) -> Result<Self> {
        let root = sqrt(horizon as f64);
        let period = ((round(root / 2.0) as usize) * 2).max(2);
        let s = Self {
            kind,
            mu1: PriorVector::uniform(classes)?,
            mu2: PriorVector::one_hot(classes, 0)?,
            period,
            flip_prob: (1.0 / root).min(1.0),
            horizon,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if self.mu1.classes() != self.mu2.classes() {
            return Err(invalid("mu1 and mu2 disagree on K"));
        }
        match self.kind {
            ShiftKind::Squ if self.period < 2 || !self.period.is_multiple_of(2) => {
                Err(invalid("square period must be even and at least 2"))
            }
            ShiftKind::Sin if self.period < 2 => Err(invalid("sine period must be at least 2")),
            ShiftKind::Ber if !(0.0..=1.0).contains(&self.flip_prob) => {
                Err(invalid("flip probability must lie in [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// All `alpha_1..alpha_T`, with Ber coins drawn from the schedule
    /// sub-stream of `seed`.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = substream(self.seed, Substream::Schedule);
        let mut out = Vec::with_capacity(self.horizon);
        let mut prev = None;
        for t in 1..=self.horizon {
            let a = alpha_at(self, t, prev, &mut rng)?;
            out.push(a);
            prev = Some(a);
        }
        Ok(out)
    }

    pub fn priors(&self) -> Result<Vec<PriorVector>> {
        self.alphas()?
            .into_iter()
            .map(|a| prior_at(a, &self.mu1, &self.mu2))
            .collect()
    }

    pub fn trace(&self) -> Result<ShiftTrace> {
        ShiftTrace::new(self.priors()?)
    }
}

/// `alpha_t` for `1 <= t <= T`. `prev` is `alpha_{t-1}` and is only read by
/// `Ber`, which also is the only kind that draws from `rng`.
pub fn alpha_at<R: RngCore + ?Sized>(
    schedule: &ShiftSchedule,
    t: usize,
    prev: Option<f64>,
    rng: &mut R,
) -> Result<f64> {
    if t == 0 || t > schedule.horizon {
        return Err(invalid("round index outside 1..=T"));
    }
    let l = schedule.period;
    Ok(match schedule.kind {
        ShiftKind::Lin => t as f64 / schedule.horizon as f64,
        ShiftKind::Squ => {
            if ((t - 1) / (l / 2)).is_multiple_of(2) {
                1.0
            } else {
                0.0
            }
        }
        ShiftKind::Sin => sin((t % l) as f64 * PI / l as f64).clamp(0.0, 1.0),
        ShiftKind::Ber => {
            if t == 1 {
                0.0
            } else {
                let prev = prev.ok_or_else(|| invalid("Ber needs the previous alpha"))?;
                let u: f64 = rng.random();
                if u < schedule.flip_prob {
                    1.0 - prev
                } else {
                    prev
                }
            }
        }
    })
}

/// `(1 - alpha) mu1 + alpha mu2`.
pub fn prior_at(alpha: f64, mu1: &PriorVector, mu2: &PriorVector) -> Result<PriorVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha must lie in [0, 1]"));
    }
    if mu1.classes() != mu2.classes() {
        return Err(invalid("mu1 and mu2 disagree on K"));
    }
    PriorVector::new(
        mu1.as_slice()
            .iter()
            .zip(mu2.as_slice())
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect(),
    )
}

/// Class-conditional Gaussians with a shared diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClassModel {
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

impl GaussianClassModel {
    pub fn new(means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        if means.len() < 2 {
            return Err(invalid("need at least two class means"));
        }
        let d = variances.len();
        if d == 0 || means.iter().any(|m| m.len() != d) {
            return Err(invalid("means and variances must share the dimension"));
        }
        if variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid("variances must be positive"));
        }
        if means.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("means must be finite"));
        }
        Ok(Self { means, variances })
    }

    /// The pinned synthetic benchmark: `K = 3`, `d = 12`, unit variances.
    /// Class `k`'s mean is `s_k / sqrt(2)` where `s_k` is +1 on coordinates
    /// `4k..4k+4` and -1 elsewhere, so every pair of means is 4 apart.
    pub fn benchmark() -> Self {
        Self::block_pattern(3, 4)
    }

    /// `K` classes with `block` coordinates each, means as in
    /// [`GaussianClassModel::benchmark`]. Pairwise distance is
    /// `2 sqrt(block)`.
    pub fn block_pattern(classes: usize, block: usize) -> Self {
        let d = classes * block;
        let a = 1.0 / core::f64::consts::SQRT_2;
        let means = (0..classes)
            .map(|k| {
                (0..d)
                    .map(|j| if j / block == k { a } else { -a })
                    .collect()
            })
            .collect();
        Self {
            means,
            variances: vec![1.0; d],
        }
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// One feature vector from class `k`, appended to `out`.
    pub fn draw_into<R: RngCore + ?Sized>(&self, k: usize, rng: &mut R, out: &mut Vec<f64>) {
        for (m, v) in self.means[k].iter().zip(&self.variances) {
            let z: f64 = rng.sample(StandardNormal);
            out.push(m + sqrt(*v) * z);
        }
    }

    /// `n` labeled samples with labels drawn from `prior`.
    pub fn sample_labeled<R: RngCore + ?Sized>(
        &self,
        prior: &PriorVector,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<LabeledSample>> {
        self.check_prior(prior)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let y = sample_categorical(prior, rng);
            let mut x = Vec::with_capacity(self.dim());
            self.draw_into(y, rng, &mut x);
            out.push(LabeledSample { features: x, label: y });
        }
        Ok(out)
    }

    /// `n` samples with class counts as equal as possible (lower classes get
    /// the remainder), so every class is present once `n >= K`.
    pub fn sample_balanced<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<LabeledSample> {
        let k = self.classes();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % k;
            let mut x = Vec::with_capacity(self.dim());
            self.draw_into(y, rng, &mut x);
            out.push(LabeledSample { features: x, label: y });
        }
        out.sort_by_key(|s| s.label);
        out
    }

    fn check_prior(&self, prior: &PriorVector) -> Result<()> {
        if prior.classes() != self.classes() {
            return Err(invalid("prior and class model disagree on K"));
        }
        Ok(())
    }
}

/// Inverse-CDF draw; never returns a zero-probability class.
pub fn sample_categorical<R: RngCore + ?Sized>(prior: &PriorVector, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let p = prior.as_slice();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &pk) in p.iter().enumerate() {
        if pk <= 0.0 {
            continue;
        }
        last = k;
        acc += pk;
        if u < acc {
            return k;
        }
    }
    last
}

/// `n` iid draws from the class model under `prior`.
pub fn sample_batch<R: RngCore + ?Sized>(
    prior: &PriorVector,
    model: &GaussianClassModel,
    n: usize,
    rng: &mut R,
) -> Result<OnlineBatch> {
    if n == 0 {
        return Err(invalid("batch size must be at least 1"));
    }
    model.check_prior(prior)?;
    let d = model.dim();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = sample_categorical(prior, rng);
        model.draw_into(y, rng, &mut data);
        labels.push(y);
    }
    OnlineBatch::new(Features::new(d, data)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::l1_variation;

    fn sched(kind: ShiftKind, period: usize, p: f64, horizon: usize) -> ShiftSchedule {
        ShiftSchedule {
            kind,
            mu1: PriorVector::uniform(3).unwrap(),
            mu2: PriorVector::one_hot(3, 0).unwrap(),
            period,
            flip_prob: p,
            horizon,
            seed: 11,
        }
    }

    #[test]
    fn lin_ends_at_one() {
        let a = sched(ShiftKind::Lin, 2, 0.0, 50).alphas().unwrap();
        assert_eq!(a[49], 1.0);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn square_half_periods() {
        let a = sched(ShiftKind::Squ, 40, 0.0, 80).alphas().unwrap();
        assert!(a[..20].iter().all(|&x| x == 1.0));
        assert!(a[20..40].iter().all(|&x| x == 0.0));
        assert_eq!(&a[..40], &a[40..]);
    }

    #[test]
    fn sine_is_periodic() {
        let a = sched(ShiftKind::Sin, 10, 0.0, 30).alphas().unwrap();
        for t in 0..20 {
            assert!((a[t] - a[t + 10]).abs() < 1e-15);
        }
        assert_eq!(a[9], 0.0);
    }

    #[test]
    fn ber_certain_flip_alternates() {
        let a = sched(ShiftKind::Ber, 2, 1.0, 6).alphas().unwrap();
        assert_eq!(a, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let a = sched(ShiftKind::Ber, 2, 0.0, 6).alphas().unwrap();
        assert!(a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bad_round_rejected() {
        let s = sched(ShiftKind::Lin, 2, 0.0, 5);
        let mut r = substream(0, Substream::Schedule);
        assert!(alpha_at(&s, 0, None, &mut r).is_err());
        assert!(alpha_at(&s, 6, None, &mut r).is_err());
    }

    #[test]
    fn prior_mixing() {
        let a = PriorVector::new(vec![1.0, 0.0]).unwrap();
        let b = PriorVector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(prior_at(0.0, &a, &b).unwrap(), a);
        assert_eq!(prior_at(1.0, &a, &b).unwrap(), b);
        assert_eq!(prior_at(0.5, &a, &b).unwrap().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn square_variation_matches_switch_count() {
        let mut s = sched(ShiftKind::Squ, 40, 0.0, 10_000);
        s.mu1 = PriorVector::new(vec![1.0, 0.0]).unwrap();
        s.mu2 = PriorVector::new(vec![0.0, 1.0]).unwrap();
        let v = l1_variation(&s.priors().unwrap()).unwrap();
        assert!((v - 998.0).abs() < 1e-9);
    }

    #[test]
    fn benchmark_means_are_four_apart() {
        let m = GaussianClassModel::benchmark();
        assert_eq!((m.classes(), m.dim()), (3, 12));
        for i in 0..3 {
            for j in 0..i {
                let d2: f64 = m.mean(i).iter().zip(m.mean(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                assert!((d2.sqrt() - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_prior_gives_constant_labels() {
        let m = GaussianClassModel::benchmark();
        let mut r = substream(3, Substream::Stream);
        let b = sample_batch(&PriorVector::one_hot(3, 2).unwrap(), &m, 50, &mut r).unwrap();
        assert!(b.hidden_labels().iter().all(|&y| y == 2));
    }

    #[test]
    fn tiny_variance_pins_features_to_means() {
        let m = GaussianClassModel::new(vec![vec![1.0, 2.0], vec![-1.0, 0.0]], vec![1e-24; 2]).unwrap();
        let mut r = substream(3, Substream::Stream);
        let b = sample_batch(&PriorVector::uniform(2).unwrap(), &m, 20, &mut r).unwrap();
        for (x, &y) in b.features().iter_rows().zip(b.hidden_labels()) {
            for (a, c) in x.iter().zip(m.mean(y)) {
                assert!((a - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn label_frequencies_within_binomial_bands() {
        let m = GaussianClassModel::benchmark();
        let prior = PriorVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let mut r = substream(5, Substream::Stream);
        let n = 100_000;
        let b = sample_batch(&prior, &m, n, &mut r).unwrap();
        let mut counts = [0usize; 3];
        for &y in b.hidden_labels() {
            counts[y] += 1;
        }
        for k in 0..3 {
            let p = prior[k];
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((counts[k] as f64 / n as f64 - p).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn balanced_sample_covers_every_class() {
        let m = GaussianClassModel::benchmark();
        let s = m.sample_balanced(10, &mut substream(1, Substream::Offline));
        let mut counts = [0usize; 3];
        for x in &s {
            counts[x.label] += 1;
        }
        assert_eq!(counts, [4, 3, 3]);
    }
}
