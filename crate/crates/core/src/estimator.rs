//! Black-box shift estimation and the unbiased risk estimator.
//!
//! With `C[i][j] = P(f0(x) = i | y = j)` and `h` the histogram of `f0`'s
//! predictions on an unlabeled batch, the prior estimate solves `C mu = h`.
//! The risk estimate weights the per-class offline risks by that solution,
//! negative entries included, which keeps it unbiased.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Features;
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::{predict_label, ModelParams, OfflineData, PerClassRisks};
use crate::prior::{PriorVector, RawPriorEstimate};

/// Default floor on the smallest singular value.
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    classes: usize,
    entries: Vec<f64>,
    min_singular: f64,
    /// Ridge added to the diagonal by [`regularize_and_invertibility`].
    ridge: Option<f64>,
}

impl ConfusionMatrix {
    /// Builds from row-major entries `[i][j]`; caches the smallest singular
    /// value.
    pub fn from_entries(classes: usize, entries: Vec<f64>) -> Result<Self> {
        if classes < 2 || entries.len() != classes * classes {
            return Err(invalid("confusion matrix must be K x K with K >= 2"));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(invalid("confusion matrix entries must be finite"));
        }
        let min_singular = linalg::min_singular_value(&entries, classes);
        Ok(Self {
            classes,
            entries,
            min_singular,
            ridge: None,
        })
    }

    pub fn identity(classes: usize) -> Self {
        let mut e = vec![0.0; classes * classes];
        for i in 0..classes {
            e[i * classes + i] = 1.0;
        }
        Self {
            classes,
            entries: e,
            min_singular: 1.0,
            ridge: None,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.classes + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn min_singular(&self) -> f64 {
        self.min_singular
    }

    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    /// `C v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let k = self.classes;
        (0..k)
            .map(|i| (0..k).map(|j| self.entries[i * k + j] * v[j]).sum())
            .collect()
    }
}

/// Counts `f0`'s predictions on each offline class.
pub fn estimate_confusion(f0: &ModelParams, offline: &OfflineData) -> Result<ConfusionMatrix> {
    let k = offline.classes();
    let mut counts = vec![0usize; k * k];
    for (x, y) in offline.iter() {
        let i = predict_label(f0, x)?;
        counts[i * k + y] += 1;
    }
    let per_class = offline.class_counts();
    if let Some(j) = per_class.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass { class: j + 1 });
    }
    let entries = counts
        .iter()
        .enumerate()
        .map(|(idx, &c)| c as f64 / per_class[idx % k] as f64)
        .collect();
    ConfusionMatrix::from_entries(k, entries)
}

/// Returns `c` unchanged when its smallest singular value reaches
/// `sigma_floor`; otherwise adds `lambda I` with the smallest
/// `lambda in {1e-6, 1e-5, ..., 1}` that does.
pub fn regularize_and_invertibility(c: &ConfusionMatrix, sigma_floor: f64) -> Result<ConfusionMatrix> {
    if !(sigma_floor > 0.0) {
        return Err(invalid("sigma floor must be positive"));
    }
    if c.min_singular >= sigma_floor {
        return Ok(c.clone());
    }
    let k = c.classes;
    let mut lambda = 1e-6;
    while lambda <= 1.0 + 1e-12 {
        let mut e = c.entries.clone();
        for i in 0..k {
            e[i * k + i] += lambda;
        }
        let mut out = ConfusionMatrix::from_entries(k, e)?;
        if out.min_singular >= sigma_floor {
            out.ridge = Some(lambda);
            return Ok(out);
        }
        lambda *= 10.0;
    }
    Err(Error::DegenerateConfusion(format!(
        "no ridge up to 1 lifts the smallest singular value {:.3e} above {:.3e}",
        c.min_singular, sigma_floor
    )))
}

/// Histogram of `f0`'s predicted labels over the batch.
pub fn predicted_histogram(f0: &ModelParams, batch: &Features) -> Result<PriorVector> {
    if batch.rows() == 0 {
        return Err(invalid("empty batch"));
    }
    let mut counts = vec![0usize; f0.classes()];
    for x in batch.iter_rows() {
        counts[predict_label(f0, x)?] += 1;
    }
    PriorVector::from_counts(&counts)
}

/// Solves `C mu = hist`. No clipping.
pub fn estimate_prior(c: &ConfusionMatrix, hist: &PriorVector) -> Result<RawPriorEstimate> {
    if hist.classes() != c.classes {
        return Err(invalid("histogram and confusion matrix disagree on K"));
    }
    Ok(RawPriorEstimate(linalg::solve(&c.entries, hist.as_slice())?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub gradient: Option<ModelParams>,
    pub raw_prior: RawPriorEstimate,
}

/// `sum_k raw[k] * R_k(w)` together with its gradient.
pub fn unbiased_risk(raw: &RawPriorEstimate, pcr: &PerClassRisks) -> Result<RiskEstimate> {
    if raw.classes() != pcr.values.len() {
        return Err(invalid("prior estimate and per-class risks disagree on K"));
    }
    let (value, gradient) = pcr.combine(raw.as_slice())?;
    Ok(RiskEstimate {
        value,
        gradient,
        raw_prior: raw.clone(),
    })
}

/// Smallest offline class prior. Only reported alongside bias diagnostics.
pub fn min_class_prior(offline: &OfflineData) -> f64 {
    let p = offline.class_prior();
    p.as_slice().iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledSample;

    fn cm(entries: &[f64]) -> ConfusionMatrix {
        let k = (entries.len() as f64).sqrt() as usize;
        ConfusionMatrix::from_entries(k, entries.to_vec()).unwrap()
    }

    #[test]
    fn constant_predictor_fills_first_row() {
        let data: Vec<_> = (0..6)
            .map(|i| LabeledSample {
                features: vec![i as f64],
                label: i % 3,
            })
            .collect();
        let off = OfflineData::new(&data, 3).unwrap();
        let c = estimate_confusion(&ModelParams::zeros(3, 1), &off).unwrap();
        for j in 0..3 {
            assert_eq!(c.get(0, j), 1.0);
            assert_eq!(c.get(1, j), 0.0);
        }
        assert!(c.min_singular() < 1e-12);
    }

    #[test]
    fn perfect_classifier_gives_identity() {
        // Scores for class k = bias k * [x == k], encoded via features.
        let data: Vec<_> = (0..4)
            .map(|i| LabeledSample {
                features: vec![if i % 2 == 0 { -1.0 } else { 1.0 }],
                label: i % 2,
            })
            .collect();
        let off = OfflineData::new(&data, 2).unwrap();
        let f0 = ModelParams::from_weights(2, 1, vec![-1.0, 0.0, 1.0, 0.0]).unwrap();
        let c = estimate_confusion(&f0, &off).unwrap();
        assert_eq!(c.entries(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn regularization_examples() {
        let id = ConfusionMatrix::identity(3);
        let r = regularize_and_invertibility(&id, 1e-3).unwrap();
        assert_eq!(r, id);
        assert!(r.ridge().is_none());

        let good = cm(&[0.9, 0.2, 0.1, 0.8]);
        assert!((good.min_singular() - 0.693_355).abs() < 1e-6);
        assert_eq!(regularize_and_invertibility(&good, 1e-3).unwrap(), good);

        let singular = cm(&[0.5, 0.5, 0.5, 0.5]);
        let r = regularize_and_invertibility(&singular, 1e-3).unwrap();
        assert!(r.min_singular() >= 1e-3);
        assert_eq!(r.ridge(), Some(1e-3));
        assert!(regularize_and_invertibility(&good, 0.0).is_err());
    }

    #[test]
    fn hopeless_matrix_is_degenerate() {
        let zero = cm(&[0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            regularize_and_invertibility(&zero, 2.0),
            Err(Error::DegenerateConfusion(_))
        ));
    }

    #[test]
    fn prior_solve_examples() {
        let h = PriorVector::new(vec![0.3, 0.7]).unwrap();
        let raw = estimate_prior(&ConfusionMatrix::identity(2), &h).unwrap();
        assert_eq!(raw.as_slice(), h.as_slice());

        let c = cm(&[0.9, 0.2, 0.1, 0.8]);
        let raw = estimate_prior(&c, &PriorVector::new(vec![0.55, 0.45]).unwrap()).unwrap();
        assert!((raw.as_slice()[0] - 0.5).abs() < 1e-12);
        assert!((raw.as_slice()[1] - 0.5).abs() < 1e-12);

        let raw = estimate_prior(&c, &PriorVector::new(vec![0.95, 0.05]).unwrap()).unwrap();
        assert!((raw.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(raw.as_slice()[1] < 0.0);
    }

    #[test]
    fn histogram_of_single_sample_is_one_hot() {
        let f0 = ModelParams::from_weights(2, 1, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Features::new(1, vec![3.0]).unwrap();
        assert_eq!(predicted_histogram(&f0, &b).unwrap().as_slice(), &[0.0, 1.0]);
        let b = Features::new(1, vec![3.0, -1.0, 2.0]).unwrap();
        assert_eq!(predicted_histogram(&f0, &b).unwrap().as_slice(), &[0.0, 1.0]);
        assert!(predicted_histogram(&f0, &Features::new(1, vec![]).unwrap()).is_err());
    }

    #[test]
    fn risk_with_negative_weight() {
        let pcr = PerClassRisks {
            values: vec![1.0, 2.0],
            gradients: None,
        };
        let r = unbiased_risk(&RawPriorEstimate(vec![1.2, -0.2]), &pcr).unwrap();
        assert!((r.value - 0.8).abs() < 1e-15);
        let r = unbiased_risk(&RawPriorEstimate(vec![0.0, 1.0]), &pcr).unwrap();
        assert_eq!(r.value, 2.0);
        assert!(unbiased_risk(&RawPriorEstimate(vec![1.0]), &pcr).is_err());
    }
}
