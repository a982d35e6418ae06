//! Class priors on the probability simplex.

use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{invalid, Result};

/// Largest deviation of the entry sum from 1 that construction silently
/// renormalizes away.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// A point of the K-simplex, K >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorVector(Vec<f64>);

impl PriorVector {
    /// Validates and renormalizes `entries`.
    ///
    /// Negative entries are rejected (up to -1e-12, which is clamped to zero),
    /// and so is any sum further than [`RENORMALIZE_TOLERANCE`] from 1.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(invalid("a prior needs at least two classes"));
        }
        let mut entries = entries;
        for x in entries.iter_mut() {
            if !x.is_finite() {
                return Err(invalid("prior entries must be finite"));
            }
            if *x < 0.0 {
                if *x < -1e-12 {
                    return Err(invalid("prior entries must be nonnegative"));
                }
                *x = 0.0;
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(invalid("prior entries must sum to 1"));
        }
        if sum != 1.0 {
            for x in entries.iter_mut() {
                *x /= sum;
            }
        }
        Ok(Self(entries))
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(invalid("a prior needs at least two classes"));
        }
        Ok(Self(alloc::vec![1.0 / classes as f64; classes]))
    }

    /// Point mass on the 0-based class `k`.
    pub fn one_hot(classes: usize, k: usize) -> Result<Self> {
        if classes < 2 || k >= classes {
            return Err(invalid("one-hot class out of range"));
        }
        let mut v = alloc::vec![0.0; classes];
        v[k] = 1.0;
        Ok(Self(v))
    }

    /// Empirical class frequencies of 0-based labels.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(invalid("cannot build a prior from zero counts"));
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl Index<usize> for PriorVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Unconstrained prior estimate from the confusion-matrix solve. Entries may
/// be negative; they are never clipped where unbiasedness matters.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPriorEstimate(pub Vec<f64>);

impl RawPriorEstimate {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    /// Nearest point of the simplex.
    pub fn project(&self) -> Result<PriorVector> {
        simplex_project(&self.0)
    }
}

/// Sequence of true priors of a stream together with its L1 variation.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTrace {
    pub priors: Vec<PriorVector>,
    pub variation: f64,
}

impl ShiftTrace {
    pub fn new(priors: Vec<PriorVector>) -> Result<Self> {
        let variation = l1_variation(&priors)?;
        Ok(Self { priors, variation })
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn simplex_project(v: &[f64]) -> Result<PriorVector> {
    if v.len() < 2 {
        return Err(invalid("simplex projection needs K >= 2"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid("simplex projection of a non-finite vector"));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // The threshold is exact up to rounding; fold the residue back in.
    let sum: f64 = out.iter().sum();
    for x in out.iter_mut() {
        *x /= sum;
    }
    Ok(PriorVector(out))
}

/// Sum of L1 distances between consecutive priors.
pub fn l1_variation(priors: &[PriorVector]) -> Result<f64> {
    let Some(first) = priors.first() else {
        return Err(invalid("variation of an empty prior sequence"));
    };
    if priors.iter().any(|p| p.classes() != first.classes()) {
        return Err(invalid("priors in a sequence must share K"));
    }
    Ok(priors.windows(2).map(|w| w[1].l1_distance(&w[0])).sum())
}
