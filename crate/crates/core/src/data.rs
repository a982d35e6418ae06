//! Samples, feature matrices and online batches.
//!
//! Labels are 0-based inside the crate. File formats and user-facing
//! messages use 1-based labels.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    /// 0-based class index.
    pub label: usize,
}

/// Row-major `rows x dim` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(invalid("feature buffer is not a multiple of the dimension"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut data = Vec::new();
        for row in rows {
            if row.len() != dim {
                return Err(invalid("feature rows must share the dimension"));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.dim];
        for row in self.iter_rows() {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        let n = self.rows().max(1) as f64;
        for a in m.iter_mut() {
            *a /= n;
        }
        m
    }
}

/// One round of the stream. Learners only ever receive
/// [`OnlineBatch::features`]; the labels are kept for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineBatch {
    features: Features,
    hidden_labels: Vec<usize>,
}

impl OnlineBatch {
    pub fn new(features: Features, hidden_labels: Vec<usize>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(invalid("an online batch needs at least one sample"));
        }
        if features.rows() != hidden_labels.len() {
            return Err(invalid("batch features and labels have different lengths"));
        }
        Ok(Self {
            features,
            hidden_labels,
        })
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn hidden_labels(&self) -> &[usize] {
        &self.hidden_labels
    }

    pub fn len(&self) -> usize {
        self.hidden_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden_labels.is_empty()
    }
}
