use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::math::{ceil, log2, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolVariant {
    Atlas,
    AtlasAda,
}

/// Geometric grid of step sizes with ratio 2.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPool {
    etas: Vec<f64>,
    variant: PoolVariant,
}

impl StepPool {
    pub fn geometric(base: f64, n: usize, variant: PoolVariant) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) || n == 0 {
            return Err(invalid("pool needs a positive base step and N >= 1"));
        }
        let mut etas = Vec::with_capacity(n);
        let mut eta = base;
        for _ in 0..n {
            etas.push(eta);
            eta *= 2.0;
        }
        Ok(Self { etas, variant })
    }

    /// Arbitrary positive steps, in the given order.
    pub fn from_etas(etas: Vec<f64>, variant: PoolVariant) -> Result<Self> {
        if etas.is_empty() || etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(invalid("pool steps must be positive and finite"));
        }
        Ok(Self { etas, variant })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    pub fn variant(&self) -> PoolVariant {
        self.variant
    }
}

/// Pool covering the optimal step for horizon `t`.
///
/// * `Atlas`: `eta_1 = Gamma sigma / (2 G sqrt(K T))`,
///   `N = 1 + ceil(log2(1 + 2T) / 2)`.
/// * `AtlasAda`: `eta_1 = Gamma sigma / sqrt(sigma^2 + 4 G^2 K T)`,
///   `N = 2 + ceil(log2(3T (1 + 4 G^2 K T / sigma^2)) / 2)`.
pub fn build_step_pool(
    t: usize,
    k: usize,
    gamma: f64,
    g: f64,
    sigma: f64,
    variant: PoolVariant,
) -> Result<StepPool> {
    if t == 0 || k == 0 || !(gamma > 0.0 && g > 0.0 && sigma > 0.0) {
        return Err(invalid("step pool arguments must be positive"));
    }
    let (t, k) = (t as f64, k as f64);
    let (base, n) = match variant {
        PoolVariant::Atlas => (
            gamma * sigma / (2.0 * g * sqrt(k * t)),
            1.0 + ceil(0.5 * log2(1.0 + 2.0 * t)),
        ),
        PoolVariant::AtlasAda => {
            let r = 4.0 * g * g * k * t;
            (
                gamma * sigma / sqrt(sigma * sigma + r),
                2.0 + ceil(0.5 * log2(3.0 * t * (1.0 + r / (sigma * sigma)))),
            )
        }
    };
    StepPool::geometric(base, n as usize, variant)
}
