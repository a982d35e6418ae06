use crate::data::Features;
use crate::error::{invalid, Result};
use crate::estimator::unbiased_risk;
use crate::math::sqrt;
use crate::model::{per_class_risks, ModelParams};
use crate::prior::RawPriorEstimate;

use super::base::uogd_step;
use super::ensemble::RoundContext;

/// `Gamma / (G sqrt(T))`.
pub fn uogd_step_size(gamma: f64, g: f64, t: usize) -> f64 {
    gamma / (g * sqrt(t as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UogdOutput {
    pub deployed: ModelParams,
    pub raw_prior: RawPriorEstimate,
    pub risk: f64,
}

/// Projected online gradient descent on the unbiased risk estimate.
#[derive(Debug, Clone)]
pub struct Uogd {
    w: ModelParams,
    eta: f64,
    round: usize,
}

impl Uogd {
    pub fn new(f0: &ModelParams, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid("step size must be positive"));
        }
        Ok(Self {
            w: f0.clone(),
            eta,
            round: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.w
    }

    pub fn round(&mut self, ctx: &RoundContext<'_>, batch: &Features) -> Result<UogdOutput> {
        let raw = ctx.raw_prior(batch)?;
        let pcr = per_class_risks(&self.w, ctx.offline, true)?;
        let est = unbiased_risk(&raw, &pcr)?;
        let deployed = self.w.clone();
        self.w = uogd_step(&self.w, est.gradient.as_ref().expect("gradient"), self.eta, ctx.domain)?;
        self.round += 1;
        Ok(UogdOutput {
            deployed,
            raw_prior: raw,
            risk: est.value,
        })
    }
}
