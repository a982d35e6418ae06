use alloc::vec::Vec;

use crate::error::{numerical, Result};
use crate::math::{ln, softmax_in_place, sqrt};

use super::pool::PoolVariant;

/// Learning rate of the Hedge layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetaRate {
    Fixed(f64),
    /// `sqrt((ln N + 2) / (1 + sum of squared deviations so far))`.
    SelfConfident,
}

/// `softmax(-eps * cum_losses)`.
pub fn hedge_update(cum_losses: &[f64], eps: f64) -> Result<Vec<f64>> {
    weights(cum_losses.iter().copied(), eps)
}

/// `softmax(-eps * (cum_losses + hint_losses))`.
pub fn optimistic_hedge_update(cum_losses: &[f64], hint_losses: &[f64], eps: f64) -> Result<Vec<f64>> {
    if cum_losses.len() != hint_losses.len() {
        return Err(crate::error::invalid("loss vectors differ in length"));
    }
    weights(cum_losses.iter().zip(hint_losses).map(|(a, b)| a + b), eps)
}

fn weights(losses: impl Iterator<Item = f64>, eps: f64) -> Result<Vec<f64>> {
    if !(eps >= 0.0) {
        return Err(crate::error::invalid("meta rate must be nonnegative"));
    }
    let mut s: Vec<f64> = losses.map(|l| -eps * l).collect();
    if s.is_empty() {
        return Err(crate::error::invalid("no experts"));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(numerical("non-finite cumulative loss"));
    }
    if eps == 0.0 {
        let u = 1.0 / s.len() as f64;
        return Ok(s.iter().map(|_| u).collect());
    }
    softmax_in_place(&mut s);
    Ok(s)
}

/// Fixed rate `(sigma / B) sqrt((ln N + 2) / (K T))`.
pub fn atlas_meta_rate(n: usize, k: usize, t: usize, b: f64, sigma: f64) -> f64 {
    sigma / b * sqrt((ln(n as f64) + 2.0) / (k as f64 * t as f64))
}

/// `sqrt((ln N + 2) / (1 + observed))`.
pub fn self_confident_rate(n: usize, observed: f64) -> f64 {
    sqrt((ln(n as f64) + 2.0) / (1.0 + observed))
}

/// The fixed rate for `Atlas`, the self-confident one (with `observed` the
/// running sum of squared deviations, zero if absent) for `AtlasAda`.
pub fn meta_rate(
    variant: PoolVariant,
    n: usize,
    k: usize,
    t: usize,
    b: f64,
    sigma: f64,
    observed: Option<f64>,
) -> f64 {
    match variant {
        PoolVariant::Atlas => atlas_meta_rate(n, k, t, b, sigma),
        PoolVariant::AtlasAda => self_confident_rate(n, observed.unwrap_or(0.0)),
    }
}
