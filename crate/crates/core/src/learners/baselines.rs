use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::prior::PriorVector;

/// History of simplex-projected prior estimates for the averaging baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    pub history: Vec<PriorVector>,
    pub offline_prior: PriorVector,
}

impl BaselineState {
    pub fn new(offline_prior: PriorVector) -> Self {
        Self {
            history: Vec::new(),
            offline_prior,
        }
    }

    pub fn push(&mut self, estimate: PriorVector) {
        self.history.push(estimate);
    }
}

fn mean_of(priors: &[PriorVector]) -> Result<PriorVector> {
    let k = priors[0].classes();
    let mut acc = vec![0.0; k];
    for p in priors {
        for (a, x) in acc.iter_mut().zip(p.as_slice()) {
            *a += x;
        }
    }
    let n = priors.len() as f64;
    PriorVector::new(acc.into_iter().map(|a| a / n).collect())
}

/// Mean of every past estimate; the offline prior before the first one.
pub fn fth_prior(state: &BaselineState) -> Result<PriorVector> {
    if state.history.is_empty() {
        return Ok(state.offline_prior.clone());
    }
    mean_of(&state.history)
}

/// Mean of the last `window` estimates; the offline prior before the first.
pub fn ftfwh_prior(state: &BaselineState, window: usize) -> Result<PriorVector> {
    if window == 0 {
        return Err(invalid("window must be at least 1"));
    }
    if state.history.is_empty() {
        return Ok(state.offline_prior.clone());
    }
    let start = state.history.len().saturating_sub(window);
    mean_of(&state.history[start..])
}

/// `argmax_k (target[k] / offline[k]) probs[k]`, smallest index on ties.
pub fn reweight_classify(probs: &[f64], target: &PriorVector, offline: &PriorVector) -> Result<usize> {
    let k = probs.len();
    if target.classes() != k || offline.classes() != k {
        return Err(invalid("priors and probabilities disagree on K"));
    }
    let mut best = 0;
    let mut best_s = f64::NEG_INFINITY;
    for i in 0..k {
        let d = offline[i];
        if !(d > 0.0) {
            return Err(invalid("offline prior has a zero entry"));
        }
        let s = target[i] / d * probs[i];
        if s > best_s {
            best_s = s;
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> PriorVector {
        PriorVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fth_examples() {
        let mut s = BaselineState::new(pv(&[0.3, 0.7]));
        assert_eq!(fth_prior(&s).unwrap(), pv(&[0.3, 0.7]));
        s.push(pv(&[1.0, 0.0]));
        assert_eq!(fth_prior(&s).unwrap(), pv(&[1.0, 0.0]));
        s.push(pv(&[0.0, 1.0]));
        assert_eq!(fth_prior(&s).unwrap(), pv(&[0.5, 0.5]));
    }

    #[test]
    fn ftfwh_examples() {
        let mut s = BaselineState::new(pv(&[0.3, 0.7]));
        assert_eq!(ftfwh_prior(&s, 4).unwrap(), pv(&[0.3, 0.7]));
        for p in [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]] {
            s.push(pv(&p));
        }
        assert_eq!(ftfwh_prior(&s, 10).unwrap(), fth_prior(&s).unwrap());
        assert_eq!(ftfwh_prior(&s, 1).unwrap(), pv(&[1.0, 0.0]));
        assert_eq!(ftfwh_prior(&s, 2).unwrap(), pv(&[0.5, 0.5]));
    }

    #[test]
    fn reweighting_examples() {
        let d0 = pv(&[0.5, 0.5]);
        assert_eq!(reweight_classify(&[0.6, 0.4], &d0, &d0).unwrap(), 0);
        assert_eq!(reweight_classify(&[0.6, 0.4], &pv(&[0.2, 0.8]), &d0).unwrap(), 1);
        assert_eq!(reweight_classify(&[0.9, 0.1], &pv(&[0.0, 1.0]), &d0).unwrap(), 1);
        assert!(reweight_classify(&[0.9, 0.1], &d0, &pv(&[1.0, 0.0])).is_err());
    }
}
