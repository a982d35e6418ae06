//! Hint priors and the hint function `H(w) = sum_k h[k] R_k(w)`.
//!
//! A [`HintState`] produces the hint for the upcoming round from past rounds
//! only, except for [`HintKind::Forward`], which reads the current batch's
//! estimate and is therefore transductive.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Features;
use crate::error::{invalid, Result};
use crate::model::{ModelParams, PerClassRisks};
use crate::prior::{PriorVector, RawPriorEstimate};

/// Weight given to the newest estimate when a slot or prototype is updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mix {
    /// `1 / n` where `n` counts updates to that slot, i.e. a running mean.
    RunningAverage,
    Constant(f64),
}

impl Mix {
    fn weight(self, updates: usize) -> f64 {
        match self {
            Mix::RunningAverage => 1.0 / updates as f64,
            Mix::Constant(c) => c,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Mix::Constant(c) if !(0.0..=1.0).contains(&c) => Err(invalid("mix must lie in [0, 1]")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HintKind {
    Forward,
    Window { len: usize },
    Periodic { len: usize, mix: Mix },
    Okm { prototypes: usize, mix: Mix },
}

impl HintKind {
    pub fn is_transductive(&self) -> bool {
        matches!(self, HintKind::Forward)
    }

    pub fn name(&self) -> &'static str {
        match self {
            HintKind::Forward => "forward",
            HintKind::Window { .. } => "window",
            HintKind::Periodic { .. } => "periodic",
            HintKind::Okm { .. } => "okm",
        }
    }
}

/// Forward hint: the current raw estimate itself.
pub fn forward_hint(current: &RawPriorEstimate) -> Vec<f64> {
    current.as_slice().to_vec()
}

/// Mean of the last `min(len, |history|)` raw estimates, or `fallback` when
/// there are none.
pub fn window_hint<'a, I>(history: I, len: usize, fallback: &PriorVector) -> Result<Vec<f64>>
where
    I: DoubleEndedIterator<Item = &'a [f64]>,
{
    if len == 0 {
        return Err(invalid("window length must be at least 1"));
    }
    let k = fallback.classes();
    let mut acc = vec![0.0; k];
    let mut n = 0usize;
    for h in history.rev().take(len) {
        if h.len() != k {
            return Err(invalid("history entry has the wrong K"));
        }
        for (a, x) in acc.iter_mut().zip(h) {
            *a += x;
        }
        n += 1;
    }
    if n == 0 {
        return Ok(fallback.as_slice().to_vec());
    }
    for a in acc.iter_mut() {
        *a /= n as f64;
    }
    Ok(acc)
}

/// `L_p` prior slots, one per phase of a period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicBuffer {
    slots: Vec<Vec<f64>>,
    updates: Vec<usize>,
    mix: Mix,
}

impl PeriodicBuffer {
    /// Every slot starts at `init`.
    pub fn new(len: usize, init: &PriorVector, mix: Mix) -> Result<Self> {
        if len == 0 {
            return Err(invalid("buffer length must be at least 1"));
        }
        mix.validate()?;
        Ok(Self {
            slots: vec![init.as_slice().to_vec(); len],
            updates: vec![0; len],
            mix,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, i: usize) -> &[f64] {
        &self.slots[i]
    }

    /// Moves slot `t mod L_p` toward `new_raw` and returns it.
    pub fn update(&mut self, t: usize, new_raw: &[f64]) -> Result<&[f64]> {
        let i = t % self.slots.len();
        let slot = &mut self.slots[i];
        if new_raw.len() != slot.len() {
            return Err(invalid("estimate has the wrong K"));
        }
        self.updates[i] += 1;
        let lam = self.mix.weight(self.updates[i]);
        for (s, x) in slot.iter_mut().zip(new_raw) {
            *s = (1.0 - lam) * *s + lam * x;
        }
        Ok(&self.slots[i])
    }
}

/// `(mean feature, prior)` prototypes for the online k-means hint.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    means: Vec<Vec<f64>>,
    priors: Vec<Vec<f64>>,
    updates: Vec<usize>,
    /// Prototypes whose mean has been seeded from a batch.
    seeded: usize,
    mix: Mix,
}

impl PrototypeBank {
    /// Priors start at `init`; means are seeded by the first `size` batches.
    pub fn new(size: usize, dim: usize, init: &PriorVector, mix: Mix) -> Result<Self> {
        if size == 0 {
            return Err(invalid("need at least one prototype"));
        }
        mix.validate()?;
        Ok(Self {
            means: vec![vec![0.0; dim]; size],
            priors: vec![init.as_slice().to_vec(); size],
            updates: vec![0; size],
            seeded: 0,
            mix,
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn mean(&self, i: usize) -> &[f64] {
        &self.means[i]
    }

    pub fn prior(&self, i: usize) -> &[f64] {
        &self.priors[i]
    }

    /// Prototype with the smallest mean squared distance to the batch
    /// (smallest index on ties), among the seeded ones.
    pub fn select(&self, batch: &Features) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, m) in self.means[..self.seeded.max(1)].iter().enumerate() {
            let mut d = 0.0;
            for x in batch.iter_rows() {
                for (a, b) in m.iter().zip(x) {
                    d += (a - b) * (a - b);
                }
            }
            d /= batch.rows() as f64;
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Picks a prototype for the batch (or seeds the next unseeded one),
    /// moves it toward the batch mean and `new_raw`, and returns its index.
    pub fn update(&mut self, batch: &Features, new_raw: &[f64]) -> Result<usize> {
        if batch.rows() == 0 {
            return Err(invalid("empty batch"));
        }
        if batch.dim() != self.means[0].len() || new_raw.len() != self.priors[0].len() {
            return Err(invalid("batch or estimate has the wrong shape"));
        }
        let mean = batch.mean();
        let i = if self.seeded < self.means.len() {
            let i = self.seeded;
            self.means[i].copy_from_slice(&mean);
            self.seeded += 1;
            i
        } else {
            self.select(batch)
        };
        self.updates[i] += 1;
        let kappa = self.mix.weight(self.updates[i]);
        for (m, x) in self.means[i].iter_mut().zip(&mean) {
            *m = (1.0 - kappa) * *m + kappa * x;
        }
        for (p, x) in self.priors[i].iter_mut().zip(new_raw) {
            *p = (1.0 - kappa) * *p + kappa * x;
        }
        Ok(i)
    }
}

/// Rescales `h` so that `||h||_1 <= 1 / sigma`. This keeps the hint's
/// gradient bound `G ||h||_1 sqrt(K)` within the risk estimator's
/// `G sqrt(K) / sigma`.
pub fn cap_hint(h: &mut [f64], sigma: f64) {
    let l1: f64 = h.iter().map(|x| x.abs()).sum();
    if sigma > 0.0 && sigma * l1 > 1.0 {
        let s = 1.0 / (sigma * l1);
        for x in h.iter_mut() {
            *x *= s;
        }
    }
}

/// `(H(w), grad H(w))` from per-class risks at `w`.
pub fn hint_eval(h: &[f64], pcr: &PerClassRisks) -> Result<(f64, Option<ModelParams>)> {
    if h.len() != pcr.values.len() {
        return Err(invalid("hint and per-class risks disagree on K"));
    }
    pcr.combine(h)
}

/// Produces the hint prior for each round.
#[derive(Debug, Clone)]
pub struct HintState {
    kind: HintKind,
    offline_prior: PriorVector,
    window: VecDeque<Vec<f64>>,
    periodic: Option<PeriodicBuffer>,
    okm: Option<PrototypeBank>,
    next: Vec<f64>,
}

impl HintState {
    pub fn new(kind: HintKind, offline_prior: PriorVector, dim: usize) -> Result<Self> {
        let periodic = match kind {
            HintKind::Periodic { len, mix } => Some(PeriodicBuffer::new(len, &offline_prior, mix)?),
            _ => None,
        };
        let okm = match kind {
            HintKind::Okm { prototypes, mix } => {
                Some(PrototypeBank::new(prototypes, dim, &offline_prior, mix)?)
            }
            _ => None,
        };
        if let HintKind::Window { len: 0 } = kind {
            return Err(invalid("window length must be at least 1"));
        }
        let next = match &periodic {
            // Round 1 reads slot 1 mod L_p.
            Some(p) => p.slot(1 % p.len()).to_vec(),
            None => offline_prior.as_slice().to_vec(),
        };
        Ok(Self {
            kind,
            offline_prior,
            window: VecDeque::new(),
            periodic,
            okm,
            next,
        })
    }

    pub fn kind(&self) -> HintKind {
        self.kind
    }

    /// Uncapped hint prior for the current round. Only the forward hint
    /// reads `current`.
    pub fn hint(&self, current: &RawPriorEstimate) -> Vec<f64> {
        match self.kind {
            HintKind::Forward => forward_hint(current),
            _ => self.next.clone(),
        }
    }

    /// Folds in round `t`'s estimate and batch, preparing round `t + 1`.
    pub fn observe(&mut self, t: usize, raw: &RawPriorEstimate, batch: &Features) -> Result<()> {
        match self.kind {
            HintKind::Forward => {}
            HintKind::Window { len } => {
                self.window.push_back(raw.as_slice().to_vec());
                if self.window.len() > len {
                    self.window.pop_front();
                }
                self.next = window_hint(self.window.iter().map(|v| v.as_slice()), len, &self.offline_prior)?;
            }
            HintKind::Periodic { .. } => {
                let buf = self.periodic.as_mut().expect("periodic buffer");
                buf.update(t, raw.as_slice())?;
                // Slot (t+1) mod L_p last saw round t+1-L_p, the same phase
                // as the coming round when L_p matches the period.
                self.next = buf.slot((t + 1) % buf.len()).to_vec();
            }
            HintKind::Okm { .. } => {
                let bank = self.okm.as_mut().expect("prototype bank");
                let i = bank.update(batch, raw.as_slice())?;
                self.next = bank.prior(i).to_vec();
            }
        }
        Ok(())
    }
}
