//! Online learners: projected online gradient descent on the unbiased risk,
//! the two-layer ensembles, and the prior-averaging baselines.

mod base;
mod baselines;
mod ensemble;
mod meta;
mod pool;
mod uogd;

pub use base::{implicit_base_step, prox_solve, prox_solve_from, uogd_step, HintObjective, Objective, ProxConfig, ProxOutcome};
pub use baselines::{fth_prior, ftfwh_prior, reweight_classify, BaselineState};
pub use ensemble::{combine, Ensemble, EnsembleConfig, EnsembleState, HintDiagnostics, RoundContext, RoundOutput};
pub use meta::{atlas_meta_rate, hedge_update, meta_rate, optimistic_hedge_update, self_confident_rate, MetaRate};
pub use pool::{build_step_pool, PoolVariant, StepPool};
pub use uogd::{uogd_step_size, Uogd, UogdOutput};
