//! Online label shift adaptation.
//!
//! A learner trains an initial model `f_0` on labeled offline data, then
//! adapts it over a stream of unlabeled batches whose class prior drifts
//! while the class-conditional densities stay fixed. This crate holds the
//! numerical side of that pipeline:
//!
//! * [`prior`]: simplex-valued class priors, Euclidean simplex projection and
//!   L1 variation of prior sequences.
//! * [`model`]: the multiclass linear model with softmax cross-entropy,
//!   per-class offline risks and offline training.
//! * [`estimator`]: black-box shift estimation (confusion matrix, prior
//!   solve) and the unbiased risk estimator built on it.
//! * [`learners`]: projected online gradient descent, step-size pools, Hedge
//!   and optimistic Hedge, the implicit proximal base step, the full
//!   ensemble round, and the prior-averaging baselines.
//! * [`hints`]: hint priors (forward, window, periodic, online k-means) and
//!   the induced hint function.
//! * [`shiftsim`]: shift schedules and a Gaussian class model for synthetic
//!   streams.
//!
//! The crate is `no_std` (with `alloc`). Enable the `std` feature to route
//! transcendental functions through the platform libm instead of [`libm`].
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(rust_2018_idioms, unused_qualifications)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod estimator;
pub mod hints;
pub mod learners;
pub mod linalg;
pub mod math;
pub mod model;
pub mod prior;
pub mod rng;
pub mod shiftsim;

pub use data::{Features, LabeledSample, OnlineBatch};
pub use error::{Error, Result};
pub use estimator::{ConfusionMatrix, RiskEstimate};
pub use model::{DomainSpec, LossConstants, ModelParams, OfflineData, PerClassRisks};
pub use prior::{PriorVector, RawPriorEstimate, ShiftTrace};
