//! Certified defenses for query-only classifiers.
//!
//! The crate has two halves. The first turns a black-box classifier into a
//! white-box surrogate by distilling its logits through a budgeted query
//! handle ([`distill`]). The second wraps any classifier in a randomized
//! smoothing certificate ([`smoothing`]) whose certified radius is computed
//! by a Monte Carlo boundary search ([`radius`]) that works for any
//! continuous i.i.d. noise family ([`noise`]) and any of the ℓ1, ℓ2, ℓ∞
//! norms.
//!
//! Supporting pieces: a small dense network with analytic gradients
//! ([`netcore`]), Monte Carlo bound estimators ([`mcbounds`]), dataset IO and
//! synthetic generators ([`data`]), and experiment metrics ([`eval`]).

// `!(x > 0.0)` is how parameter checks reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod data;
pub mod distill;
pub mod error;
pub mod eval;
pub mod mcbounds;
pub mod netcore;
pub mod noise;
pub mod radius;
pub mod rng;
pub mod smoothing;

pub use classifier::{argmax, Classifier, FnClassifier};
pub use data::Dataset;
pub use distill::{BlackBoxHandle, DistillReport, QueryMode, Response};
pub use error::{Error, Result};
pub use mcbounds::{BoundEstimates, Side, VoteCounts};
pub use netcore::{Activation, DenseNetwork, LossKind, OptimizerKind, TrainConfig};
pub use noise::{NoiseFamily, NoiseSpec};
pub use radius::{Norm, RadiusResult, RadiusSolverConfig};
pub use smoothing::{CertifyOutcome, Decision, SmoothingConfig};
