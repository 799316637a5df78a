//! Experiment metrics: certified-accuracy curves and the robust score, the
//! noise-shape grid search, membership inference, and a PGD attack.

mod curve;
mod grid;
mod mia;
mod pgd;

pub use curve::{accuracy_curve, certified_accuracy_curve, radius_grid, robust_score, AccuracyCurve};
pub use grid::{noise_grid_search, GridCell, GridSearchConfig, GridSearchResult};
pub use mia::{
    membership_inference_asr, ConfidenceScorer, MiaResult, MiaSplit, SmoothedConfidence, SoftmaxConfidence,
};
pub use pgd::{attack_dataset, pgd_attack, AttackRecord, PgdConfig};
