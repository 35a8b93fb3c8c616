//! Seeded Monte-Carlo studies over Gaussian measurement ensembles.
//!
//! Every random quantity comes from a ChaCha stream addressed by
//! `(master_seed, domain, index)`, so any single matrix or trial can be
//! regenerated without replaying the others and results do not depend on
//! the order in which workers finish.

mod ensemble;
mod recovery;
mod signal;
mod stats;
mod studies;

pub use ensemble::{gaussian_matrix, stream_rng, EnsembleKind, EnsembleSpec, EntryScale};
pub use recovery::{
    grid_search_recovery, GeometricGrid, Method, MethodSummary, RecoveryConfig, RecoveryReport,
    Selection, TrialRecord,
};
pub use signal::{sample_signal, NoiseMode, SignalSample, SignalSpec};
pub use stats::{summarize, summarize_with, StatSummary, StdKind};
pub use studies::{
    condition_failure_study, region_study, ConditionStudyRow, RegionStudyRow, StudyOptions,
};

/// Stream domains, kept distinct so that matrices and signals drawn under
/// the same master seed are independent.
pub(crate) mod domain {
    pub const MATRIX: u64 = 1;
    pub const SIGNAL: u64 = 2;
}
