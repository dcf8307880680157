//! Wrapper feature selection by self-adaptive weighted differential
//! evolution (SaWDE).
//!
//! The optimizer evolves real-valued positions in `[0,1]^D`, thresholds
//! them into feature masks, and scores masks by k-fold cross-validated
//! KNN accuracy. Three mechanisms work together:
//!
//! * a multi-population scheme that re-partitions the population into
//!   equal random sub-populations every generation;
//! * a self-adaptive pool of ensemble strategies (triples of DE donor
//!   formulas) selected uniformly during the first half of the
//!   evaluation budget and from the best-rewarded half afterwards, with
//!   an extra reward granted every twenty generations;
//! * a weighted model that tallies feature importance from accepted
//!   trials and elite individuals, periodically probing ranked prefix
//!   subsets and injecting the best one found.
//!
//! Entry points: [`engine::run`] for one optimization,
//! [`harness::run_experiment`] for seeded sweeps with reports, and the
//! `sawde` binary for the command-line surface. The `examples/`
//! directory walks through each capability.

pub mod classifier;
pub mod dataset;
pub mod de_core;
pub mod engine;
pub mod error;
pub mod harness;
pub mod rng;
pub mod runlog;
pub mod strategy;
pub mod synth;
pub mod weighted_model;

pub use classifier::{BinaryMask, FitnessEvaluator};
pub use dataset::{Dataset, DatasetView, LabelColumn, SharedDataset};
pub use de_core::{CmsId, ControlParams, Individual};
pub use engine::{EngineConfig, RunResult};
pub use error::{Error, Result};
pub use strategy::EnsembleStrategy;
