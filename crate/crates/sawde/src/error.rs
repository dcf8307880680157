//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row} has {got} columns, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("{path}: row {row}, column {column}: cannot parse `{value}` as a finite number")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: usize,
        value: String,
    },

    #[error("{path}: label column `{name}` not found in header")]
    MissingLabelColumn { path: PathBuf, name: String },

    #[error("{path}: dataset has a single class; at least two are required")]
    SingleClass { path: PathBuf },

    #[error("{path}: no feature columns besides the label column")]
    NoFeatures { path: PathBuf },

    #[error("dataset `{name}` violates an invariant: {reason}")]
    InvalidDataset { name: String, reason: String },

    #[error("view construction failed: {0}")]
    InvalidView(String),

    #[error("train fraction {fraction} leaves class {class} empty in the training split")]
    EmptyTrainClass { fraction: f64, class: u32 },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mask length {mask} does not match feature count {features}")]
    MaskLength { mask: usize, features: usize },

    #[error("fitness is unset; evaluate the individual before selection")]
    UnsetFitness,

    #[error("sub-population of {have} cannot supply {need} distinct individuals for {cms}")]
    SubPopulationTooSmall {
        cms: String,
        need: usize,
        have: usize,
    },

    #[error("generation {generation}, sub-population {sub_population}: {source}")]
    Engine {
        generation: u64,
        sub_population: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run log is truncated after record {last_valid} ({detail})")]
    TruncatedLog { last_valid: usize, detail: String },

    #[error("{path}: manifest line {line}: {reason}")]
    BadManifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl Error {
    /// Wraps an error with the engine position it occurred at.
    pub fn in_engine(self, generation: u64, sub_population: usize) -> Error {
        Error::Engine {
            generation,
            sub_population,
            source: Box::new(self),
        }
    }
}
