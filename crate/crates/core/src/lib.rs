//! Evaluation of synthetic tabular data against real data: fidelity
//! (quality and diagnostic reports, divergences, multivariate two-sample
//! tests), machine-learning utility (distinguishability, TRTR/TRTS/TSTR) and
//! privacy (nearest-neighbour distance ratio), plus small generators to
//! produce synthetic tables end to end.

pub mod cli;
pub mod divergence;
pub mod error;
pub mod generators;
pub mod harness;
pub mod ingest;
pub mod learners;
pub mod linalg;
pub mod quality;
pub mod report;
pub mod rng;
pub mod stattests;
pub mod table;

pub use error::{Error, Result};
pub use table::{ColumnData, ColumnKind, ColumnRole, ColumnSchema, LabelDistribution, Table};
