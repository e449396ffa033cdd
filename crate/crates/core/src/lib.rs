//! Estimate the female/male composition of a group from its first names.
//!
//! The crate is organized around four pieces:
//!
//! * [`reference`]: name-frequency tables (ingestion, filtering, pooling,
//!   letter reduction);
//! * [`estimator`]: the individual-based baselines and the self-consistent
//!   global estimator;
//! * [`simulator`]: synthetic labeled populations and an exact leaky-pipeline
//!   oracle;
//! * [`experiments`]: seeded benchmark sweeps and error metrics.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod numfmt;
pub mod reference;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use estimator::{estimate, EstimateReport, GenderComposition, Method, PipelineRatio};
pub use reference::{GenderCounts, ReferenceTable, TableMode, TargetList};
