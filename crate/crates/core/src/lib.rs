//! Minimal confidence subsets for the most probable symbol of a multinomial
//! distribution, applied to "which algorithm wins most often" questions over
//! benchmark results.
//!
//! The crate provides exact binomial central moments ([`moments`]), width
//! bounds for the subset ([`bounds`]), the subset constructor itself
//! ([`subset`]), classical comparison procedures ([`baselines`]), a seeded
//! coverage harness ([`simulate`]) and CSV ingestion ([`ingest`]).

pub mod baselines;
pub mod bounds;
pub mod cli;
pub mod distribution;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod moments;
pub mod numeric;
pub mod rng;
pub mod simulate;
pub mod subset;

/// Version tag carried by every JSON document the crate emits.
pub const SCHEMA_VERSION: u32 = 1;

pub use distribution::Distribution;
pub use error::{Error, Result};
pub use exec::Execution;
pub use subset::{
    select_subset, ConfidenceSubset, Method, MomentOrder, SubsetConfig, SubsetSelector, WinCounts,
};
