//! Shared fixtures for the benchmarks.

use runevt::paper::paper_model;
use runevt::simgen::{simulate, SimConfig};
use runevt::{ExceedanceSet, YearRange};

/// Six-discipline dataset drawn from the published model over 2001-2019.
pub fn paper_dataset(seed: u64) -> Vec<ExceedanceSet> {
    simulate(&SimConfig {
        model: paper_model(),
        horizon: YearRange::new(2001, 2019).expect("static horizon"),
        seed,
        athlete_pool: None,
    })
    .expect("published model is feasible over its fitting window")
    .sets
}
