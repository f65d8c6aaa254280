//! Shared inputs for the pipeline benchmarks.

use ambi_core::{Preset, TimeSeries};

/// The aggregation process at length `n`, fixed seed.
pub fn aggregation(n: usize) -> TimeSeries {
    Preset::Aggregation512.generate(n, 11).expect("preset length is valid")
}
