//! Shared fixtures for the benchmarks.

use hbest_core::{gen_ma4, Dataset, Ma4Setting, SimulatedDataset, Variation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// MA(4) replicates with moderate variation, fixed seed.
pub fn ma4(replicates: usize, length: usize) -> SimulatedDataset {
    let setting = Ma4Setting {
        variation: Variation::Moderate,
        replicates,
        length,
        standardize: true,
    };
    gen_ma4(&setting, &mut ChaCha8Rng::seed_from_u64(17)).expect("valid setting")
}

pub fn dataset(sim: &SimulatedDataset, basis_count: usize) -> Dataset {
    Dataset::from_series(&sim.series, basis_count).expect("valid series")
}
