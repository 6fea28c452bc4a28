//! Shared fixtures for the benches: deterministic instances sized so each
//! benchmark exercises the interesting code path, not setup noise.

use vma_core::instance::gen_uniform;
use vma_core::{Instance, PowerParams, Resources};

pub fn params() -> PowerParams {
    PowerParams::new(3.0, 2.0).unwrap()
}

/// Ten loads straddling the power-optimal load, so the exhaustive search
/// has to do real pruning rather than falling into the all-singletons or
/// all-together shortcuts.
pub fn oracle_instance() -> Instance {
    gen_uniform(10, 0.05, 2.0, 42, params(), Resources::unbounded()).unwrap()
}

/// A long stretch of sub-capacity loads for the packing and streaming
/// benches.
pub fn long_loads(n: usize) -> Vec<f64> {
    gen_uniform(n, 0.05, 0.95, 43, params(), Resources::unbounded())
        .unwrap()
        .loads()
        .to_vec()
}
