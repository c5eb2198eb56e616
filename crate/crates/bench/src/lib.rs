//! Shared fixtures for the benchmarks.

use absorbing_core::{merton_as_generic, DefaultLossModel, GridSpec, MarketParams, RegimeControlProblem};

pub fn acceptance_params() -> MarketParams {
    MarketParams::new(0.08, 0.2, 0.02, 0.02, 1.0, 1.0).expect("valid parameters")
}

pub fn merton_problem() -> RegimeControlProblem {
    merton_as_generic(&acceptance_params(), DefaultLossModel::Exponential)
        .expect("valid problem")
}

/// A grid small enough to solve inside a benchmark iteration.
pub fn bench_grid(n_x: usize, n_t: usize) -> GridSpec {
    GridSpec::new(-4.0, 4.0, n_x, n_t, GridSpec::uniform_controls(0.0, 3.0, 61))
        .expect("valid grid")
}
