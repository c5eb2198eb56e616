//! Optimal control of a one-dimensional diffusion that can jump, once, into an
//! absorbing regime.
//!
//! The value function splits into a post-switch part, solved first, and a
//! pre-switch part whose HJB equation carries a hazard-weighted coupling to
//! the post-switch value at the jump target. The concrete instance is the
//! log-utility Merton portfolio with a defaultable stock, for which this crate
//! provides the closed form together with three independent checks:
//!
//! * [`odesolve`]: RK4 integration of the terminal-value ODE for `f(t)`,
//! * [`hjb`]: an explicit upwind finite-difference solve of the coupled system,
//! * [`montecarlo`]: exact-law simulation of constant policies, compared against
//!   the deterministic integral in [`closedform::expected_log_utility_exact`].

pub mod closedform;
pub mod error;
pub mod hjb;
pub mod model;
pub mod montecarlo;
pub mod odesolve;
pub mod rng;
mod sum;

pub use closedform::{
    expected_log_utility_exact, f_as_printed, f_closed_form, f_ode_coefficients, j_after, optimal_weight,
    FCoefficientVariant, FOdeCoefficients,
};
pub use error::{Error, Result};
pub use hjb::{solve_after, solve_pre, solve_system, GridSpec, Matrix, ValueSurface};
pub use model::{
    merton_as_generic, merton_as_generic_with_bounds, ControlBounds, DefaultLossModel, FCurve,
    MarketParams, RegimeControlProblem,
};
pub use montecarlo::{
    estimate, sample_default_time, simulate_terminal_log_wealth, sweep, DefaultTime, McConfig,
    McEstimate, SweepResult,
};
pub use odesolve::{solve_f_backward, OdeConfig, OdeMethod};
