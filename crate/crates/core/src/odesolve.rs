//! Fixed-step integration of the terminal-value ODE for `f(t)`.

use serde::{Deserialize, Serialize};

use crate::closedform::{f_ode_coefficients, FCoefficientVariant};
use crate::error::{Error, Result};
use crate::model::{FCurve, MarketParams};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdeMethod {
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    /// Requested step; the step count is rounded up so it divides `T`.
    pub step: f64,
    #[serde(default)]
    pub method: OdeMethod,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { step: 1e-4, method: OdeMethod::Rk4 }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ode step must be positive, got {}",
                self.step
            )));
        }
        Ok(())
    }

    /// Number of uniform intervals covering `[0, horizon]`.
    pub fn n_steps(&self, horizon: f64) -> usize {
        let ratio = horizon / self.step;
        // absorb representation error so e.g. 1 / 1e-4 gives 10000, not 10001
        let nearest = ratio.round();
        let n = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        };
        (n as usize).max(1)
    }
}

/// One classical RK4 step of `y' = rhs(s, y)`.
fn rk4_step(rhs: impl Fn(f64, f64) -> f64, s: f64, y: f64, ds: f64) -> f64 {
    let k1 = rhs(s, y);
    let k2 = rhs(s + 0.5 * ds, y + 0.5 * ds * k1);
    let k3 = rhs(s + 0.5 * ds, y + 0.5 * ds * k2);
    let k4 = rhs(s + ds, y + ds * k3);
    y + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates `f'(t) = h f - K - r - h r (T - t)` backward from `f(T) = 0`.
///
/// Runs forward in time-to-go `s = T - t`, where `df/ds = -h f + K + r + h r s`.
pub fn solve_f_backward(
    params: &MarketParams,
    variant: FCoefficientVariant,
    cfg: &OdeConfig,
) -> Result<FCurve> {
    params.validate()?;
    cfg.validate()?;
    let k = f_ode_coefficients(params, variant).k;
    let (r, h, horizon) = (params.r, params.h, params.horizon);
    let n = cfg.n_steps(horizon);
    let ds = horizon / n as f64;
    let rhs = |s: f64, f: f64| -h * f + k + r + h * r * s;

    // values[j] holds f at time-to-go j * ds
    let mut to_go = Vec::with_capacity(n + 1);
    let mut f = 0.0;
    to_go.push(f);
    for j in 0..n {
        f = rk4_step(rhs, j as f64 * ds, f, ds);
        if !f.is_finite() {
            return Err(Error::Numerical(format!("f diverged at step {j}")));
        }
        to_go.push(f);
    }

    let mut times: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    times[n] = horizon;
    to_go.reverse();
    FCurve::new(times, to_go, horizon)
}
