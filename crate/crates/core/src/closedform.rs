//! Analytic results for the log-utility Merton problem with default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DefaultLossModel, MarketParams};

/// Below this hazard the `h -> 0` limit formulas are used.
pub const HAZARD_EPSILON: f64 = 1e-10;

/// Which constant term to use in the ODE for `f(t)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FCoefficientVariant {
    /// `K = (mu - r - h)^2 (2 - sigma^2) / (2 sigma^2)`, as printed.
    #[serde(rename = "paper")]
    PaperK,
    /// `K = (mu - r - h)^2 / (2 sigma^2)`, from substituting the optimal
    /// weight into the drift of `J_pre`.
    #[default]
    #[serde(rename = "derived")]
    DerivedK,
}

impl FCoefficientVariant {
    pub const ALL: [FCoefficientVariant; 2] =
        [FCoefficientVariant::PaperK, FCoefficientVariant::DerivedK];

    pub fn name(self) -> &'static str {
        match self {
            FCoefficientVariant::PaperK => "paper",
            FCoefficientVariant::DerivedK => "derived",
        }
    }
}

/// Constants of `f'(t) - h f(t) - h r (T - t) = g - r` with `g = -k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FOdeCoefficients {
    pub k: f64,
    pub g: f64,
}

/// Optimal constant stock weight `(mu - r - h) / sigma^2`.
pub fn optimal_weight(params: &MarketParams) -> f64 {
    params.excess_drift() / (params.sigma * params.sigma)
}

/// Drift of `log W` before default under constant weight `pi`.
pub fn log_growth_rate(params: &MarketParams, pi: f64) -> f64 {
    params.r + pi * (params.mu - params.r) - 0.5 * pi * pi * params.sigma * params.sigma
}

/// The `pi`-dependent part of the drift of `J_pre`: `pi (mu - r - h) - pi^2 sigma^2 / 2`.
///
/// Maximized by [`optimal_weight`]; its maximum is `K` for the derived variant.
pub fn hazard_adjusted_gain(params: &MarketParams, pi: f64) -> f64 {
    pi * params.excess_drift() - 0.5 * pi * pi * params.sigma * params.sigma
}

/// Value after default: cash only, so `log w + r (T - t)`.
pub fn j_after(params: &MarketParams, w: f64, t: f64) -> Result<f64> {
    if w.is_nan() || w <= 0.0 {
        return Err(Error::Domain(format!("wealth must be positive, got {w}")));
    }
    check_time(params, t)?;
    Ok(params.r * (params.horizon - t) + w.ln())
}

pub fn f_ode_coefficients(params: &MarketParams, variant: FCoefficientVariant) -> FOdeCoefficients {
    let sigma2 = params.sigma * params.sigma;
    let excess2 = params.excess_drift() * params.excess_drift();
    let k = match variant {
        FCoefficientVariant::PaperK => excess2 * (2.0 - sigma2) / (2.0 * sigma2),
        FCoefficientVariant::DerivedK => excess2 / (2.0 * sigma2),
    };
    FOdeCoefficients { k, g: -k }
}

/// `f(t)` solving `f' - h f = -K - r - h r (T - t)` with `f(T) = 0`.
///
/// The forcing carries `J_after = log W + r (T - t)`, the value of holding
/// cash from `t` to `T`. The solution is `r (T - t) + K (1 - e^{h(t - T)}) / h`;
/// for `h <= HAZARD_EPSILON` the limit `(K + r)(T - t)` is returned.
pub fn f_closed_form(params: &MarketParams, t: f64, variant: FCoefficientVariant) -> Result<f64> {
    check_time(params, t)?;
    let FOdeCoefficients { k, .. } = f_ode_coefficients(params, variant);
    let (r, h) = (params.r, params.h);
    let to_go = params.horizon - t;
    if h <= HAZARD_EPSILON {
        return Ok((k + r) * to_go);
    }
    Ok(r * to_go - k * (-h * to_go).exp_m1() / h)
}

/// The printed solution `(-g + e^{h(t-T)}(g - 2r) + r(2 + h(t - T))) / h`
/// with its parentheses balanced.
///
/// It solves `f' - h f = -K - r - h r (t - T)`, i.e. the equation obtained with
/// the post-default value taken as `log W + r (t - T)`. Kept for reporting
/// next to [`f_closed_form`]; it does not match the exact expected utility.
pub fn f_as_printed(params: &MarketParams, t: f64, variant: FCoefficientVariant) -> Result<f64> {
    check_time(params, t)?;
    let FOdeCoefficients { k, g } = f_ode_coefficients(params, variant);
    let (r, h) = (params.r, params.h);
    let lag = t - params.horizon;
    if h <= HAZARD_EPSILON {
        return Ok(-(k + r) * lag);
    }
    // (-g + e^{h lag}(g - 2r) + 2r + h r lag) / h, regrouped to avoid cancellation
    Ok(r * lag + (g - 2.0 * r) * (h * lag).exp_m1() / h)
}

/// `E[log W_T]` under the constant weight `pi`, by integrating the exact
/// terminal law against the exponential default-time density.
///
/// With `a` the pre-default log-growth rate and `l` the log-loss at default,
/// `E = log w0 + e^{-hT} a T + int_0^T h e^{-h s} (a s + l + r (T - s)) ds`,
/// and the integral is done in closed form.
pub fn expected_log_utility_exact(
    params: &MarketParams,
    pi: f64,
    loss: DefaultLossModel,
) -> Result<f64> {
    let loss_at_default = loss.log_loss(pi)?;
    let growth = log_growth_rate(params, pi);
    let (r, h, horizon) = (params.r, params.h, params.horizon);
    let log_w0 = params.w0.ln();
    if h <= HAZARD_EPSILON {
        return Ok(log_w0 + growth * horizon);
    }
    let x = h * horizon;
    let survival = (-x).exp();
    let default_prob = -(-x).exp_m1();
    // int_0^T h s e^{-h s} ds
    let mean_default_time_part = (default_prob - x * survival) / h;
    Ok(log_w0
        + survival * growth * horizon
        + (growth - r) * mean_default_time_part
        + (loss_at_default + r * horizon) * default_prob)
}

fn check_time(params: &MarketParams, t: f64) -> Result<()> {
    if !(0.0..=params.horizon).contains(&t) {
        return Err(Error::Domain(format!(
            "time {t} outside [0, {}]",
            params.horizon
        )));
    }
    Ok(())
}
