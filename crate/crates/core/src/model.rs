//! Problem data: the Merton market with a defaultable stock and the generic
//! two-regime control problem it maps onto.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the log-utility Merton problem with a default hazard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Drift of the stock before default.
    pub mu: f64,
    /// Stock volatility.
    pub sigma: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Default hazard rate.
    pub h: f64,
    /// Terminal time.
    #[serde(rename = "horizon_T")]
    pub horizon: f64,
    /// Initial wealth.
    pub w0: f64,
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, r: f64, h: f64, horizon: f64, w0: f64) -> Result<Self> {
        let p = Self { mu, sigma, r, h, horizon, w0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !self.mu.is_finite() || !self.r.is_finite() {
            return bad("mu and r must be finite");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad("sigma must be positive and finite");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad("horizon_T must be positive and finite");
        }
        if !(self.w0.is_finite() && self.w0 > 0.0) {
            return bad("w0 must be positive and finite");
        }
        if !(self.h.is_finite() && self.h >= 0.0) {
            return bad("h must be non-negative and finite");
        }
        Ok(())
    }

    /// `mu - r - h`, the excess drift left after paying for default risk.
    pub fn excess_drift(&self) -> f64 {
        self.mu - self.r - self.h
    }
}

/// How wealth is hit when the stock defaults with weight `pi` in it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultLossModel {
    /// `W -> W * exp(-pi)`.
    #[default]
    Exponential,
    /// `W -> W * (1 - pi)`, only defined for `pi < 1`.
    Linear,
}

impl DefaultLossModel {
    /// Change in log-wealth at default under weight `pi`.
    pub fn log_loss(self, pi: f64) -> Result<f64> {
        match self {
            DefaultLossModel::Exponential => Ok(-pi),
            DefaultLossModel::Linear => {
                if pi < 1.0 {
                    Ok((-pi).ln_1p())
                } else {
                    Err(Error::Domain(format!(
                        "linear default loss needs pi < 1, got {pi}"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for DefaultLossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefaultLossModel::Exponential => f.write_str("exponential"),
            DefaultLossModel::Linear => f.write_str("linear"),
        }
    }
}

/// Closed interval of admissible controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ControlBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "control bounds need lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, u: f64) -> bool {
        self.lo <= u && u <= self.hi
    }
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self { lo: 0.0, hi: 3.0 }
    }
}

/// Coefficient of the form `(t, x, u) -> value`.
pub type ControlFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Terminal cost `x -> value`.
pub type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A one-dimensional control problem with a single absorbing switch.
///
/// Before the switch the state follows `dx = drift_pre dt + vol_pre dB`. At
/// rate `hazard` it jumps to `jump_map(t, x, u)` and then follows the post
/// regime forever. The objective `E[int C dt + D(x_T)]` is minimized.
///
/// All closures must be pure.
#[derive(Clone)]
pub struct RegimeControlProblem {
    horizon: f64,
    hazard: f64,
    bounds: ControlBounds,
    drift_pre: ControlFn,
    vol_pre: ControlFn,
    drift_post: ControlFn,
    vol_post: ControlFn,
    jump_map: ControlFn,
    running_cost: ControlFn,
    terminal_cost: StateFn,
}

impl fmt::Debug for RegimeControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegimeControlProblem")
            .field("horizon", &self.horizon)
            .field("hazard", &self.hazard)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl RegimeControlProblem {
    /// A problem with zero coefficients, identity jump and zero costs.
    pub fn new(horizon: f64, hazard: f64, bounds: ControlBounds) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParams(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(hazard.is_finite() && hazard >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "hazard must be non-negative, got {hazard}"
            )));
        }
        ControlBounds::new(bounds.lo, bounds.hi)?;
        let zero: ControlFn = Arc::new(|_, _, _| 0.0);
        Ok(Self {
            horizon,
            hazard,
            bounds,
            drift_pre: zero.clone(),
            vol_pre: zero.clone(),
            drift_post: zero.clone(),
            vol_post: zero.clone(),
            jump_map: Arc::new(|_, x, _| x),
            running_cost: zero,
            terminal_cost: Arc::new(|_| 0.0),
        })
    }

    pub fn with_pre_regime(
        mut self,
        drift: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        vol: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.drift_pre = Arc::new(drift);
        self.vol_pre = Arc::new(vol);
        self
    }

    pub fn with_post_regime(
        mut self,
        drift: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        vol: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.drift_post = Arc::new(drift);
        self.vol_post = Arc::new(vol);
        self
    }

    pub fn with_jump_map(
        mut self,
        jump: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.jump_map = Arc::new(jump);
        self
    }

    pub fn with_running_cost(
        mut self,
        cost: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.running_cost = Arc::new(cost);
        self
    }

    pub fn with_terminal_cost(mut self, cost: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.terminal_cost = Arc::new(cost);
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn hazard(&self) -> f64 {
        self.hazard
    }

    pub fn control_bounds(&self) -> ControlBounds {
        self.bounds
    }

    #[inline]
    pub fn drift_pre(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.drift_pre)(t, x, u)
    }

    #[inline]
    pub fn vol_pre(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.vol_pre)(t, x, u)
    }

    #[inline]
    pub fn drift_post(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.drift_post)(t, x, u)
    }

    #[inline]
    pub fn vol_post(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.vol_post)(t, x, u)
    }

    #[inline]
    pub fn jump_map(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.jump_map)(t, x, u)
    }

    #[inline]
    pub fn running_cost(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.running_cost)(t, x, u)
    }

    #[inline]
    pub fn terminal_cost(&self, x: f64) -> f64 {
        (self.terminal_cost)(x)
    }
}

/// The Merton instance in log-wealth coordinates with controls in `[0, 3]`.
pub fn merton_as_generic(
    params: &MarketParams,
    loss: DefaultLossModel,
) -> Result<RegimeControlProblem> {
    merton_as_generic_with_bounds(params, loss, ControlBounds::default())
}

/// The Merton instance in log-wealth coordinates `x = log W`.
///
/// Pre-default the log-wealth drift is `r + u(mu - r) - u^2 sigma^2 / 2` with
/// volatility `u sigma`; post-default wealth earns `r` with no risk. The
/// terminal cost is `-x`, so minimizing it maximizes `E[log W_T]`.
pub fn merton_as_generic_with_bounds(
    params: &MarketParams,
    loss: DefaultLossModel,
    bounds: ControlBounds,
) -> Result<RegimeControlProblem> {
    params.validate()?;
    let bounds = ControlBounds::new(bounds.lo, bounds.hi)?;
    if loss == DefaultLossModel::Linear && bounds.hi >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "linear default loss needs control upper bound < 1, got {}",
            bounds.hi
        )));
    }
    let MarketParams { mu, sigma, r, .. } = *params;
    let sigma2 = sigma * sigma;
    let problem = RegimeControlProblem::new(params.horizon, params.h, bounds)?
        .with_pre_regime(
            move |_, _, u| r + u * (mu - r) - 0.5 * u * u * sigma2,
            move |_, _, u| u * sigma,
        )
        .with_post_regime(move |_, _, _| r, |_, _, _| 0.0)
        .with_terminal_cost(|x| -x);
    Ok(match loss {
        DefaultLossModel::Exponential => problem.with_jump_map(|_, x, u| x - u),
        DefaultLossModel::Linear => problem.with_jump_map(|_, x, u| x + (-u).ln_1p()),
    })
}

/// Samples of `f(t)` in `J_pre(W, t) = f(t) + log W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FCurve {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl FCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidConfig(
                "f-curve needs equally many times and values".into(),
            ));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "f-curve times must be strictly increasing".into(),
            ));
        }
        if times[0] < 0.0 || *times.last().unwrap() != horizon {
            return Err(Error::InvalidConfig(
                "f-curve must cover [0, T] and end at T".into(),
            ));
        }
        if *values.last().unwrap() != 0.0 {
            return Err(Error::InvalidConfig("f-curve must vanish at T".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }
}
