//! Run configuration: one strict JSON document per run.

use std::fs;
use std::path::{Path, PathBuf};

use absorbing_core::{
    ControlBounds, DefaultLossModel, FCoefficientVariant, GridSpec, MarketParams, McConfig,
    OdeConfig,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Grid knobs; `x_min`/`x_max` default to `log w0 -/+ 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default = "default_n_x")]
    pub n_x: usize,
    #[serde(default = "default_n_t")]
    pub n_t: usize,
    /// Explicit control nodes; otherwise `n_controls` uniform nodes on the
    /// control bounds.
    #[serde(default)]
    pub control_nodes: Option<Vec<f64>>,
    #[serde(default = "default_n_controls")]
    pub n_controls: usize,
}

fn default_n_x() -> usize {
    401
}
fn default_n_t() -> usize {
    4000
}
fn default_n_controls() -> usize {
    61
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: None,
            x_max: None,
            n_x: default_n_x(),
            n_t: default_n_t(),
            control_nodes: None,
            n_controls: default_n_controls(),
        }
    }
}

/// Weight grid for `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub pi_min: f64,
    pub pi_max: f64,
    pub pi_step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { pi_min: 0.0, pi_max: 3.0, pi_step: 0.05 }
    }
}

impl SweepConfig {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.pi_max - self.pi_min) / self.pi_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.pi_min + i as f64 * self.pi_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketParams,
    #[serde(default)]
    pub loss_mode: DefaultLossModel,
    #[serde(default)]
    pub variant: FCoefficientVariant,
    #[serde(default)]
    pub control_bounds: ControlBounds,
    /// Weight evaluated by `mc-estimate`; defaults to the optimal weight.
    #[serde(default)]
    pub pi: Option<f64>,
    #[serde(default)]
    pub ode: OdeConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Times at which `closed-form` samples `f` and `J_after`.
    #[serde(default)]
    pub report_times: Option<Vec<f64>>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills every derived default and checks all invariants.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        self.market.validate()?;
        let bounds = ControlBounds::new(self.control_bounds.lo, self.control_bounds.hi)?;
        if self.loss_mode == DefaultLossModel::Linear && bounds.hi >= 1.0 {
            return Err(CliError::Config(
                "linear loss needs control_bounds.hi < 1".into(),
            ));
        }
        self.ode.validate()?;
        self.mc.validate()?;

        let log_w0 = self.market.w0.ln();
        self.grid.x_min.get_or_insert(log_w0 - 4.0);
        self.grid.x_max.get_or_insert(log_w0 + 4.0);
        if self.grid.control_nodes.is_none() {
            if self.grid.n_controls < 1 {
                return Err(CliError::Config("grid.n_controls must be positive".into()));
            }
            self.grid.control_nodes =
                Some(GridSpec::uniform_controls(bounds.lo, bounds.hi, self.grid.n_controls));
        }
        let grid = self.grid_spec()?;
        if grid.control_nodes.iter().any(|&u| !bounds.contains(u)) {
            return Err(CliError::Config("control node outside control_bounds".into()));
        }

        let sweep = self.sweep;
        if !(sweep.pi_step > 0.0 && sweep.pi_min <= sweep.pi_max && sweep.pi_min.is_finite())
            || !sweep.pi_max.is_finite()
        {
            return Err(CliError::Config("sweep needs pi_min <= pi_max and pi_step > 0".into()));
        }
        if self.loss_mode == DefaultLossModel::Linear && sweep.pi_max >= 1.0 {
            return Err(CliError::Config("linear loss needs sweep.pi_max < 1".into()));
        }
        if let Some(pi) = self.pi {
            self.loss_mode.log_loss(pi)?;
        }

        let horizon = self.market.horizon;
        let times = self
            .report_times
            .get_or_insert_with(|| (0..=4).map(|i| horizon * i as f64 / 4.0).collect());
        if times.iter().any(|t| !(0.0..=horizon).contains(t)) {
            return Err(CliError::Config("report_times must lie in [0, horizon_T]".into()));
        }
        Ok(self)
    }

    /// Grid of a resolved config.
    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let log_w0 = self.market.w0.ln();
        Ok(GridSpec::new(
            self.grid.x_min.unwrap_or(log_w0 - 4.0),
            self.grid.x_max.unwrap_or(log_w0 + 4.0),
            self.grid.n_x,
            self.grid.n_t,
            self.grid.control_nodes.clone().unwrap_or_else(|| {
                GridSpec::uniform_controls(
                    self.control_bounds.lo,
                    self.control_bounds.hi,
                    self.grid.n_controls,
                )
            }),
        )?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
