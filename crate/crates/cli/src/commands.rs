//! One function per subcommand. Each takes a resolved [`RunConfig`].

use absorbing_core::closedform::{f_as_printed, f_ode_coefficients};
use absorbing_core::{
    estimate, expected_log_utility_exact, f_closed_form, j_after, merton_as_generic_with_bounds,
    optimal_weight, solve_f_backward, solve_system, sweep, DefaultLossModel, FCoefficientVariant,
    GridSpec, MarketParams, McEstimate, RegimeControlProblem, ValueSurface,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{self, Rendered};
use crate::CliError;

/// Spacing of the weight grid scanned by the lemma gate.
pub const LEMMA_GRID_STEP: f64 = 1e-3;
pub const ODE_TOLERANCE: f64 = 1e-10;
pub const HJB_TOLERANCE: f64 = 2e-2;
pub const EXACT_ORACLE_TOLERANCE: f64 = 1e-12;
pub const MC_STDERR_MULTIPLE: f64 = 3.0;

fn problem(cfg: &RunConfig) -> Result<RegimeControlProblem, CliError> {
    Ok(merton_as_generic_with_bounds(&cfg.market, cfg.loss_mode, cfg.control_bounds)?)
}

// closed-form

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormSample {
    pub t: f64,
    pub j_after_w0: f64,
    pub f_derived: f64,
    pub f_paper: f64,
    pub f_printed_derived: f64,
    pub f_printed_paper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormReport {
    pub params: MarketParams,
    pub pi_star: f64,
    pub k_derived: f64,
    pub k_paper: f64,
    pub samples: Vec<ClosedFormSample>,
    pub config: RunConfig,
}

pub fn closed_form(cfg: &RunConfig) -> Result<ClosedFormReport, CliError> {
    let p = &cfg.market;
    let (paper, derived) = (FCoefficientVariant::PaperK, FCoefficientVariant::DerivedK);
    let samples = cfg
        .report_times
        .iter()
        .flatten()
        .map(|&t| {
            Ok(ClosedFormSample {
                t,
                j_after_w0: j_after(p, p.w0, t)?,
                f_derived: f_closed_form(p, t, derived)?,
                f_paper: f_closed_form(p, t, paper)?,
                f_printed_derived: f_as_printed(p, t, derived)?,
                f_printed_paper: f_as_printed(p, t, paper)?,
            })
        })
        .collect::<Result<_, absorbing_core::Error>>()?;
    Ok(ClosedFormReport {
        params: *p,
        pi_star: optimal_weight(p),
        k_derived: f_ode_coefficients(p, derived).k,
        k_paper: f_ode_coefficients(p, paper).k,
        samples,
        config: cfg.clone(),
    })
}

// ode-check

#[derive(Debug, Clone, Serialize)]
pub struct OdeRow {
    pub t: f64,
    pub f_rk4: f64,
    pub f_closed: f64,
    pub abs_diff: f64,
}

pub fn ode_check(cfg: &RunConfig) -> Result<Vec<OdeRow>, CliError> {
    let curve = solve_f_backward(&cfg.market, cfg.variant, &cfg.ode)?;
    curve
        .iter()
        .map(|(t, f_rk4)| {
            let f_closed = f_closed_form(&cfg.market, t, cfg.variant)?;
            Ok(OdeRow { t, f_rk4, f_closed, abs_diff: (f_rk4 - f_closed).abs() })
        })
        .collect()
}

// hjb-solve

#[derive(Debug, Clone, Serialize)]
pub struct HjbRow {
    pub t: f64,
    pub x: f64,
    pub v_pre: f64,
    pub v_after: f64,
    pub policy: f64,
    pub implied_f: f64,
}

fn nearest_level(grid: &GridSpec, horizon: f64, t: f64) -> usize {
    ((t / horizon) * grid.n_t as f64).round() as usize
}

pub fn hjb_solve(cfg: &RunConfig) -> Result<Vec<HjbRow>, CliError> {
    let problem = problem(cfg)?;
    let grid = cfg.grid_spec()?;
    let surface = solve_system(&problem, &grid)?;
    let horizon = cfg.market.horizon;
    let mut rows = Vec::new();
    for &t in cfg.report_times.iter().flatten() {
        let n = nearest_level(&grid, horizon, t);
        for j in 0..grid.n_x {
            let x = grid.x(j);
            let v_pre = surface.v_pre.get(n, j);
            rows.push(HjbRow {
                t: grid.t(n, horizon),
                x,
                v_pre,
                v_after: surface.v_after.get(n, j),
                policy: surface.policy.get(n, j),
                implied_f: -v_pre - x,
            });
        }
    }
    Ok(rows)
}

// mc-estimate

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub params: MarketParams,
    pub loss_mode: DefaultLossModel,
    pub pi: f64,
    pub estimate: McEstimate,
    pub exact_value: f64,
    pub deviation: f64,
    pub config: RunConfig,
}

pub fn mc_estimate(cfg: &RunConfig) -> Result<McReport, CliError> {
    let pi = cfg.pi.unwrap_or_else(|| optimal_weight(&cfg.market));
    let est = estimate(&cfg.market, pi, cfg.loss_mode, &cfg.mc)?;
    let exact_value = expected_log_utility_exact(&cfg.market, pi, cfg.loss_mode)?;
    Ok(McReport {
        params: cfg.market,
        loss_mode: cfg.loss_mode,
        pi,
        estimate: est,
        exact_value,
        deviation: (est.mean - exact_value).abs(),
        config: cfg.clone(),
    })
}

// sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub pi: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub exact_value: f64,
    pub is_mc_argmax: bool,
    pub is_analytic_argmax: bool,
}

/// Index of the first maximum.
fn first_argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn sweep_report(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let grid = cfg.sweep.points();
    let result = sweep(&cfg.market, cfg.loss_mode, &grid, &cfg.mc)?;
    let exact: Vec<f64> = grid
        .iter()
        .map(|&pi| expected_log_utility_exact(&cfg.market, pi, cfg.loss_mode))
        .collect::<Result<_, _>>()?;
    let analytic = first_argmax(exact.iter().copied());
    Ok(result
        .points
        .iter()
        .zip(&exact)
        .enumerate()
        .map(|(i, ((pi, est), &exact_value))| SweepRow {
            pi: *pi,
            mc_mean: est.mean,
            mc_stderr: est.std_error,
            exact_value,
            is_mc_argmax: i == result.argmax,
            is_analytic_argmax: i == analytic,
        })
        .collect())
}

// verify

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Gate {
    fn within(name: &str, deviation: f64, tolerance: f64) -> Self {
        Self { name: name.into(), deviation, tolerance, pass: deviation <= tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub params: MarketParams,
    pub variant: FCoefficientVariant,
    pub pi_star: f64,
    pub f0_closed: f64,
    pub f0_rk4: f64,
    pub f0_hjb: f64,
    pub value_exact: f64,
    pub value_mc: f64,
    pub mc_stderr: f64,
    pub gates: Vec<Gate>,
    pub config: RunConfig,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }
}

/// Largest jump distance over the control nodes; interior checks keep at
/// least this far from the grid edges.
fn jump_margin(problem: &RegimeControlProblem, grid: &GridSpec) -> f64 {
    let x = 0.5 * (grid.x_min + grid.x_max);
    grid.control_nodes
        .iter()
        .map(|&u| (problem.jump_map(0.0, x, u) - x).abs())
        .fold(0.0, f64::max)
}

fn hjb_gates(
    cfg: &RunConfig,
    surface: &ValueSurface,
    margin: f64,
    f0_closed: f64,
    pi_star: f64,
) -> Result<(f64, Vec<Gate>), CliError> {
    let grid = &surface.grid;
    let interior = grid.interior_nodes(margin);
    if interior.is_empty() {
        return Err(CliError::Config(format!(
            "no grid node lies {margin} away from both edges; widen [x_min, x_max]"
        )));
    }
    let value_dev = interior
        .iter()
        .map(|&j| (-surface.v_pre.get(0, j) - grid.x(j) - f0_closed).abs())
        .fold(0.0, f64::max);
    let target = pi_star.clamp(cfg.control_bounds.lo, cfg.control_bounds.hi);
    let spacing = grid
        .control_nodes
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let policy_dev = interior
        .iter()
        .map(|&j| (surface.policy.get(0, j) - target).abs())
        .fold(0.0, f64::max);
    let x0 = cfg.market.w0.ln();
    let j0 = (0..grid.n_x)
        .min_by(|&a, &b| (grid.x(a) - x0).abs().total_cmp(&(grid.x(b) - x0).abs()))
        .unwrap_or(0);
    let f0_hjb = -surface.v_pre.get(0, j0) - grid.x(j0);
    Ok((
        f0_hjb,
        vec![
            Gate::within("hjb_vs_closed", value_dev, HJB_TOLERANCE),
            Gate::within("hjb_policy", policy_dev, spacing + 1e-12),
        ],
    ))
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    if cfg.loss_mode != DefaultLossModel::Exponential {
        return Err(CliError::Config(
            "verify compares against the exponential-loss closed form; set loss_mode to \"exponential\""
                .into(),
        ));
    }
    let p = &cfg.market;
    let variant = cfg.variant;
    let pi_star = optimal_weight(p);
    let mut gates = Vec::new();

    let no_hazard = MarketParams { h: 0.0, ..*p };
    let merton = (p.mu - p.r) / (p.sigma * p.sigma);
    let reduced = optimal_weight(&no_hazard);
    gates.push(Gate {
        name: "merton_reduction".into(),
        deviation: (reduced - merton).abs(),
        tolerance: 0.0,
        pass: reduced.to_bits() == merton.to_bits(),
    });

    let (lo, hi) = (cfg.control_bounds.lo, cfg.control_bounds.hi);
    let n = ((hi - lo) / LEMMA_GRID_STEP).round() as usize;
    let lemma_grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * LEMMA_GRID_STEP).collect();
    let values: Vec<f64> = lemma_grid
        .iter()
        .map(|&pi| expected_log_utility_exact(p, pi, cfg.loss_mode))
        .collect::<Result<_, _>>()?;
    let grid_best = lemma_grid[first_argmax(values)];
    gates.push(Gate::within(
        "lemma_argmax",
        (grid_best - pi_star).abs(),
        LEMMA_GRID_STEP + 1e-12,
    ));

    let f0_closed = f_closed_form(p, 0.0, variant)?;
    let curve = solve_f_backward(p, variant, &cfg.ode)?;
    let ode_dev = curve
        .iter()
        .map(|(t, f)| f_closed_form(p, t, variant).map(|c| (f - c).abs()))
        .try_fold(0.0, |acc: f64, d| d.map(|d| acc.max(d)))?;
    gates.push(Gate::within("ode_vs_closed", ode_dev, ODE_TOLERANCE));

    let problem = problem(cfg)?;
    let grid = cfg.grid_spec()?;
    let surface = solve_system(&problem, &grid)?;
    let (f0_hjb, mut hjb) =
        hjb_gates(cfg, &surface, jump_margin(&problem, &grid), f0_closed, pi_star)?;
    gates.append(&mut hjb);

    let value_exact = expected_log_utility_exact(p, pi_star, cfg.loss_mode)?;
    gates.push(Gate::within(
        "exact_oracle",
        (f0_closed - (value_exact - p.w0.ln())).abs(),
        EXACT_ORACLE_TOLERANCE,
    ));

    let mc = estimate(p, pi_star, cfg.loss_mode, &cfg.mc)?;
    gates.push(Gate::within(
        "mc_vs_exact",
        (mc.mean - value_exact).abs(),
        MC_STDERR_MULTIPLE * mc.std_error,
    ));

    Ok(VerifyReport {
        params: *p,
        variant,
        pi_star,
        f0_closed,
        f0_rk4: curve.values()[0],
        f0_hjb,
        value_exact,
        value_mc: mc.mean,
        mc_stderr: mc.std_error,
        gates,
        config: cfg.clone(),
    })
}

/// Runs a subcommand by name. The flag is false only when a verify gate fails.
pub fn run(command: &str, cfg: &RunConfig) -> Result<(Rendered, bool), CliError> {
    let config_json = cfg.to_json();
    Ok(match command {
        "closed-form" => (report::json(&closed_form(cfg)?), true),
        "ode-check" => (report::csv(&ode_check(cfg)?, config_json)?, true),
        "hjb-solve" => (report::csv(&hjb_solve(cfg)?, config_json)?, true),
        "mc-estimate" => (report::json(&mc_estimate(cfg)?), true),
        "sweep" => (report::csv(&sweep_report(cfg)?, config_json)?, true),
        "verify" => {
            let rep = verify(cfg)?;
            let pass = rep.all_pass();
            (report::json(&rep), pass)
        }
        other => return Err(CliError::Config(format!("unknown command {other}"))),
    })
}
