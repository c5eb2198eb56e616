//! Explicit finite-difference solver for the coupled pre/post-switch HJB
//! system.
//!
//! The post-switch value solves `min_u { V_t + b V_x + s^2/2 V_xx + C } = 0`.
//! The pre-switch value adds the coupling `h (V_after(jump(x, u)) - V_pre(x))`
//! inside the minimization. Both are stepped backward from the terminal cost
//! with upwinded first differences; at the two edge nodes the first
//! difference is one-sided and `V_xx = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RegimeControlProblem;

/// Dense row-major matrix, one row per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Space-time grid and the discrete control set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub n_t: usize,
    pub control_nodes: Vec<f64>,
}

impl GridSpec {
    pub fn new(
        x_min: f64,
        x_max: f64,
        n_x: usize,
        n_t: usize,
        control_nodes: Vec<f64>,
    ) -> Result<Self> {
        let grid = Self { x_min, x_max, n_x, n_t, control_nodes };
        grid.validate()?;
        Ok(grid)
    }

    /// Validates geometry and checks the explicit-scheme stability bound for
    /// both regimes of `problem`.
    pub fn for_problem(
        problem: &RegimeControlProblem,
        x_min: f64,
        x_max: f64,
        n_x: usize,
        n_t: usize,
        control_nodes: Vec<f64>,
    ) -> Result<Self> {
        let grid = Self::new(x_min, x_max, n_x, n_t, control_nodes)?;
        grid.check_cfl(problem)?;
        Ok(grid)
    }

    /// `n` evenly spaced controls from `lo` to `hi` inclusive.
    pub fn uniform_controls(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => {
                let mut nodes: Vec<f64> =
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
                nodes[n - 1] = hi;
                nodes
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return bad(format!("need x_min < x_max, got [{}, {}]", self.x_min, self.x_max));
        }
        if self.n_x < 3 {
            return bad(format!("need n_x >= 3, got {}", self.n_x));
        }
        if self.n_t < 1 {
            return bad("need n_t >= 1".into());
        }
        if self.control_nodes.is_empty() {
            return bad("control_nodes is empty".into());
        }
        if self.control_nodes.iter().any(|u| !u.is_finite())
            || self.control_nodes.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("control_nodes must be finite and strictly increasing".into());
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dt(&self, horizon: f64) -> f64 {
        horizon / self.n_t as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.n_x {
            self.x_max
        } else {
            self.x_min + j as f64 * self.dx()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.x(j)).collect()
    }

    pub fn t(&self, n: usize, horizon: f64) -> f64 {
        if n == self.n_t {
            horizon
        } else {
            horizon * n as f64 / self.n_t as f64
        }
    }

    /// Indices of nodes at least `margin` away from both edges.
    pub fn interior_nodes(&self, margin: f64) -> Vec<usize> {
        (0..self.n_x)
            .filter(|&j| {
                let x = self.x(j);
                x - self.x_min >= margin - 1e-12 && self.x_max - x >= margin - 1e-12
            })
            .collect()
    }

    /// Checks `dt (s^2/dx^2 + |b|/dx + h) <= 1` at the first and last time
    /// levels for every node and control, in both regimes.
    pub fn check_cfl(&self, problem: &RegimeControlProblem) -> Result<()> {
        self.validate()?;
        let horizon = problem.horizon();
        let mut rate: f64 = 0.0;
        for t in [0.0, horizon] {
            for j in 0..self.n_x {
                let x = self.x(j);
                for &u in &self.control_nodes {
                    rate = rate.max(self.node_rate(
                        problem.drift_pre(t, x, u),
                        problem.vol_pre(t, x, u),
                        problem.hazard(),
                    ));
                    rate = rate.max(self.node_rate(
                        problem.drift_post(t, x, u),
                        problem.vol_post(t, x, u),
                        0.0,
                    ));
                }
            }
        }
        self.check_rate(rate, horizon)
    }

    /// Smallest `n_t` satisfying the stability bound at the given rate.
    fn min_n_t(&self, rate: f64, horizon: f64) -> usize {
        ((horizon * rate) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    #[inline]
    fn node_rate(&self, drift: f64, vol: f64, hazard: f64) -> f64 {
        let dx = self.dx();
        vol * vol / (dx * dx) + drift.abs() / dx + hazard
    }

    fn check_rate(&self, rate: f64, horizon: f64) -> Result<()> {
        if !rate.is_finite() {
            return Err(Error::Numerical("non-finite coefficient on the grid".into()));
        }
        let dt = self.dt(horizon);
        if dt * rate > 1.0 + 1e-12 {
            return Err(Error::Cfl {
                dt,
                max_dt: 1.0 / rate,
                min_n_t: self.min_n_t(rate, horizon),
            });
        }
        Ok(())
    }
}

/// Values of both regimes and the pre-switch policy on the grid.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub v_pre: Matrix,
    pub v_after: Matrix,
    pub policy: Matrix,
    pub grid: GridSpec,
}

impl ValueSurface {
    /// Pre-switch value in maximization form (`-v_pre`).
    pub fn utility_pre(&self, n: usize, j: usize) -> f64 {
        -self.v_pre.get(n, j)
    }

    /// Post-switch value in maximization form (`-v_after`).
    pub fn utility_after(&self, n: usize, j: usize) -> f64 {
        -self.v_after.get(n, j)
    }
}

/// One backward time step: new values, minimizing controls and the largest
/// stability rate met.
#[derive(Debug, Clone)]
pub struct RowUpdate {
    pub values: Vec<f64>,
    pub policy: Vec<f64>,
    pub max_rate: f64,
}

#[inline]
fn linear_interp(row: &[f64], grid: &GridSpec, y: f64) -> f64 {
    let y = y.clamp(grid.x_min, grid.x_max);
    let pos = (y - grid.x_min) / grid.dx();
    let i = (pos.floor() as usize).min(grid.n_x - 2);
    let w = pos - i as f64;
    row[i] + w * (row[i + 1] - row[i])
}

/// First and second differences at node `j`, upwinded by the sign of `drift`.
#[inline]
fn differences(v: &[f64], j: usize, dx: f64, drift: f64) -> (f64, f64) {
    let n = v.len();
    if j == 0 {
        ((v[1] - v[0]) / dx, 0.0)
    } else if j + 1 == n {
        ((v[j] - v[j - 1]) / dx, 0.0)
    } else {
        let first = if drift >= 0.0 {
            (v[j + 1] - v[j]) / dx
        } else {
            (v[j] - v[j - 1]) / dx
        };
        (first, (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (dx * dx))
    }
}

/// Discrete pre-switch Hamiltonian at node `j` and control `u`, given the
/// values `v_next` and `v_after_next` at time `t`.
pub fn pre_hamiltonian(
    problem: &RegimeControlProblem,
    grid: &GridSpec,
    t: f64,
    j: usize,
    u: f64,
    v_next: &[f64],
    v_after_next: &[f64],
) -> Result<f64> {
    pre_terms(problem, grid, grid.dx(), t, j, u, v_next, v_after_next).map(|(ham, _)| ham)
}

/// Hamiltonian and stability rate at one node and control.
#[allow(clippy::too_many_arguments)]
#[inline]
fn pre_terms(
    problem: &RegimeControlProblem,
    grid: &GridSpec,
    dx: f64,
    t: f64,
    j: usize,
    u: f64,
    v_next: &[f64],
    v_after_next: &[f64],
) -> Result<(f64, f64)> {
    let x = grid.x(j);
    let drift = problem.drift_pre(t, x, u);
    let vol = problem.vol_pre(t, x, u);
    let (first, second) = differences(v_next, j, dx, drift);
    let mut ham = drift * first + 0.5 * vol * vol * second + problem.running_cost(t, x, u);
    let hazard = problem.hazard();
    if hazard > 0.0 {
        let target = problem.jump_map(t, x, u);
        if !target.is_finite() {
            return Err(Error::Numerical(format!(
                "jump target not finite at t={t}, x={x}, u={u}"
            )));
        }
        ham += hazard * (linear_interp(v_after_next, grid, target) - v_next[j]);
    }
    Ok((ham, grid.node_rate(drift, vol, hazard)))
}

fn post_hamiltonian(
    problem: &RegimeControlProblem,
    grid: &GridSpec,
    t: f64,
    j: usize,
    u: f64,
    v_next: &[f64],
) -> (f64, f64) {
    let x = grid.x(j);
    let drift = problem.drift_post(t, x, u);
    let vol = problem.vol_post(t, x, u);
    let (first, second) = differences(v_next, j, grid.dx(), drift);
    let ham = drift * first + 0.5 * vol * vol * second + problem.running_cost(t, x, u);
    (ham, grid.node_rate(drift, vol, 0.0))
}

/// Scans the control nodes; strict `<` keeps the smallest control on ties.
fn argmin_controls(
    controls: &[f64],
    mut eval: impl FnMut(f64) -> Result<(f64, f64)>,
) -> Result<(f64, f64, f64)> {
    let mut best = (f64::INFINITY, controls[0]);
    let mut max_rate: f64 = 0.0;
    for &u in controls {
        let (ham, rate) = eval(u)?;
        max_rate = max_rate.max(rate);
        if ham < best.0 {
            best = (ham, u);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Numerical("Hamiltonian is not finite".into()));
    }
    Ok((best.0, best.1, max_rate))
}

/// Steps the post-switch value from time level `t` (row `v_next`) one `dt` back.
pub fn after_step(
    problem: &RegimeControlProblem,
    grid: &GridSpec,
    t: f64,
    dt: f64,
    v_next: &[f64],
) -> Result<RowUpdate> {
    let nodes: Vec<(f64, f64, f64)> = (0..grid.n_x)
        .into_par_iter()
        .map(|j| {
            let (ham, u, rate) = argmin_controls(&grid.control_nodes, |u| {
                Ok(post_hamiltonian(problem, grid, t, j, u, v_next))
            })?;
            Ok((v_next[j] + dt * ham, u, rate))
        })
        .collect::<Result<_>>()?;
    Ok(unzip_row(nodes))
}

/// Steps the pre-switch value from time level `t` one `dt` back, coupling to
/// the post-switch row at the same level.
pub fn pre_step(
    problem: &RegimeControlProblem,
    grid: &GridSpec,
    t: f64,
    dt: f64,
    v_next: &[f64],
    v_after_next: &[f64],
) -> Result<RowUpdate> {
    let dx = grid.dx();
    let nodes: Vec<(f64, f64, f64)> = (0..grid.n_x)
        .into_par_iter()
        .map(|j| {
            let (ham, u, rate) = argmin_controls(&grid.control_nodes, |u| {
                pre_terms(problem, grid, dx, t, j, u, v_next, v_after_next)
            })?;
            debug_assert!(grid.control_nodes.contains(&u));
            Ok((v_next[j] + dt * ham, u, rate))
        })
        .collect::<Result<_>>()?;
    Ok(unzip_row(nodes))
}

fn unzip_row(nodes: Vec<(f64, f64, f64)>) -> RowUpdate {
    let mut values = Vec::with_capacity(nodes.len());
    let mut policy = Vec::with_capacity(nodes.len());
    let mut max_rate: f64 = 0.0;
    for (v, u, rate) in nodes {
        values.push(v);
        policy.push(u);
        max_rate = max_rate.max(rate);
    }
    RowUpdate { values, policy, max_rate }
}

fn terminal_row(problem: &RegimeControlProblem, grid: &GridSpec) -> Vec<f64> {
    (0..grid.n_x).map(|j| problem.terminal_cost(grid.x(j))).collect()
}

/// Post-switch value on the grid, rows indexed by time level.
pub fn solve_after(problem: &RegimeControlProblem, grid: &GridSpec) -> Result<Matrix> {
    grid.check_cfl(problem)?;
    let horizon = problem.horizon();
    let dt = grid.dt(horizon);
    let mut v = Matrix::zeros(grid.n_t + 1, grid.n_x);
    v.row_mut(grid.n_t).copy_from_slice(&terminal_row(problem, grid));
    for n in (0..grid.n_t).rev() {
        let t = grid.t(n + 1, horizon);
        let update = after_step(problem, grid, t, dt, v.row(n + 1))?;
        grid.check_rate(update.max_rate, horizon)?;
        v.row_mut(n).copy_from_slice(&update.values);
    }
    Ok(v)
}

/// Pre-switch value and policy given the post-switch value on the same grid.
///
/// The last policy row holds the minimizers of the Hamiltonian at `t = T`.
pub fn solve_pre(
    problem: &RegimeControlProblem,
    v_after: &Matrix,
    grid: &GridSpec,
) -> Result<(Matrix, Matrix)> {
    grid.check_cfl(problem)?;
    if v_after.rows() != grid.n_t + 1 || v_after.cols() != grid.n_x {
        return Err(Error::InvalidConfig(format!(
            "v_after is {}x{}, grid needs {}x{}",
            v_after.rows(),
            v_after.cols(),
            grid.n_t + 1,
            grid.n_x
        )));
    }
    let horizon = problem.horizon();
    let dt = grid.dt(horizon);
    let mut v = Matrix::zeros(grid.n_t + 1, grid.n_x);
    let mut policy = Matrix::zeros(grid.n_t + 1, grid.n_x);
    v.row_mut(grid.n_t).copy_from_slice(&terminal_row(problem, grid));

    let last = pre_step(problem, grid, horizon, dt, v.row(grid.n_t), v_after.row(grid.n_t))?;
    grid.check_rate(last.max_rate, horizon)?;
    policy.row_mut(grid.n_t).copy_from_slice(&last.policy);

    for n in (0..grid.n_t).rev() {
        let t = grid.t(n + 1, horizon);
        let update = pre_step(problem, grid, t, dt, v.row(n + 1), v_after.row(n + 1))?;
        grid.check_rate(update.max_rate, horizon)?;
        v.row_mut(n).copy_from_slice(&update.values);
        policy.row_mut(n).copy_from_slice(&update.policy);
    }
    Ok((v, policy))
}

/// Solves the post-switch equation, then the pre-switch equation.
pub fn solve_system(problem: &RegimeControlProblem, grid: &GridSpec) -> Result<ValueSurface> {
    let v_after = solve_after(problem, grid)?;
    let (v_pre, policy) = solve_pre(problem, &v_after, grid)?;
    Ok(ValueSurface { v_pre, v_after, policy, grid: grid.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{f_closed_form, optimal_weight, FCoefficientVariant};
    use crate::model::{merton_as_generic, ControlBounds, DefaultLossModel, MarketParams};

    fn small_grid(n_t: usize) -> GridSpec {
        GridSpec::new(-4.0, 4.0, 81, n_t, GridSpec::uniform_controls(0.0, 3.0, 31)).unwrap()
    }

    fn merton(h: f64) -> (MarketParams, RegimeControlProblem) {
        let params = MarketParams::new(0.08, 0.2, 0.02, h, 1.0, 1.0).unwrap();
        let problem = merton_as_generic(&params, DefaultLossModel::Exponential).unwrap();
        (params, problem)
    }

    #[test]
    fn grid_geometry() {
        let g = small_grid(100);
        assert_eq!(g.dx(), 0.1);
        assert_eq!(g.x(0), -4.0);
        assert_eq!(g.x(80), 4.0);
        assert_eq!(g.interior_nodes(3.0), (30..=50).collect::<Vec<_>>());
        assert!(GridSpec::new(1.0, 1.0, 10, 10, vec![0.0]).is_err());
        assert!(GridSpec::new(0.0, 1.0, 2, 10, vec![0.0]).is_err());
        assert!(GridSpec::new(0.0, 1.0, 3, 0, vec![0.0]).is_err());
        assert!(GridSpec::new(0.0, 1.0, 3, 1, vec![]).is_err());
        assert!(GridSpec::new(0.0, 1.0, 3, 1, vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn cfl_violation_names_minimal_n_t() {
        let (_, problem) = merton(0.02);
        let grid = small_grid(10);
        let err = solve_system(&problem, &grid).unwrap_err();
        let Error::Cfl { min_n_t, .. } = err else { panic!("expected CFL error, got {err:?}") };
        assert!(min_n_t > 10);
        let ok = GridSpec { n_t: min_n_t, ..grid.clone() };
        assert!(ok.check_cfl(&problem).is_ok());
        let short = GridSpec { n_t: min_n_t - 1, ..grid };
        assert!(short.check_cfl(&problem).is_err());
    }

    #[test]
    fn after_value_is_exact_transport() {
        let (params, problem) = merton(0.02);
        let grid = small_grid(200);
        let v = solve_after(&problem, &grid).unwrap();
        for n in 0..=grid.n_t {
            let t = grid.t(n, 1.0);
            for j in 0..grid.n_x {
                let expected = -grid.x(j) - params.r * (1.0 - t);
                assert!((v.get(n, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn after_value_zero_data_and_zero_rate() {
        let problem = RegimeControlProblem::new(1.0, 0.1, ControlBounds::default()).unwrap();
        let grid = small_grid(50);
        let v = solve_after(&problem, &grid).unwrap();
        assert!(v.as_slice().iter().all(|&x| x == 0.0));

        let params = MarketParams::new(0.08, 0.2, 0.0, 0.02, 1.0, 1.0).unwrap();
        let problem = merton_as_generic(&params, DefaultLossModel::Exponential).unwrap();
        let v = solve_after(&problem, &grid).unwrap();
        for n in 0..=grid.n_t {
            for j in 0..grid.n_x {
                assert_eq!(v.get(n, j), -grid.x(j));
            }
        }
    }

    #[test]
    fn terminal_rows_equal_terminal_cost() {
        let (_, problem) = merton(0.02);
        let grid = small_grid(200);
        let s = solve_system(&problem, &grid).unwrap();
        for j in 0..grid.n_x {
            assert_eq!(s.v_pre.get(grid.n_t, j), -grid.x(j));
            assert_eq!(s.v_after.get(grid.n_t, j), -grid.x(j));
        }
        assert!(s.policy.as_slice().iter().all(|u| grid.control_nodes.contains(u)));
    }

    #[test]
    fn policy_matches_optimal_weight_in_interior() {
        for h in [0.0, 0.02, 0.05] {
            let (params, problem) = merton(h);
            let grid = small_grid(200);
            let s = solve_system(&problem, &grid).unwrap();
            let spacing = grid.control_nodes[1] - grid.control_nodes[0];
            let star = optimal_weight(&params);
            for n in [0, grid.n_t / 2, grid.n_t] {
                for j in grid.interior_nodes(3.0) {
                    let u = s.policy.get(n, j);
                    assert!((u - star).abs() <= spacing + 1e-12, "h {h} n {n} j {j}: {u} vs {star}");
                }
            }
        }
    }

    #[test]
    fn value_tracks_closed_form() {
        let (params, problem) = merton(0.02);
        let grid = small_grid(400);
        let s = solve_system(&problem, &grid).unwrap();
        let f0 = f_closed_form(&params, 0.0, FCoefficientVariant::DerivedK).unwrap();
        for j in grid.interior_nodes(3.0) {
            let implied = -s.v_pre.get(0, j) - grid.x(j);
            assert!((implied - f0).abs() < 1e-4, "node {j}: {implied} vs {f0}");
        }
    }

    #[test]
    fn decoupled_when_hazard_is_zero() {
        let (_, problem) = merton(0.0);
        let garbage = problem
            .clone()
            .with_post_regime(|t, x, u| (x * 3.0).sin() + u - t, |_, x, _| 0.1 * x.cos().abs());
        let grid = small_grid(400);
        let a = solve_system(&problem, &grid).unwrap();
        let b = solve_system(&garbage, &grid).unwrap();
        assert_ne!(a.v_after, b.v_after);
        assert_eq!(a.v_pre.as_slice(), b.v_pre.as_slice());
        assert_eq!(a.policy, b.policy);
    }

    #[test]
    fn monotone_terminal_cost_gives_monotone_values() {
        let (_, problem) = merton(0.3);
        let problem = problem.with_terminal_cost(|x| -(x.tanh()) - 0.1 * x);
        let grid = small_grid(400);
        let s = solve_system(&problem, &grid).unwrap();
        for n in 0..=grid.n_t {
            let row = s.v_pre.row(n);
            assert!(row.windows(2).all(|w| w[1] <= w[0]), "row {n} not monotone");
        }
    }

    #[test]
    fn stored_policy_minimizes_discrete_hamiltonian() {
        let (_, problem) = merton(0.05);
        let grid = small_grid(200);
        let s = solve_system(&problem, &grid).unwrap();
        for n in [0, 57, grid.n_t - 1] {
            let t = grid.t(n + 1, 1.0);
            let (v_next, va_next) = (s.v_pre.row(n + 1), s.v_after.row(n + 1));
            for j in 1..grid.n_x - 1 {
                let at_policy =
                    pre_hamiltonian(&problem, &grid, t, j, s.policy.get(n, j), v_next, va_next)
                        .unwrap();
                for &u in &grid.control_nodes {
                    let other = pre_hamiltonian(&problem, &grid, t, j, u, v_next, va_next).unwrap();
                    assert!(at_policy <= other);
                }
            }
        }
    }

    #[test]
    fn non_finite_jump_target_is_an_error() {
        let (_, problem) = merton(0.02);
        let problem = problem.with_jump_map(|_, x, u| if u > 2.0 { f64::NAN } else { x - u });
        let grid = small_grid(200);
        assert!(matches!(solve_system(&problem, &grid), Err(Error::Numerical(_))));
    }

    #[test]
    fn interpolation_clamps_at_edges() {
        let grid = small_grid(10);
        let row: Vec<f64> = grid.xs().iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((linear_interp(&row, &grid, 0.123) - 1.246).abs() < 1e-12);
        assert_eq!(linear_interp(&row, &grid, -10.0), -7.0);
        assert_eq!(linear_interp(&row, &grid, 10.0), 9.0);
    }
}
