//! Monte Carlo evaluation of constant policies.
//!
//! Terminal log-wealth is sampled from its exact law, so there is no time
//! discretization: a default time `tau ~ Exp(h)` and one normal draw per
//! path suffice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::log_growth_rate;
use crate::error::{Error, Result};
use crate::model::{DefaultLossModel, MarketParams};
use crate::rng::{CounterRng, Stream};
use crate::sum::mean_and_variance;

/// Outcome of a default-time draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefaultTime {
    At(f64),
    Never,
}

/// Inverse-CDF sample of an exponential default time: `-ln(u) / h`.
pub fn sample_default_time(h: f64, u: f64) -> Result<DefaultTime> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("uniform draw {u} outside (0, 1)")));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("hazard {h} must be non-negative")));
    }
    if h == 0.0 {
        return Ok(DefaultTime::Never);
    }
    Ok(DefaultTime::At(-u.ln() / h))
}

/// `log W_T` for constant weight `pi`, given the normal draw `z` and default time.
///
/// Without default before `T` this is `log w0 + a T + pi sigma sqrt(T) z`. With
/// default at `tau < T` the diffusion stops at `tau`, the log-loss is applied,
/// and cash earns `r` for the remaining `T - tau`.
pub fn simulate_terminal_log_wealth(
    params: &MarketParams,
    pi: f64,
    loss: DefaultLossModel,
    z: f64,
    tau: DefaultTime,
) -> Result<f64> {
    let loss_at_default = loss.log_loss(pi)?;
    let growth = log_growth_rate(params, pi);
    let log_w0 = params.w0.ln();
    let horizon = params.horizon;
    let scale = pi * params.sigma;
    Ok(match tau {
        DefaultTime::At(tau) if tau < horizon => {
            log_w0
                + growth * tau
                + scale * tau.sqrt() * z
                + loss_at_default
                + params.r * (horizon - tau)
        }
        _ => log_w0 + growth * horizon + scale * horizon.sqrt() * z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, seed: 0, antithetic: false }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_paths must be at least 2, got {}",
                self.n_paths
            )));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "antithetic sampling needs an even n_paths, got {}",
                self.n_paths
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Randomness of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PathDraw {
    tau: DefaultTime,
    z: f64,
}

/// Draws for every path. In antithetic mode paths `2k` and `2k + 1` share the
/// default time of counter `k` and use `z` and `-z`.
fn draw_paths(h: f64, cfg: &McConfig) -> Result<Vec<PathDraw>> {
    cfg.validate()?;
    let rng = CounterRng::new(cfg.seed);
    let draw = |k: u64| -> Result<PathDraw> {
        let tau = sample_default_time(h, rng.uniform(Stream::DefaultTime, k, 0))?;
        Ok(PathDraw { tau, z: rng.normal(Stream::Diffusion, k) })
    };
    if cfg.antithetic {
        let pairs: Vec<PathDraw> =
            (0..(cfg.n_paths / 2) as u64).into_par_iter().map(draw).collect::<Result<_>>()?;
        Ok(pairs
            .into_iter()
            .flat_map(|d| [d, PathDraw { z: -d.z, ..d }])
            .collect())
    } else {
        (0..cfg.n_paths as u64).into_par_iter().map(draw).collect()
    }
}

fn estimate_from_draws(
    params: &MarketParams,
    pi: f64,
    loss: DefaultLossModel,
    cfg: &McConfig,
    draws: &[PathDraw],
) -> Result<McEstimate> {
    let samples: Vec<f64> = draws
        .par_iter()
        .map(|d| simulate_terminal_log_wealth(params, pi, loss, d.z, d.tau))
        .collect::<Result<_>>()?;
    let (mean, std_error) = if cfg.antithetic {
        // pairs are the independent units
        let pair_means: Vec<f64> = samples.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let (_, var) = mean_and_variance(&pair_means);
        let (mean, _) = mean_and_variance(&samples);
        (mean, (var / pair_means.len() as f64).sqrt())
    } else {
        let (mean, var) = mean_and_variance(&samples);
        (mean, (var / samples.len() as f64).sqrt())
    };
    if !mean.is_finite() {
        return Err(Error::Numerical("Monte Carlo mean is not finite".into()));
    }
    Ok(McEstimate { mean, std_error, n_paths: cfg.n_paths, seed: cfg.seed })
}

/// Estimates `E[log W_T]` under constant weight `pi`.
pub fn estimate(
    params: &MarketParams,
    pi: f64,
    loss: DefaultLossModel,
    cfg: &McConfig,
) -> Result<McEstimate> {
    params.validate()?;
    loss.log_loss(pi)?;
    let draws = draw_paths(params.h, cfg)?;
    estimate_from_draws(params, pi, loss, cfg, &draws)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<(f64, McEstimate)>,
    /// Index of the largest mean; the smallest `pi` wins ties.
    pub argmax: usize,
}

/// Estimates every weight in `pi_grid` from one shared set of paths.
pub fn sweep(
    params: &MarketParams,
    loss: DefaultLossModel,
    pi_grid: &[f64],
    cfg: &McConfig,
) -> Result<SweepResult> {
    params.validate()?;
    if pi_grid.is_empty() {
        return Err(Error::InvalidConfig("pi grid is empty".into()));
    }
    if pi_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("pi grid must be strictly increasing".into()));
    }
    let draws = draw_paths(params.h, cfg)?;
    let points = pi_grid
        .iter()
        .map(|&pi| Ok((pi, estimate_from_draws(params, pi, loss, cfg, &draws)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut argmax = 0;
    for (i, (_, est)) in points.iter().enumerate() {
        if est.mean > points[argmax].1.mean {
            argmax = i;
        }
    }
    Ok(SweepResult { points, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{expected_log_utility_exact, optimal_weight};

    fn acceptance_params() -> MarketParams {
        MarketParams::new(0.08, 0.2, 0.02, 0.02, 1.0, 1.0).unwrap()
    }

    #[test]
    fn default_time_sampling() {
        assert_eq!(sample_default_time(0.0, 0.3).unwrap(), DefaultTime::Never);
        let DefaultTime::At(tau) = sample_default_time(1.0, (-1.0f64).exp()).unwrap() else {
            panic!()
        };
        assert!((tau - 1.0).abs() < 1e-15);
        for u in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(sample_default_time(0.5, u), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn default_probability_matches_exponential_cdf() {
        let rng = CounterRng::new(11);
        let n = 1_000_000u64;
        let hits = (0..n)
            .filter(|&i| {
                matches!(
                    sample_default_time(0.02, rng.uniform(Stream::DefaultTime, i, 0)).unwrap(),
                    DefaultTime::At(t) if t <= 1.0
                )
            })
            .count() as f64;
        let p = 1.0 - (-0.02f64).exp();
        let stderr = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() <= 3.0 * stderr);
    }

    #[test]
    fn zero_allocation_is_deterministic_cash() {
        let p = acceptance_params();
        for tau in [DefaultTime::Never, DefaultTime::At(0.5)] {
            for loss in [DefaultLossModel::Exponential, DefaultLossModel::Linear] {
                let v = simulate_terminal_log_wealth(&p, 0.0, loss, 1.7, tau).unwrap();
                assert!((v - 0.02).abs() < 1e-17);
            }
        }
        let no_hazard = MarketParams { h: 0.0, ..p };
        let est = estimate(&no_hazard, 0.0, DefaultLossModel::Exponential, &McConfig::default())
            .unwrap();
        assert_eq!(est.mean, p.w0.ln() + p.r * p.horizon);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn linear_loss_rejects_full_allocation() {
        let p = acceptance_params();
        assert!(simulate_terminal_log_wealth(&p, 1.0, DefaultLossModel::Linear, 0.0, DefaultTime::Never)
            .is_err());
        assert!(estimate(&p, 1.2, DefaultLossModel::Linear, &McConfig::default()).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let p = acceptance_params();
        let one = McConfig { n_paths: 1, ..McConfig::default() };
        assert!(estimate(&p, 1.0, DefaultLossModel::Exponential, &one).is_err());
        let odd = McConfig { n_paths: 11, antithetic: true, seed: 0 };
        assert!(estimate(&p, 1.0, DefaultLossModel::Exponential, &odd).is_err());
        assert!(sweep(&p, DefaultLossModel::Exponential, &[], &McConfig::default()).is_err());
        assert!(sweep(&p, DefaultLossModel::Exponential, &[1.0, 0.5], &McConfig::default()).is_err());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = acceptance_params();
        let cfg = McConfig { n_paths: 20_000, seed: 99, antithetic: false };
        let a = estimate(&p, 1.0, DefaultLossModel::Exponential, &cfg).unwrap();
        let b = estimate(&p, 1.0, DefaultLossModel::Exponential, &cfg).unwrap();
        assert_eq!(a, b);
        let c = estimate(&p, 1.0, DefaultLossModel::Exponential, &McConfig { seed: 100, ..cfg })
            .unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn mean_matches_exact_oracle() {
        let p = acceptance_params();
        let cfg = McConfig { n_paths: 1_000_000, seed: 2024, antithetic: false };
        let est = estimate(&p, 1.0, DefaultLossModel::Exponential, &cfg).unwrap();
        let exact = expected_log_utility_exact(&p, 1.0, DefaultLossModel::Exponential).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
    }

    #[test]
    fn antithetic_reduces_standard_error() {
        let p = acceptance_params();
        let plain = McConfig { n_paths: 100_000, seed: 5, antithetic: false };
        let anti = McConfig { antithetic: true, ..plain };
        for pi in [0.5, 1.0, 2.0] {
            let a = estimate(&p, pi, DefaultLossModel::Exponential, &plain).unwrap();
            let b = estimate(&p, pi, DefaultLossModel::Exponential, &anti).unwrap();
            assert!(b.std_error < a.std_error, "pi {pi}: {b:?} vs {a:?}");
        }
    }

    #[test]
    fn standard_error_follows_square_root_law() {
        let p = acceptance_params();
        let small = McConfig { n_paths: 25_000, seed: 17, antithetic: false };
        let large = McConfig { n_paths: 100_000, ..small };
        let a = estimate(&p, 1.0, DefaultLossModel::Exponential, &small).unwrap();
        let b = estimate(&p, 1.0, DefaultLossModel::Exponential, &large).unwrap();
        let ratio = a.std_error / b.std_error;
        assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
    }

    #[test]
    fn consistency_across_independent_seeds() {
        let p = acceptance_params();
        let exact = expected_log_utility_exact(&p, 1.0, DefaultLossModel::Exponential).unwrap();
        let inside = (0..100u64)
            .filter(|&seed| {
                let cfg = McConfig { n_paths: 10_000, seed, antithetic: false };
                let est = estimate(&p, 1.0, DefaultLossModel::Exponential, &cfg).unwrap();
                (est.mean - exact).abs() <= 4.0 * est.std_error
            })
            .count();
        assert!(inside >= 99, "{inside} of 100 within 4 standard errors");
    }

    #[test]
    fn sweep_locates_optimum() {
        let grid: Vec<f64> = (0..=60).map(|i| i as f64 * 0.05).collect();
        let cfg = McConfig { n_paths: 100_000, seed: 1, antithetic: false };
        for h in [0.0, 0.02] {
            let p = MarketParams { h, ..acceptance_params() };
            let res = sweep(&p, DefaultLossModel::Exponential, &grid, &cfg).unwrap();
            let best = res.points[res.argmax].0;
            assert!((best - optimal_weight(&p)).abs() <= 0.1 + 1e-12, "h {h}: {best}");
            let other = sweep(&p, DefaultLossModel::Exponential, &grid, &McConfig { seed: 2, ..cfg })
                .unwrap();
            assert!(res.argmax.abs_diff(other.argmax) <= 1);
        }
    }

    #[test]
    fn single_point_sweep() {
        let p = acceptance_params();
        let res = sweep(&p, DefaultLossModel::Exponential, &[0.7], &McConfig::default()).unwrap();
        assert_eq!(res.argmax, 0);
        assert_eq!(res.points.len(), 1);
    }

    #[test]
    fn independent_of_worker_count() {
        let p = acceptance_params();
        let cfg = McConfig { n_paths: 50_001, seed: 8, antithetic: false };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate(&p, 1.3, DefaultLossModel::Exponential, &cfg).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }
}
