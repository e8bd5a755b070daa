use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Check, Report};
use crate::error::Result;
use crate::rng;
use crate::sde::{norm_ode_integrate, stationary_norm_sq, two_phase_norm_time};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderingConfig {
    pub draws: usize,
    pub sigma2: f64,
    /// Convergence band on `γ` relative to its stationary value.
    pub tol: f64,
    /// RK4 step in units of `1/(4Kηλ)`.
    pub ode_step: f64,
    /// Minimum of `ρ/(10K)` for the drawn initial norms.
    pub min_excess: f64,
    pub seed: u64,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        OrderingConfig {
            draws: 10,
            sigma2: 1.0,
            tol: 0.05,
            ode_step: 0.02,
            min_excess: 1.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingDraw {
    pub g0: f64,
    pub eta: f64,
    pub lambda: f64,
    pub k: f64,
    /// Initial `γ` over its stationary value at `η`.
    pub rho: f64,
    pub predicted_direct: f64,
    pub predicted_two_phase: f64,
    pub measured_direct: f64,
    pub measured_two_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub draws: Vec<OrderingDraw>,
    pub checks: Vec<Check>,
}

impl Report for OrderingReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Time for the norm ODE at `(η, ηλ)` to bring `γ` within `tol` of its
/// stationary value, starting from `g0`. Returns the time and final `G`.
fn settle(g0: f64, eta: f64, lambda: f64, sigma2: f64, tol: f64, step_units: f64) -> Result<(f64, f64)> {
    let le = eta * lambda;
    let g_star = stationary_norm_sq(eta, le, sigma2)?;
    // γ ∝ G², so a band of ±tol on γ is ±√(1 ± tol) on G.
    let (lo, hi) = (g_star * (1.0 - tol).sqrt(), g_star * (1.0 + tol).sqrt());
    let dt = step_units / (4.0 * le);
    let mut t0 = 0.0;
    let mut g = g0;
    let chunk = 4.0 / le;
    loop {
        let traj = norm_ode_integrate(g, eta, le, &|_| sigma2, chunk, dt)?;
        if let Some(k) = traj.y.iter().position(|&y| y >= lo && y <= hi) {
            return Ok((t0 + traj.t[k], traj.y[k]));
        }
        t0 += chunk;
        g = traj.last();
        if t0 > 1e4 / le {
            return Ok((f64::INFINITY, g));
        }
    }
}

/// Draws `(η, λ, K, G₀)` with `ρ > 10K` and compares ODE-measured
/// norm-convergence times of direct training and a `K`-times-larger warm
/// phase, alongside the predicted times.
pub fn run_ordering(cfg: &OrderingConfig) -> Result<OrderingReport> {
    let mut r = rng::stream(cfg.seed, "ordering", 0);
    let mut draws = Vec::new();
    for _ in 0..cfg.draws {
        let eta = 10f64.powf(r.random_range(-2.0..-0.5));
        let lambda = 10f64.powf(r.random_range(-3.0..-1.5));
        let k = 10f64.powf(r.random_range(0.3..1.3));
        let min_rho = 10.0 * k * cfg.min_excess;
        let rho = min_rho * 10f64.powf(r.random_range(0.0..4.0));
        let gamma_star = cfg.sigma2 / (2.0 * eta * lambda);
        let g0 = eta * (rho * gamma_star).sqrt();
        let pred = two_phase_norm_time(g0, eta, lambda, k, cfg.sigma2)?;
        let (direct, _) = settle(g0, eta, lambda, cfg.sigma2, cfg.tol, cfg.ode_step)?;
        let (t1, g1) = settle(g0, k * eta, lambda, cfg.sigma2, cfg.tol, cfg.ode_step)?;
        let (t2, _) = settle(g1, eta, lambda, cfg.sigma2, cfg.tol, cfg.ode_step)?;
        draws.push(OrderingDraw {
            g0,
            eta,
            lambda,
            k,
            rho,
            predicted_direct: pred.direct,
            predicted_two_phase: pred.two_phase,
            measured_direct: direct,
            measured_two_phase: t1 + t2,
        });
    }
    let measured_ok = draws.iter().filter(|d| d.measured_two_phase < d.measured_direct).count();
    let predicted_ok = draws.iter().filter(|d| d.predicted_two_phase < d.predicted_direct).count();
    let n = draws.len() as f64;
    let checks = vec![
        Check::at_least("measured-two-phase-faster", measured_ok as f64, n),
        Check::at_least("predicted-two-phase-faster", predicted_ok as f64, n),
    ];
    Ok(OrderingReport { draws, checks })
}
