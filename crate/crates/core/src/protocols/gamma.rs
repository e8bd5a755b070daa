use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, Report};
use crate::error::Result;
use crate::models::ToyLoss2D;
use crate::param::ParamVector;
use crate::rng;
use crate::sde::{gamma_closed_form, gamma_ode_integrate, norm_ode_integrate, simulate, NoiseMode, SdeConfig};
use crate::stats::mean_stderr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    pub gamma0_grid: Vec<f64>,
    pub lambda_e_grid: Vec<f64>,
    pub sigma2: f64,
    /// Grid horizon in units of `1/(4λ_e)`.
    pub horizon: f64,
    /// RK4 step in units of `1/(4λ_e)`.
    pub ode_step: f64,
    pub trials: usize,
    pub eta: f64,
    pub lambda_e: f64,
    pub dt: f64,
    pub t_end: f64,
    pub checkpoints: usize,
    pub w0: Vec<f64>,
    pub seed: u64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            gamma0_grid: vec![0.5, 2.0, 10.0, 50.0, 200.0],
            lambda_e_grid: vec![1e-3, 3e-3, 1e-2, 3e-2, 0.1],
            sigma2: 1.0,
            horizon: 8.0,
            ode_step: 0.01,
            trials: 200,
            eta: 0.1,
            lambda_e: 0.5,
            dt: 2.5e-4,
            t_end: 4.0,
            checkpoints: 10,
            w0: vec![0.6, 0.8],
            seed: 0,
        }
    }
}

/// One checkpoint of the simulated ensemble against the norm ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaCheckpoint {
    pub t: f64,
    pub ode: f64,
    pub mean: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaReport {
    /// `(γ₀, λ_e, relative error)` at the end of each grid run.
    pub grid: Vec<(f64, f64, f64)>,
    pub max_grid_error: f64,
    pub checkpoints: Vec<GammaCheckpoint>,
    pub checks: Vec<Check>,
}

impl Report for GammaReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Compares RK4 against the closed form on a `(γ₀, λ_e)` grid, then an
/// Euler–Maruyama ensemble in constant-trace mode against the norm ODE.
pub fn run_gamma_check(cfg: &GammaConfig) -> Result<GammaReport> {
    let mut grid = Vec::new();
    for &g0 in &cfg.gamma0_grid {
        for &le in &cfg.lambda_e_grid {
            let unit = 1.0 / (4.0 * le);
            let traj = gamma_ode_integrate(g0, le, &|_| cfg.sigma2, cfg.horizon * unit, cfg.ode_step * unit)?;
            let mut worst = 0.0f64;
            for (&t, &y) in traj.t.iter().zip(&traj.y) {
                let exact = gamma_closed_form(g0, le, cfg.sigma2, t)?;
                worst = worst.max((y - exact).abs() / exact);
            }
            grid.push((g0, le, worst));
        }
    }
    let max_grid_error = grid.iter().map(|g| g.2).fold(0.0, f64::max);

    let sde = SdeConfig::new(cfg.dt, cfg.eta, cfg.lambda_e, NoiseMode::ConstantTrace { sigma2: cfg.sigma2 })?;
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let every = (steps / cfg.checkpoints).max(1);
    let w0 = ParamVector::new(cfg.w0.clone());
    let runs: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(cfg.seed, "gamma-em", i as u64);
            let traj = simulate(&sde, &ToyLoss2D, &w0, steps, every, 0.0, &mut r)?;
            Ok(traj.rows.iter().map(|row| row.g).collect())
        })
        .collect::<Result<_>>()?;
    let g0 = w0.norm_sq();
    let ode = norm_ode_integrate(g0, cfg.eta, cfg.lambda_e, &|_| cfg.sigma2, cfg.t_end, cfg.dt)?;
    let mut checkpoints = Vec::new();
    for k in 1..runs[0].len() {
        let t = (k * every).min(steps) as f64 * cfg.dt;
        let samples: Vec<f64> = runs.iter().map(|r| r[k]).collect();
        let (mean, stderr) = mean_stderr(&samples);
        let reference = ode.at(t);
        checkpoints.push(GammaCheckpoint {
            t,
            ode: reference,
            mean,
            stderr,
            z: (mean - reference).abs() / stderr,
        });
    }
    let max_z = checkpoints.iter().map(|c| c.z).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("closed-form-vs-rk4", max_grid_error, 1e-8),
        Check::at_most("em-ensemble-vs-norm-ode-z", max_z, 3.0),
        Check::at_least("checkpoints", checkpoints.len() as f64, cfg.checkpoints as f64),
    ];
    Ok(GammaReport {
        grid,
        max_grid_error,
        checkpoints,
        checks,
    })
}
