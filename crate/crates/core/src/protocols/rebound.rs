use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, Report};
use crate::error::Result;
use crate::models::ToyLoss2D;
use crate::param::ParamVector;
use crate::rng::{self, SimRng};
use crate::sde::{em_step_weight_sde, stationary_effective_lr, stationary_norm_sq, NoiseMode, SdeConfig};
use crate::stats::mean_stderr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReboundConfig {
    pub eta: f64,
    pub lambda: f64,
    pub sigma2: f64,
    pub lr_drop: f64,
    pub trials: usize,
    /// Settling and averaging windows, in units of the post-drop `1/(4λ_e)`.
    pub settle: f64,
    pub average: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ReboundConfig {
    fn default() -> Self {
        ReboundConfig {
            eta: 0.1,
            lambda: 0.1,
            sigma2: 1.0,
            lr_drop: 10.0,
            trials: 40,
            settle: 5.0,
            average: 3.0,
            tol: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReboundReport {
    pub eff_lr_before: f64,
    pub eff_lr_instant_after: f64,
    pub eff_lr_after: f64,
    pub stderr_after: f64,
    pub ratio: f64,
    pub expected_ratio: f64,
    pub instant_ratio: f64,
    pub checks: Vec<Check>,
}

impl Report for ReboundReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Advances `steps` EM steps and returns the time-averaged `η/G`.
fn run_window(cfg: &SdeConfig, w: &mut ParamVector, steps: usize, rng: &mut SimRng) -> Result<f64> {
    let mut acc = 0.0;
    for _ in 0..steps {
        *w = em_step_weight_sde(cfg, &ToyLoss2D, w, rng)?.w;
        acc += cfg.eta / w.norm_sq();
    }
    Ok(acc / steps.max(1) as f64)
}

/// Step Decay in constant-trace SDE mode: the effective LR drops by the full
/// factor at the decay and then rebounds to `1/√factor` of its old value.
pub fn run_rebound(cfg: &ReboundConfig) -> Result<ReboundReport> {
    let noise = NoiseMode::ConstantTrace { sigma2: cfg.sigma2 };
    let eta_after = cfg.eta / cfg.lr_drop;
    let before = SdeConfig::with_default_dt(cfg.eta, cfg.eta * cfg.lambda, noise)?;
    let after = SdeConfig::with_default_dt(eta_after, eta_after * cfg.lambda, noise)?;
    let unit_time = 1.0 / (4.0 * after.lambda_e);
    let steps_after = |units: f64| (units * unit_time / after.dt).round() as usize;
    let steps_before = |units: f64| (units / (4.0 * before.lambda_e) / before.dt).round() as usize;
    let g_star = stationary_norm_sq(cfg.eta, before.lambda_e, cfg.sigma2)?;

    let per_trial: Vec<(f64, f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(cfg.seed, "rebound", i as u64);
            let mut w = ParamVector::new(vec![0.6, 0.8]).scaled(g_star.sqrt());
            run_window(&before, &mut w, steps_before(2.0), &mut r)?;
            let pre = run_window(&before, &mut w, steps_before(cfg.average), &mut r)?;
            let instant = eta_after / w.norm_sq();
            run_window(&after, &mut w, steps_after(cfg.settle), &mut r)?;
            let post = run_window(&after, &mut w, steps_after(cfg.average), &mut r)?;
            Ok((pre, instant, post))
        })
        .collect::<Result<_>>()?;
    let (pre, _) = mean_stderr(&per_trial.iter().map(|t| t.0).collect::<Vec<_>>());
    let (instant, _) = mean_stderr(&per_trial.iter().map(|t| t.1).collect::<Vec<_>>());
    let (post, stderr_after) = mean_stderr(&per_trial.iter().map(|t| t.2).collect::<Vec<_>>());
    let expected_ratio = stationary_effective_lr(after.lambda_e, cfg.sigma2)?
        / stationary_effective_lr(before.lambda_e, cfg.sigma2)?;
    let ratio = post / pre;
    let instant_ratio = instant / pre;
    let checks = vec![
        Check::at_most("rebound-ratio-relative-error", (ratio / expected_ratio - 1.0).abs(), cfg.tol),
        Check::at_most(
            "instant-ratio-relative-error",
            (instant_ratio * cfg.lr_drop - 1.0).abs(),
            cfg.tol,
        ),
    ];
    Ok(ReboundReport {
        eff_lr_before: pre,
        eff_lr_instant_after: instant,
        eff_lr_after: post,
        stderr_after,
        ratio,
        expected_ratio,
        instant_ratio,
        checks,
    })
}
