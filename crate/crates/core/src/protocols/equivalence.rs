use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Check, DataSpec, Report};
use crate::error::Result;
use crate::models::{make_radial_mlp, Activation, MlpSpec, RadialMlp};
use crate::objective::{Batch, BatchSampler, Objective};
use crate::optim::{function_space_distance, AdamWState, ExpLr, MomentumState, SgdWd};
use crate::param::ParamVector;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub data: DataSpec,
    pub widths: Vec<usize>,
    pub eta: f64,
    pub lambda_e: f64,
    pub exp_lr_steps: usize,
    pub adamw_steps: usize,
    pub adamw_alpha: f64,
    pub adamw_lambda: f64,
    pub adamw_scales: Vec<f64>,
    pub momentum_steps: usize,
    pub beta: f64,
    pub momentum_scales: Vec<f64>,
    pub batch_size: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig {
            data: DataSpec {
                n: 60,
                features: 2,
                classes: 3,
                separation: 2.0,
                seed: 11,
            },
            widths: vec![2, 8, 3],
            eta: 0.1,
            lambda_e: 0.01,
            exp_lr_steps: 500,
            adamw_steps: 300,
            adamw_alpha: 1e-2,
            adamw_lambda: 0.05,
            adamw_scales: vec![10.0, 0.1],
            momentum_steps: 500,
            beta: 0.9,
            momentum_scales: vec![4.0, 0.25],
            batch_size: 8,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// Largest `‖w̄^exp_t − w̄^wd_t‖` over the run.
    pub exp_lr_direction: f64,
    /// Largest relative error of `‖w^exp_t‖/‖w^wd_t‖` against
    /// `√(1 − λ_e)(1 − λ_e)^{−t}`.
    pub exp_lr_norm_ratio: f64,
    pub exp_lr_logit_distance: f64,
    pub exp_lr_renormalizations: usize,
    /// Per scale factor `C`: largest direction difference.
    pub adamw_direction: Vec<(f64, f64)>,
    pub momentum_direction: Vec<(f64, f64)>,
    pub checks: Vec<Check>,
}

impl Report for EquivalenceReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

fn direction_gap(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    a.direction()?.distance(&b.direction()?)
}

fn batches(model: &RadialMlp, cfg: &EquivalenceConfig, steps: usize) -> Result<Vec<Batch>> {
    let mut rng = rng::stream(cfg.seed, "equivalence-batches", 0);
    let sampler = BatchSampler::new(cfg.batch_size);
    (0..steps).map(|_| sampler.sample(model.n_samples(), &mut rng)).collect()
}

/// Runs the three optimizer-equivalence comparisons on one shared batch
/// sequence.
pub fn run_equivalence(cfg: &EquivalenceConfig) -> Result<EquivalenceReport> {
    let data = Arc::new(cfg.data.build()?);
    let (model, w0) = make_radial_mlp(MlpSpec::new(cfg.widths.clone(), Activation::Tanh), data.clone(), cfg.seed)?;
    let longest = cfg.exp_lr_steps.max(cfg.adamw_steps).max(cfg.momentum_steps);
    let seq = batches(&model, cfg, longest)?;

    // Exp-LR against SGD with weight decay.
    let mut sgd = SgdWd::new(cfg.eta, cfg.lambda_e)?;
    let mut exp = ExpLr::new(cfg.eta, cfg.lambda_e)?;
    let mut a = w0.clone();
    let mut b = exp.matching_init(&w0);
    let mut exp_dir = direction_gap(&a, &b)?;
    let mut exp_ratio = 0.0f64;
    let decay = 1.0 - cfg.lambda_e;
    for (t, batch) in seq.iter().take(cfg.exp_lr_steps).enumerate() {
        a = sgd.step(&model, &a, batch, None)?;
        b = exp.step(&model, &b, batch)?;
        exp_dir = exp_dir.max(direction_gap(&a, &b)?);
        if exp.renormalizations == 0 {
            let expect = decay.sqrt() * decay.powi(-((t + 1) as i32));
            exp_ratio = exp_ratio.max((b.norm() / a.norm() / expect - 1.0).abs());
        }
    }
    let logit = function_space_distance(&model, &a, &b, data.inputs())?.max_logit_distance;

    // AdamW with (θ₀, α) against (Cθ₀, Cα), ε = 0.
    let mut adamw_direction = Vec::new();
    for &c in &cfg.adamw_scales {
        let dim = model.dim();
        let mut s1 = AdamWState::new(cfg.adamw_alpha, 0.9, 0.999, 0.0, cfg.adamw_lambda, cfg.eta, dim)?;
        let mut s2 = AdamWState::new(c * cfg.adamw_alpha, 0.9, 0.999, 0.0, cfg.adamw_lambda, cfg.eta, dim)?;
        let mut x = w0.clone();
        let mut y = w0.scaled(c);
        let mut worst = direction_gap(&x, &y)?;
        for batch in seq.iter().take(cfg.adamw_steps) {
            x = s1.step(&model, &x, batch)?;
            y = s2.step(&model, &y, batch)?;
            worst = worst.max(direction_gap(&x, &y)?);
        }
        adamw_direction.push((c, worst));
    }

    // Momentum with (η, w₀, λ) against (Cη, √C·w₀, λ/C).
    let mut momentum_direction = Vec::new();
    let lambda = cfg.lambda_e / cfg.eta;
    for &c in &cfg.momentum_scales {
        let dim = model.dim();
        let mut m1 = MomentumState::new(cfg.beta, cfg.eta, lambda, dim)?;
        let mut m2 = MomentumState::new(cfg.beta, c * cfg.eta, lambda / c, dim)?;
        let mut x = w0.clone();
        let mut y = w0.scaled(c.sqrt());
        let mut worst = direction_gap(&x, &y)?;
        for batch in seq.iter().take(cfg.momentum_steps) {
            x = m1.step(&model, &x, batch)?;
            y = m2.step(&model, &y, batch)?;
            worst = worst.max(direction_gap(&x, &y)?);
        }
        momentum_direction.push((c, worst));
    }

    let mut checks = vec![
        Check::at_most("exp-lr/direction", exp_dir, cfg.tol),
        Check::at_most("exp-lr/norm-ratio", exp_ratio, 1e-6),
        Check::at_most("exp-lr/logit-distance", logit, cfg.tol),
    ];
    for &(c, d) in &adamw_direction {
        checks.push(Check::at_most(format!("adamw/C={c}"), d, cfg.tol));
    }
    for &(c, d) in &momentum_direction {
        checks.push(Check::at_most(format!("momentum/C={c}"), d, cfg.tol));
    }
    Ok(EquivalenceReport {
        exp_lr_direction: exp_dir,
        exp_lr_norm_ratio: exp_ratio,
        exp_lr_logit_distance: logit,
        exp_lr_renormalizations: exp.renormalizations,
        adamw_direction,
        momentum_direction,
        checks,
    })
}
