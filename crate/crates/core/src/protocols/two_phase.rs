use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Check, DataSpec, Report};
use crate::diagnostics::RecordRow;
use crate::error::Result;
use crate::models::{Activation, MlpSpec, RadialMlp};
use crate::objective::{BatchSampler, RandomInit};
use crate::optim::OptimizerKind;
use crate::rng;
use crate::schedule::{run_two_phase, TwoPhaseSpec, WarmPhase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoPhaseConfig {
    pub data: DataSpec,
    pub model: MlpSpec,
    pub spec: TwoPhaseSpec,
    pub min_train_acc: f64,
    /// Largest tolerated relative drop of `‖w‖²` between phase-2 steps.
    pub norm_drop_tol: f64,
    pub seed: u64,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        TwoPhaseConfig {
            data: DataSpec {
                n: 200,
                features: 2,
                classes: 3,
                separation: 3.0,
                seed: 3,
            },
            model: MlpSpec::new(vec![2, 8, 3], Activation::Tanh).with_gain(8.0),
            spec: TwoPhaseSpec {
                eta: 0.5,
                lambda_e: 0.05,
                lr_drop: 10.0,
                window: None,
                tau: 0.01,
                max_phase1_steps: 5000,
                loss_threshold: 1e-3,
                max_phase2_steps: 3000,
                batch: BatchSampler::new(10),
                record_every: 50,
                warm: None,
            },
            min_train_acc: 0.995,
            norm_drop_tol: 1e-12,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPhaseReport {
    pub transition_step: usize,
    pub phase1_converged: bool,
    pub phase2_steps: usize,
    /// Train accuracy at the last full-metric row of phase 1.
    pub phase1_train_acc: Option<f64>,
    pub final_train_acc: f64,
    pub final_train_loss: f64,
    pub max_norm_drop: f64,
    pub phase2_norm_sq: Vec<f64>,
    /// Rows of both phases that carry full metrics.
    pub history: Vec<RecordRow>,
    pub checks: Vec<Check>,
}

impl Report for TwoPhaseReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

pub fn run_two_phase_protocol(cfg: &TwoPhaseConfig) -> Result<TwoPhaseReport> {
    let data = Arc::new(cfg.data.build()?);
    let model = RadialMlp::new(cfg.model.clone(), data)?;
    let w0 = model.random_init(1.0, &mut rng::stream(cfg.seed, "init", 0));
    let out = run_two_phase(&cfg.spec, &model, OptimizerKind::Sgd, w0, cfg.seed)?;
    let last = out.phase2.last_row().expect("phase 2 records its first step");
    let norms = out.phase2.norm_sq();
    let max_norm_drop = norms
        .windows(2)
        .map(|p| (p[0] - p[1]) / p[0])
        .fold(0.0, f64::max);
    let final_train_acc = last.train_acc.unwrap_or(f64::NAN);
    let phase1_train_acc = out.phase1.rows.iter().rev().find_map(|r| r.train_acc);
    let checks = vec![
        Check::holds("phase2-trained", last.step > out.transition_step),
        Check::at_least("phase2-train-accuracy", final_train_acc, cfg.min_train_acc),
        Check::at_most("phase2-max-relative-norm-drop", max_norm_drop, cfg.norm_drop_tol),
    ];
    Ok(TwoPhaseReport {
        transition_step: out.transition_step,
        phase1_converged: out.phase1_converged,
        phase2_steps: last.step - out.transition_step,
        phase1_train_acc,
        final_train_acc,
        final_train_loss: last.train_loss.unwrap_or(f64::NAN),
        max_norm_drop,
        phase2_norm_sq: norms,
        history: out
            .phase1
            .rows
            .iter()
            .chain(&out.phase2.rows)
            .filter(|r| r.train_acc.is_some())
            .copied()
            .collect(),
        checks,
    })
}

/// Extreme initialization: the same phase-1 budget with and without a warm
/// stretch at a larger intrinsic LR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitScaleConfig {
    pub data: DataSpec,
    pub model: MlpSpec,
    pub init_scale: f64,
    pub eta: f64,
    pub lambda_e: f64,
    pub warm_factor: f64,
    pub max_phase1_steps: usize,
    pub batch: BatchSampler,
    pub seed: u64,
}

impl Default for InitScaleConfig {
    fn default() -> Self {
        InitScaleConfig {
            data: DataSpec {
                n: 120,
                features: 2,
                classes: 3,
                separation: 2.0,
                seed: 11,
            },
            model: MlpSpec::new(vec![2, 8, 3], Activation::Tanh),
            init_scale: 1000.0,
            eta: 0.1,
            lambda_e: 0.01,
            warm_factor: 10.0,
            max_phase1_steps: 500,
            batch: BatchSampler::new(16),
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitScaleReport {
    pub initial_norm_sq: f64,
    pub direct_converged: bool,
    pub direct_steps: usize,
    pub direct_final_norm_sq: f64,
    pub warm_converged: bool,
    pub warm_steps: usize,
    pub warm_total_steps: usize,
    pub warm_final_norm_sq: f64,
    pub checks: Vec<Check>,
}

impl Report for InitScaleReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

pub fn run_init_scale(cfg: &InitScaleConfig) -> Result<InitScaleReport> {
    let data = Arc::new(cfg.data.build()?);
    let model = RadialMlp::new(cfg.model.clone(), data)?;
    let w0 = model.random_init(cfg.init_scale, &mut rng::stream(cfg.seed, "init", 0));
    let spec = |warm: Option<WarmPhase>| TwoPhaseSpec {
        eta: cfg.eta,
        lambda_e: cfg.lambda_e,
        lr_drop: 1.0,
        window: None,
        tau: 0.01,
        max_phase1_steps: cfg.max_phase1_steps,
        loss_threshold: 0.0,
        max_phase2_steps: 0,
        batch: cfg.batch,
        record_every: cfg.max_phase1_steps.max(1),
        warm,
    };
    let direct = run_two_phase(&spec(None), &model, OptimizerKind::Sgd, w0.clone(), cfg.seed)?;
    let warm = run_two_phase(
        &spec(Some(WarmPhase {
            factor: cfg.warm_factor,
        })),
        &model,
        OptimizerKind::Sgd,
        w0.clone(),
        cfg.seed,
    )?;
    let checks = vec![
        Check::holds("direct-run-flagged-unconverged", !direct.phase1_converged),
        Check::holds("warm-run-converged", warm.phase1_converged),
    ];
    Ok(InitScaleReport {
        initial_norm_sq: w0.norm_sq(),
        direct_converged: direct.phase1_converged,
        direct_steps: direct.transition_step,
        direct_final_norm_sq: direct.final_w.norm_sq(),
        warm_converged: warm.phase1_converged,
        warm_steps: warm.warm_steps,
        warm_total_steps: warm.transition_step,
        warm_final_norm_sq: warm.final_w.norm_sq(),
        checks,
    })
}
