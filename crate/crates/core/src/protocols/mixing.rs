use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Check, DataSpec, Report};
use crate::diagnostics::{measure_mixing_time, EnsembleSpec, InitSpec, Metrics, MixingCriterion, RecordPlan};
use crate::error::{invalid, Result};
use crate::models::{Activation, MlpSpec, RadialMlp};
use crate::objective::BatchSampler;
use crate::optim::OptimizerKind;
use crate::schedule::{Schedule, ScheduleEvent, Target};
use crate::sde::recovery_time_closed_form;
use crate::stats::{linear_fit, LinearFit};

/// Mixing time after `η ÷ c, λ × c` at several intrinsic LRs, fitted
/// against `1/λ_e`. Times below are in units of `1/λ_e` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingConfig {
    pub data: DataSpec,
    pub model: MlpSpec,
    pub eta: f64,
    pub lambda_e_grid: Vec<f64>,
    pub factor: f64,
    pub trials: usize,
    pub batch: BatchSampler,
    pub equilibrate: f64,
    pub cap: f64,
    pub record_every: f64,
    pub trailing: f64,
    pub dwell: f64,
    pub tol: f64,
    pub min_r2: f64,
    pub seed: u64,
}

impl Default for MixingConfig {
    fn default() -> Self {
        MixingConfig {
            data: DataSpec {
                n: 200,
                features: 2,
                classes: 3,
                separation: 2.0,
                seed: 21,
            },
            model: MlpSpec::new(vec![2, 8, 3], Activation::Tanh).with_gain(8.0),
            eta: 0.1,
            lambda_e_grid: vec![4e-4, 2e-4, 1e-4],
            factor: 10.0,
            trials: 20,
            batch: BatchSampler::new(16),
            equilibrate: 3.0,
            cap: 5.0,
            record_every: 0.01,
            trailing: 1.0,
            dwell: 0.1,
            tol: 0.05,
            min_r2: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingPoint {
    pub lambda_e: f64,
    /// Recovery of the ensemble-mean effective-LR curve, in steps.
    pub ensemble_steps: Option<usize>,
    /// Mean over the trials that recovered on their own.
    pub mean_trial_steps: Option<f64>,
    pub recovered_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub points: Vec<MixingPoint>,
    /// `steps = a + b/λ_e` over the points that recovered.
    pub fit: Option<LinearFit>,
    /// Slope predicted by the constant-trace closed form for the same band.
    pub closed_form_slope: f64,
    pub checks: Vec<Check>,
}

impl Report for MixingReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

pub fn run_mixing_time(cfg: &MixingConfig) -> Result<MixingReport> {
    if cfg.lambda_e_grid.iter().any(|&l| !(l > 0.0)) || !(cfg.factor > 0.0) {
        return Err(invalid("mixing protocol needs positive λ_e values and factor"));
    }
    let model = RadialMlp::new(cfg.model.clone(), Arc::new(cfg.data.build()?))?;
    let mut points = Vec::with_capacity(cfg.lambda_e_grid.len());
    for (k, &lambda_e) in cfg.lambda_e_grid.iter().enumerate() {
        let unit = 1.0 / lambda_e;
        let steps = |x: f64| ((x * unit).round() as usize).max(1);
        let perturb = steps(cfg.equilibrate);
        let lambda = lambda_e / cfg.eta;
        let schedule = Schedule::new(
            cfg.eta,
            lambda,
            vec![
                ScheduleEvent::scale(perturb, Target::Eta, 1.0 / cfg.factor),
                ScheduleEvent::scale(perturb, Target::Lambda, cfg.factor),
            ],
        )?;
        let spec = EnsembleSpec {
            n_trials: cfg.trials,
            init: InitSpec::Random { scale: 1.0 },
            schedule,
            optimizer: OptimizerKind::Sgd,
            batch: cfg.batch,
            total_steps: perturb + steps(cfg.cap),
            record: RecordPlan {
                every: steps(cfg.record_every),
                metrics: Metrics::NormOnly,
                snapshots: Vec::new(),
            },
            seed: cfg.seed,
            tag: format!("mixing/{k}"),
        };
        let crit = MixingCriterion {
            tol: cfg.tol,
            trailing: steps(cfg.trailing),
            dwell: steps(cfg.dwell),
        };
        let result = measure_mixing_time(&spec, &model, None, perturb, &crit)?;
        points.push(MixingPoint {
            lambda_e,
            ensemble_steps: result.ensemble_curve,
            mean_trial_steps: result.mean_trial,
            recovered_fraction: result.recovered_fraction,
        });
    }
    let recovered: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.ensemble_steps.map(|s| (1.0 / p.lambda_e, s as f64)))
        .collect();
    let all = recovered.len() == points.len();
    let fit = (recovered.len() >= 2).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = recovered.into_iter().unzip();
        linear_fit(&x, &y)
    });
    let checks = vec![
        Check::holds("all-ensembles-recovered", all),
        Check::at_least("fit-r2", fit.as_ref().map_or(f64::NAN, |f| f.r_squared), cfg.min_r2),
        Check::at_least("fit-slope", fit.as_ref().map_or(f64::NAN, |f| f.slope), 0.0),
    ];
    Ok(MixingReport {
        points,
        fit,
        closed_form_slope: recovery_time_closed_form(cfg.factor, 1.0, cfg.tol)?,
        checks,
    })
}
