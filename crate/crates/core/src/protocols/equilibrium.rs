use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Check, DataSpec, Report};
use crate::diagnostics::{
    mean_tv_distance, multinomial_tv_floor, run_ensemble, tv_baseline, EnsembleSpec, InitSpec, Metrics,
    PredictionHistogram, RecordPlan, TrajectoryRecord,
};
use crate::error::{invalid, Error, Result};
use crate::models::{predict_class, Dataset, MlpSpec, RadialMlp};
use crate::objective::BatchSampler;
use crate::optim::OptimizerKind;
use crate::rng;
use crate::schedule::{Schedule, ScheduleEvent, Target};

/// Two ensembles with different early histories that share `(η, λ)` from
/// step `history_steps` on, compared by their prediction histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumConfig {
    /// Generated once; the first `train_size` points train, the rest are probes.
    pub data: DataSpec,
    pub train_size: usize,
    pub model: MlpSpec,
    pub eta: f64,
    pub lambda: f64,
    pub batch: BatchSampler,
    /// Trials per compared ensemble.
    pub trials: usize,
    pub history_steps: usize,
    /// Multiplies η (and hence λ_e) of ensemble B during its history.
    pub history_lr_factor: f64,
    pub init_scale_a: f64,
    pub init_scale_b: f64,
    /// Steps after the switch, in units of `1/λ_e`.
    pub measure_after: f64,
    pub fine_tune_steps: usize,
    pub fine_tune_lr_drop: f64,
    /// Random partitions of ensemble A averaged into the split-half floor.
    pub floor_splits: usize,
    pub floor_factor: f64,
    pub seed: u64,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig {
            data: DataSpec {
                n: 500,
                features: 2,
                classes: 3,
                separation: 2.0,
                seed: 21,
            },
            train_size: 200,
            model: MlpSpec::new(vec![2, 8, 3], crate::models::Activation::Tanh).with_gain(8.0),
            eta: 0.1,
            lambda: 0.1,
            batch: BatchSampler::new(16),
            trials: 200,
            history_steps: 500,
            history_lr_factor: 5.0,
            init_scale_a: 1.0,
            init_scale_b: 3.0,
            measure_after: 10.0,
            fine_tune_steps: 200,
            fine_tune_lr_drop: 10.0,
            floor_splits: 100,
            floor_factor: 2.0,
            seed: 0,
        }
    }
}

/// TV between the compared ensembles and the split-half control at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvComparison {
    pub step: usize,
    /// Ensemble A (first half) against ensemble B.
    pub tv: f64,
    /// Mean TV between two same-spec halves of ensemble A, each as large as
    /// B, over random partitions of A.
    pub split_half_floor: f64,
    /// Simulated TV of two multinomial samples from the pooled frequencies.
    pub multinomial_floor: f64,
    pub baseline: f64,
    pub error_a: f64,
    pub error_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub lambda_e: f64,
    pub at_switch: TvComparison,
    pub at_equilibrium: TvComparison,
    pub after_fine_tune: TvComparison,
    pub checks: Vec<Check>,
}

impl Report for EquilibriumReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

fn split(data: &Dataset, train: usize) -> Result<(Dataset, Dataset)> {
    if train == 0 || train >= data.len() {
        return Err(invalid("train_size must leave both a training set and probes"));
    }
    let part = |r: std::ops::Range<usize>| {
        Dataset::new(
            data.inputs()[r.clone()].to_vec(),
            data.labels()[r].to_vec(),
            data.num_classes(),
        )
    };
    Ok((part(0..train)?, part(train..data.len())?))
}

fn mean_error(h: &PredictionHistogram, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| 1.0 - h.frequencies(i)[y])
        .sum::<f64>()
        / labels.len() as f64
}

/// Predicted class of every trial on every probe at `step`.
fn predictions(model: &RadialMlp, probes: &Dataset, records: &[TrajectoryRecord], step: usize) -> Result<Vec<Vec<usize>>> {
    records
        .iter()
        .enumerate()
        .map(|(trial, rec)| {
            let w = rec.snapshot(step).ok_or(Error::MissingSnapshot { trial, step })?;
            probes.inputs().iter().map(|x| predict_class(model, w, x)).collect()
        })
        .collect()
}

fn histogram(probes: &Dataset, preds: &[Vec<usize>], trials: &[usize]) -> Result<PredictionHistogram> {
    let mut counts = vec![vec![0u64; probes.num_classes()]; probes.len()];
    for &t in trials {
        for (c, &k) in counts.iter_mut().zip(&preds[t]) {
            c[k] += 1;
        }
    }
    PredictionHistogram::from_counts(probes.inputs().to_vec(), counts)
}

fn compare(
    model: &RadialMlp,
    probes: &Dataset,
    a: &[TrajectoryRecord],
    b: &[TrajectoryRecord],
    step: usize,
    splits: usize,
    seed: u64,
) -> Result<TvComparison> {
    let n = b.len();
    let pa = predictions(model, probes, a, step)?;
    let pb = predictions(model, probes, b, step)?;
    let a1 = histogram(probes, &pa, &(0..n).collect::<Vec<_>>())?;
    let hb = histogram(probes, &pb, &(0..n).collect::<Vec<_>>())?;

    let mut rng = rng::stream(seed, "equilibrium/splits", step as u64);
    let mut order: Vec<usize> = (0..a.len()).collect();
    let mut floor = 0.0;
    for _ in 0..splits {
        order.shuffle(&mut rng);
        let h1 = histogram(probes, &pa, &order[..n])?;
        let h2 = histogram(probes, &pa, &order[n..2 * n])?;
        floor += mean_tv_distance(&h1, &h2)? / splits as f64;
    }

    let all: Vec<usize> = (0..a.len()).collect();
    let pooled = histogram(probes, &pa, &all)?.merge(&hb)?;
    let p: Vec<Vec<f64>> = (0..probes.len()).map(|i| pooled.frequencies(i)).collect();
    Ok(TvComparison {
        step,
        tv: mean_tv_distance(&a1, &hb)?,
        split_half_floor: floor,
        multinomial_floor: multinomial_tv_floor(&p, n, n, 200, seed)?,
        baseline: tv_baseline(&a1, &hb, probes.labels())?,
        error_a: mean_error(&a1, probes.labels()),
        error_b: mean_error(&hb, probes.labels()),
    })
}

/// Weak form at `s + measure_after/λ_e`, then the strong form after a shared
/// fine-tune at `η/fine_tune_lr_drop` without weight decay.
pub fn run_equilibrium_tv(cfg: &EquilibriumConfig) -> Result<EquilibriumReport> {
    if !(cfg.eta > 0.0) || !(cfg.lambda > 0.0) || cfg.trials < 2 || cfg.floor_splits == 0 {
        return Err(invalid("equilibrium protocol needs η, λ > 0, two trials and one floor split"));
    }
    let lambda_e = cfg.eta * cfg.lambda;
    let (train, probes) = split(&cfg.data.build()?, cfg.train_size)?;
    let model = RadialMlp::new(cfg.model.clone(), Arc::new(train))?;

    let s = cfg.history_steps;
    let t_eq = s + (cfg.measure_after / lambda_e).round() as usize;
    let t_ft = t_eq + cfg.fine_tune_steps;
    let fine_tune = [
        ScheduleEvent::set(t_eq, Target::Eta, cfg.eta / cfg.fine_tune_lr_drop),
        ScheduleEvent::set(t_eq, Target::Lambda, 0.0),
    ];
    let schedule_a = Schedule::new(cfg.eta, cfg.lambda, fine_tune.to_vec())?;
    let mut events_b = vec![ScheduleEvent::set(s, Target::Eta, cfg.eta)];
    events_b.extend(fine_tune);
    let schedule_b = Schedule::new(cfg.eta * cfg.history_lr_factor, cfg.lambda, events_b)?;

    let spec = |n_trials, scale, schedule, tag: &str| EnsembleSpec {
        n_trials,
        init: InitSpec::Random { scale },
        schedule,
        optimizer: OptimizerKind::Sgd,
        batch: cfg.batch,
        total_steps: t_ft,
        record: RecordPlan {
            every: t_ft,
            metrics: Metrics::NormOnly,
            snapshots: vec![s, t_eq, t_ft],
        },
        seed: cfg.seed,
        tag: tag.to_string(),
    };
    let a = run_ensemble(&spec(2 * cfg.trials, cfg.init_scale_a, schedule_a, "equilibrium/a"), &model, None)?;
    let b = run_ensemble(&spec(cfg.trials, cfg.init_scale_b, schedule_b, "equilibrium/b"), &model, None)?;

    let at_switch = compare(&model, &probes, &a, &b, s, cfg.floor_splits, cfg.seed)?;
    let at_equilibrium = compare(&model, &probes, &a, &b, t_eq, cfg.floor_splits, cfg.seed)?;
    let after_fine_tune = compare(&model, &probes, &a, &b, t_ft, cfg.floor_splits, cfg.seed)?;
    let checks = vec![
        // The histories must differ measurably at the switch, or the
        // comparison below has no power.
        Check::at_least(
            "histories-differ-at-switch",
            at_switch.tv,
            cfg.floor_factor * at_switch.split_half_floor,
        ),
        Check::at_most(
            "weak-form-tv-vs-floor",
            at_equilibrium.tv,
            cfg.floor_factor * at_equilibrium.split_half_floor,
        ),
        Check::at_most("weak-form-tv-vs-baseline", at_equilibrium.tv, at_equilibrium.baseline),
        Check::at_most(
            "strong-form-tv-vs-floor",
            after_fine_tune.tv,
            cfg.floor_factor * after_fine_tune.split_half_floor,
        ),
    ];
    Ok(EquilibriumReport {
        lambda_e,
        at_switch,
        at_equilibrium,
        after_fine_tune,
        checks,
    })
}
