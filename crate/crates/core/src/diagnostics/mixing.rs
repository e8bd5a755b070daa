use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{run_trial, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::models::Dataset;
use crate::objective::{Classifier, RandomInit};
use crate::schedule::schedule_at;
use crate::stats;

/// Recovery is declared at the first step from which the series stays within
/// `±tol` of its pre-perturbation trailing mean for `dwell` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingCriterion {
    pub tol: f64,
    /// Length of the pre-perturbation averaging window, in steps.
    pub trailing: usize,
    pub dwell: usize,
}

impl Default for MixingCriterion {
    fn default() -> Self {
        MixingCriterion {
            tol: 0.05,
            trailing: 1000,
            dwell: 100,
        }
    }
}

/// Steps from `perturb` until `values` re-enters and stays in the band, or
/// `None` if that never happens with a full dwell window inside the record.
pub fn recovery_steps(steps: &[usize], values: &[f64], perturb: usize, crit: &MixingCriterion) -> Result<Option<usize>> {
    if steps.len() != values.len() {
        return Err(invalid("steps and values must pair up"));
    }
    let start = perturb.saturating_sub(crit.trailing);
    let before: Vec<f64> = steps
        .iter()
        .zip(values)
        .filter(|(&s, _)| s >= start && s < perturb)
        .map(|(_, &v)| v)
        .collect();
    if before.is_empty() {
        return Err(invalid("no recorded values before the perturbation"));
    }
    let reference = stats::mean(&before);
    let inside = |v: f64| (v / reference - 1.0).abs() <= crit.tol;
    let last = *steps.last().expect("non-empty");
    let first = steps.partition_point(|&s| s < perturb);
    let mut i = first;
    while i < steps.len() {
        if steps[i] + crit.dwell > last {
            return Ok(None);
        }
        let end = steps.partition_point(|&s| s <= steps[i] + crit.dwell);
        match (i..end).find(|&j| !inside(values[j])) {
            None => return Ok(Some(steps[i] - perturb)),
            Some(bad) => i = bad + 1,
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingResult {
    /// Perturbation factor `c` (η ÷ c, λ × c).
    pub factor: f64,
    pub per_trial: Vec<Option<usize>>,
    /// Mean over the trials that recovered.
    pub mean_trial: Option<f64>,
    /// Recovery of the ensemble-mean effective-LR curve.
    pub ensemble_curve: Option<usize>,
    pub recovered_fraction: f64,
}

/// Runs the ensemble and measures how long the effective LR takes to return
/// to its pre-perturbation level after a `λ_e`-preserving perturbation at
/// `perturb_step`.
pub fn measure_mixing_time<C>(
    spec: &EnsembleSpec,
    obj: &C,
    test: Option<&Dataset>,
    perturb_step: usize,
    crit: &MixingCriterion,
) -> Result<MixingResult>
where
    C: Classifier + RandomInit + ?Sized,
{
    spec.validate()?;
    if perturb_step == 0 || perturb_step >= spec.total_steps {
        return Err(invalid("perturbation must fall strictly inside the run"));
    }
    let before = schedule_at(&spec.schedule, perturb_step - 1)?;
    let after = schedule_at(&spec.schedule, perturb_step)?;
    if (after.lambda_e - before.lambda_e).abs() > 1e-12 * before.lambda_e.abs() {
        return Err(Error::Schedule(format!(
            "perturbation at step {perturb_step} changes λ_e from {} to {}",
            before.lambda_e, after.lambda_e
        )));
    }
    let factor = before.eta / after.eta;
    let records: Vec<_> = (0..spec.n_trials)
        .into_par_iter()
        .map(|i| run_trial(spec, obj, test, i))
        .collect::<Result<_>>()?;
    let steps = records[0].steps();
    let mut per_trial = Vec::with_capacity(records.len());
    let mut curve = vec![0.0; steps.len()];
    for rec in &records {
        let eff = rec.eff_lr();
        per_trial.push(recovery_steps(&steps, &eff, perturb_step, crit)?);
        for (c, v) in curve.iter_mut().zip(&eff) {
            *c += v / records.len() as f64;
        }
    }
    let recovered: Vec<f64> = per_trial.iter().flatten().map(|&s| s as f64).collect();
    Ok(MixingResult {
        factor,
        mean_trial: (!recovered.is_empty()).then(|| stats::mean(&recovered)),
        recovered_fraction: recovered.len() as f64 / per_trial.len() as f64,
        ensemble_curve: recovery_steps(&steps, &curve, perturb_step, crit)?,
        per_trial,
    })
}
