//! Two-phase training: equilibrate at a chosen intrinsic LR, then drop the
//! learning rate, switch weight decay off, and train towards zero loss.

use serde::{Deserialize, Serialize};

use super::HyperParams;
use crate::diagnostics::{Metrics, RecordRow, TrajectoryRecord, Trainer};
use crate::error::{invalid, Result};
use crate::objective::{BatchSampler, Classifier};
use crate::optim::OptimizerKind;
use crate::param::ParamVector;
use crate::rng;
use crate::stats::mean;

/// An optional first stretch at `factor` times the learning rate (weight
/// decay factor unchanged, so `λ_e` is multiplied by `factor` too), ended by
/// the same norm-convergence test as phase 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmPhase {
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseSpec {
    pub eta: f64,
    /// Phase-1 intrinsic LR; `0` skips phase 1.
    pub lambda_e: f64,
    pub lr_drop: f64,
    /// Convergence window in steps; defaults to `⌈1/(4λ_e)⌉`.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Step budget for phase 1, warm phase included.
    pub max_phase1_steps: usize,
    #[serde(default = "default_loss_threshold")]
    pub loss_threshold: f64,
    pub max_phase2_steps: usize,
    pub batch: BatchSampler,
    /// Full-metric rows every this many steps; norms are recorded every step.
    pub record_every: usize,
    #[serde(default)]
    pub warm: Option<WarmPhase>,
}

fn default_tau() -> f64 {
    0.01
}

fn default_loss_threshold() -> f64 {
    1e-3
}

impl TwoPhaseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !(self.lambda_e >= 0.0) || !(self.lambda_e < 1.0) {
            return Err(invalid("two-phase needs η > 0 and 0 ≤ λ_e < 1"));
        }
        if !(self.lr_drop >= 1.0) {
            return Err(invalid(format!("lr_drop must be at least 1, got {}", self.lr_drop)));
        }
        if !(self.tau > 0.0) {
            return Err(invalid("τ must be positive"));
        }
        if self.window.is_some_and(|w| w < 2) {
            return Err(invalid("convergence window must be at least 2 steps"));
        }
        if self.record_every == 0 {
            return Err(invalid("record cadence must be at least one step"));
        }
        if let Some(w) = self.warm {
            if !(w.factor >= 1.0) || !(self.lambda_e * w.factor < 1.0) {
                return Err(invalid("warm factor must be ≥ 1 and keep λ_e below 1"));
            }
        }
        Ok(())
    }

    /// Window covering `1/(4λ_e)` steps at the given intrinsic LR.
    pub fn window_for(&self, lambda_e: f64) -> usize {
        self.window
            .unwrap_or_else(|| (1.0 / (4.0 * lambda_e)).ceil() as usize)
            .max(2)
    }
}

/// Compares the means of the last two `window`-step blocks of `norms`.
pub fn norm_converged(norms: &[f64], window: usize, tau: f64) -> bool {
    if window == 0 || norms.len() < 2 * window {
        return false;
    }
    let n = norms.len();
    let prev = mean(&norms[n - 2 * window..n - window]);
    let last = mean(&norms[n - window..]);
    ((last - prev) / prev).abs() < tau
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPhaseResult {
    pub phase1: TrajectoryRecord,
    pub phase2: TrajectoryRecord,
    /// First step trained with the phase-2 hyperparameters.
    pub transition_step: usize,
    /// False when phase 1 hit its step budget before the norm converged.
    pub phase1_converged: bool,
    /// Steps spent in the warm phase (0 without one).
    pub warm_steps: usize,
    pub phase2_reached_threshold: bool,
    pub final_w: ParamVector,
}

struct Recorder {
    every: usize,
}

impl Recorder {
    fn row<C: Classifier + ?Sized>(&self, t: &Trainer<'_, C>) -> Result<RecordRow> {
        t.row(if t.step % self.every == 0 { Metrics::Full } else { Metrics::NormOnly })
    }
}

/// Runs both phases from `w0`; batches come from the stream
/// `(seed, "two-phase", 0)`.
pub fn run_two_phase<C: Classifier + ?Sized>(
    spec: &TwoPhaseSpec,
    obj: &C,
    kind: OptimizerKind,
    w0: ParamVector,
    seed: u64,
) -> Result<TwoPhaseResult> {
    spec.validate()?;
    let mut rng = rng::stream(seed, "two-phase", 0);
    let rec = Recorder {
        every: spec.record_every,
    };
    let base = HyperParams {
        eta: spec.eta,
        lambda: spec.lambda_e / spec.eta,
        lambda_e: spec.lambda_e,
    };
    let mut trainer = Trainer::new(obj, None, kind, spec.batch, w0, base)?;
    let mut phase1 = TrajectoryRecord::new();
    let mut warm_steps = 0;
    let mut converged = spec.lambda_e == 0.0;

    if !converged {
        let mut stages = Vec::new();
        if let Some(w) = spec.warm {
            stages.push(HyperParams {
                eta: base.eta * w.factor,
                lambda: base.lambda,
                lambda_e: base.lambda_e * w.factor,
            });
        }
        stages.push(base);
        let last_stage = stages.len() - 1;
        for (i, hp) in stages.into_iter().enumerate() {
            trainer.set_hyper(hp)?;
            let window = spec.window_for(hp.lambda_e);
            let mut norms = vec![trainer.w.norm_sq()];
            let mut done = false;
            while trainer.step < spec.max_phase1_steps {
                phase1.push(rec.row(&trainer)?)?;
                trainer.advance(&mut rng)?;
                norms.push(trainer.w.norm_sq());
                if norm_converged(&norms, window, spec.tau) {
                    done = true;
                    break;
                }
            }
            if i < last_stage {
                warm_steps = trainer.step;
            } else {
                converged = done;
            }
        }
    }

    let transition_step = trainer.step;
    trainer.set_hyper(HyperParams {
        eta: spec.eta / spec.lr_drop,
        lambda: 0.0,
        lambda_e: 0.0,
    })?;
    let mut phase2 = TrajectoryRecord::new();
    let mut reached = false;
    for k in 0..=spec.max_phase2_steps {
        let mut row = rec.row(&trainer)?;
        let loss = match row.train_loss {
            Some(l) => l,
            None => trainer.train_loss()?,
        };
        if loss <= spec.loss_threshold {
            reached = true;
        }
        if (reached || k == spec.max_phase2_steps) && row.train_acc.is_none() {
            row = trainer.row(Metrics::Full)?;
        }
        phase2.push(row)?;
        if reached || k == spec.max_phase2_steps {
            break;
        }
        trainer.advance(&mut rng)?;
    }
    Ok(TwoPhaseResult {
        phase1,
        phase2,
        transition_step,
        phase1_converged: converged,
        warm_steps,
        phase2_reached_threshold: reached,
        final_w: trainer.w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_gaussian_mixture, make_radial_mlp, Activation, MlpSpec};
    use std::sync::Arc;

    #[test]
    fn convergence_detector() {
        let flat = vec![2.0; 10];
        assert!(norm_converged(&flat, 5, 0.01));
        assert!(!norm_converged(&flat, 6, 0.01));
        let decaying: Vec<f64> = (0..10).map(|i| 0.8f64.powi(i)).collect();
        assert!(!norm_converged(&decaying, 5, 0.01));
    }

    fn spec() -> TwoPhaseSpec {
        TwoPhaseSpec {
            eta: 0.5,
            lambda_e: 0.02,
            lr_drop: 10.0,
            window: None,
            tau: 0.01,
            max_phase1_steps: 3000,
            loss_threshold: 1e-3,
            max_phase2_steps: 300,
            batch: BatchSampler::new(10),
            record_every: 50,
            warm: None,
        }
    }

    #[test]
    fn linear_model_on_separable_data() {
        let data = Arc::new(make_gaussian_mixture(80, 2, 2, 6.0, 3).unwrap());
        let (model, w0) =
            make_radial_mlp(MlpSpec::new(vec![2, 2], Activation::Tanh).with_gain(4.0), data, 3).unwrap();
        let out = run_two_phase(&spec(), &model, OptimizerKind::Sgd, w0, 1).unwrap();
        assert!(out.phase1_converged);
        let last = out.phase2.last_row().unwrap();
        assert_eq!(last.train_acc, Some(1.0));
        let norms = out.phase2.norm_sq();
        for pair in norms.windows(2) {
            assert!(pair[1] >= pair[0] * (1.0 - 1e-13));
        }
        assert_eq!(out.phase2.rows[0].step, out.transition_step);
    }

    #[test]
    fn degenerate_single_phase() {
        let data = Arc::new(make_gaussian_mixture(40, 2, 2, 6.0, 4).unwrap());
        let (model, w0) = make_radial_mlp(MlpSpec::new(vec![2, 2], Activation::Tanh), data, 4).unwrap();
        let mut s = spec();
        s.lambda_e = 0.0;
        s.lr_drop = 1.0;
        s.max_phase2_steps = 20;
        let out = run_two_phase(&s, &model, OptimizerKind::Sgd, w0, 1).unwrap();
        assert_eq!(out.transition_step, 0);
        assert!(out.phase1.rows.is_empty());
        assert_eq!(out.phase2.rows[0].eta, 0.5);
    }

    #[test]
    fn deterministic() {
        let data = Arc::new(make_gaussian_mixture(40, 2, 3, 2.0, 5).unwrap());
        let (model, w0) = make_radial_mlp(MlpSpec::new(vec![2, 4, 3], Activation::Tanh), data, 5).unwrap();
        let mut s = spec();
        s.max_phase1_steps = 200;
        s.max_phase2_steps = 50;
        let a = run_two_phase(&s, &model, OptimizerKind::Sgd, w0.clone(), 9).unwrap();
        let b = run_two_phase(&s, &model, OptimizerKind::Sgd, w0, 9).unwrap();
        assert_eq!(a, b);
    }
}
