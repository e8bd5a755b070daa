use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{RecordRow, TrajectoryRecord};
use crate::error::{invalid, Result};
use crate::models::{accuracy, cross_entropy, Dataset};
use crate::objective::{BatchSampler, Classifier, RandomInit};
use crate::optim::{MomentumState, OptimizerKind, SgdWd};
use crate::param::ParamVector;
use crate::rng::{self, SimRng};
use crate::schedule::{HyperParams, Schedule, ScheduleCursor};

/// A single-owner optimizer state driven by scheduled `(η, λ)`.
#[derive(Debug, Clone)]
pub enum Stepper {
    Sgd(SgdWd),
    Momentum(MomentumState),
}

impl Stepper {
    pub fn new(kind: OptimizerKind, hp: HyperParams, dim: usize) -> Result<Self> {
        Ok(match kind {
            OptimizerKind::Sgd => Stepper::Sgd(SgdWd::new(hp.eta, hp.lambda_e)?),
            OptimizerKind::Momentum { beta } => Stepper::Momentum(MomentumState::new(beta, hp.eta, hp.lambda, dim)?),
        })
    }

    pub fn set_hyper(&mut self, hp: HyperParams) -> Result<()> {
        match self {
            Stepper::Sgd(s) => s.set_hyper(hp.eta, hp.lambda_e),
            Stepper::Momentum(m) => {
                m.eta = hp.eta;
                m.lambda = hp.lambda;
                Ok(())
            }
        }
    }

    pub fn step<C: Classifier + ?Sized>(
        &mut self,
        obj: &C,
        w: &ParamVector,
        batch: &crate::objective::Batch,
    ) -> Result<ParamVector> {
        match self {
            Stepper::Sgd(s) => s.step(obj, w, batch, None),
            Stepper::Momentum(m) => m.step(obj, w, batch),
        }
    }
}

/// Which measurements a recorded row carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metrics {
    /// Losses and accuracies on train (and test, when given) data.
    #[default]
    Full,
    /// Norm and effective LR only; cheap enough to record every step.
    NormOnly,
}

/// Minibatch training of one classifier under a schedule.
pub struct Trainer<'a, C: Classifier + ?Sized> {
    obj: &'a C,
    test: Option<&'a Dataset>,
    stepper: Stepper,
    sampler: BatchSampler,
    hp: HyperParams,
    pub w: ParamVector,
    pub step: usize,
}

impl<'a, C: Classifier + ?Sized> Trainer<'a, C> {
    pub fn new(
        obj: &'a C,
        test: Option<&'a Dataset>,
        kind: OptimizerKind,
        sampler: BatchSampler,
        w0: ParamVector,
        hp: HyperParams,
    ) -> Result<Self> {
        w0.check_dim(obj.dim())?;
        w0.checked_norm()?;
        sampler.validate(obj.n_samples())?;
        Ok(Trainer {
            obj,
            test,
            stepper: Stepper::new(kind, hp, obj.dim())?,
            sampler,
            hp,
            w: w0,
            step: 0,
        })
    }

    pub fn hyper(&self) -> HyperParams {
        self.hp
    }

    pub fn set_hyper(&mut self, hp: HyperParams) -> Result<()> {
        self.stepper.set_hyper(hp)?;
        self.hp = hp;
        Ok(())
    }

    /// One optimizer update on a freshly drawn batch.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let batch = self.sampler.sample(self.obj.n_samples(), rng)?;
        self.w = self.stepper.step(self.obj, &self.w, &batch)?;
        self.step += 1;
        Ok(())
    }

    pub fn train_loss(&self) -> Result<f64> {
        self.obj.full_loss(&self.w)
    }

    pub fn row(&self, metrics: Metrics) -> Result<RecordRow> {
        let mut row = RecordRow::norm_only(self.step, self.w.norm_sq(), self.hp.eta);
        if metrics == Metrics::Full {
            row.train_loss = Some(self.obj.full_loss(&self.w)?);
            row.train_acc = Some(accuracy(self.obj, &self.w, self.obj.train_data())?);
            if let Some(test) = self.test {
                row.test_loss = Some(cross_entropy(self.obj, &self.w, test)?);
                row.test_acc = Some(accuracy(self.obj, &self.w, test)?);
            }
        }
        Ok(row)
    }
}

/// How trial initializations are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitSpec {
    /// The objective's default random initializer times `scale`.
    Random { scale: f64 },
    /// The same vector for every trial.
    Fixed { w: Vec<f64> },
}

impl InitSpec {
    pub fn sample<C: RandomInit + ?Sized>(&self, obj: &C, rng: &mut SimRng) -> Result<ParamVector> {
        match self {
            InitSpec::Random { scale } => {
                if !(*scale > 0.0) {
                    return Err(invalid(format!("init scale must be positive, got {scale}")));
                }
                Ok(obj.random_init(*scale, rng))
            }
            InitSpec::Fixed { w } => Ok(ParamVector::new(w.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordPlan {
    /// Row cadence in steps; the first and last steps are always recorded.
    pub every: usize,
    #[serde(default)]
    pub metrics: Metrics,
    /// Steps at which the parameter vector is kept.
    #[serde(default)]
    pub snapshots: Vec<usize>,
}

/// An ensemble of independent trials sharing everything but their seeds.
///
/// Trial `i` draws its initialization from the stream
/// `(seed, "<tag>/init", i)` and its batches from `(seed, "<tag>/batches", i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_trials: usize,
    pub init: InitSpec,
    pub schedule: Schedule,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    pub batch: BatchSampler,
    pub total_steps: usize,
    pub record: RecordPlan,
    pub seed: u64,
    pub tag: String,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials < 2 {
            return Err(invalid("an ensemble needs at least two trials"));
        }
        if self.record.every == 0 {
            return Err(invalid("record cadence must be at least one step"));
        }
        self.schedule.validate()
    }

    pub fn trial_seeds(&self, index: usize) -> (u64, u64) {
        (
            rng::derive_seed(self.seed, &format!("{}/init", self.tag), index as u64),
            rng::derive_seed(self.seed, &format!("{}/batches", self.tag), index as u64),
        )
    }
}

/// Trains one trial; deterministic in `(spec, index)`.
pub fn run_trial<C>(spec: &EnsembleSpec, obj: &C, test: Option<&Dataset>, index: usize) -> Result<TrajectoryRecord>
where
    C: Classifier + RandomInit + ?Sized,
{
    spec.schedule.validate()?;
    if spec.record.every == 0 {
        return Err(invalid("record cadence must be at least one step"));
    }
    let (init_seed, batch_seed) = spec.trial_seeds(index);
    let w0 = spec.init.sample(obj, &mut rng::rng_from_seed(init_seed))?;
    let mut batches = rng::rng_from_seed(batch_seed);
    let mut cursor = ScheduleCursor::new(&spec.schedule)?;
    let mut trainer = Trainer::new(obj, test, spec.optimizer, spec.batch, w0, cursor.at(0)?)?;
    let snaps: BTreeSet<usize> = spec.record.snapshots.iter().copied().collect();
    let mut record = TrajectoryRecord::new();
    for step in 0..=spec.total_steps {
        trainer.set_hyper(cursor.at(step)?)?;
        if step % spec.record.every == 0 || step == spec.total_steps {
            record.push(trainer.row(spec.record.metrics)?)?;
        }
        if snaps.contains(&step) {
            record.snapshots.insert(step, trainer.w.clone());
        }
        if step < spec.total_steps {
            trainer.advance(&mut batches)?;
        }
    }
    Ok(record)
}

/// Runs all trials in parallel; results are in trial-index order.
pub fn run_ensemble<C>(spec: &EnsembleSpec, obj: &C, test: Option<&Dataset>) -> Result<Vec<TrajectoryRecord>>
where
    C: Classifier + RandomInit + ?Sized,
{
    spec.validate()?;
    (0..spec.n_trials)
        .into_par_iter()
        .map(|i| run_trial(spec, obj, test, i))
        .collect()
}
