//! The scale-invariant objective contract and minibatch sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::param::ParamVector;

/// A set of sample indices into an objective's dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    indices: Vec<usize>,
}

impl Batch {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("batch must contain at least one index"));
        }
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::BatchOutOfBounds { index, n });
        }
        Ok(Batch { indices })
    }

    /// All indices `0..n` in order.
    pub fn full(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Batch {
            indices: (0..n).collect(),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Uniform random subset; a batch of size `n` is the full dataset.
    #[default]
    WithoutReplacement,
    /// `B` i.i.d. uniform draws; the noise covariance scales exactly as `1/B`.
    WithReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSampler {
    pub size: usize,
    #[serde(default)]
    pub sampling: Sampling,
}

impl BatchSampler {
    pub fn new(size: usize) -> Self {
        BatchSampler {
            size,
            sampling: Sampling::WithoutReplacement,
        }
    }

    pub fn with_replacement(size: usize) -> Self {
        BatchSampler {
            size,
            sampling: Sampling::WithReplacement,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if self.sampling == Sampling::WithoutReplacement && self.size > n {
            return Err(invalid(format!(
                "batch size {} exceeds dataset size {n}",
                self.size
            )));
        }
        Ok(())
    }

    /// Draws a batch. Indices are sorted so that a full-size draw without
    /// replacement reproduces `Batch::full` exactly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        self.validate(n)?;
        let mut indices = match self.sampling {
            Sampling::WithoutReplacement => {
                if self.size == n {
                    return Batch::full(n);
                }
                rand::seq::index::sample(rng, n, self.size).into_vec()
            }
            Sampling::WithReplacement => (0..self.size).map(|_| rng.random_range(0..n)).collect(),
        };
        indices.sort_unstable();
        Ok(Batch { indices })
    }
}

/// A loss that is invariant to positive rescaling of its parameters.
///
/// Implementations must satisfy `loss(αw) = loss(w)` for `α > 0`, which
/// forces `⟨grad(w), w⟩ = 0` and `grad(αw) = grad(w)/α`. Test fixtures
/// that break the contract say so in their docs.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of samples addressable by a [`Batch`].
    fn n_samples(&self) -> usize;

    fn loss(&self, w: &ParamVector, batch: &Batch) -> Result<f64>;

    fn grad(&self, w: &ParamVector, batch: &Batch) -> Result<ParamVector>;

    fn loss_and_grad(&self, w: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
        Ok((self.loss(w, batch)?, self.grad(w, batch)?))
    }

    fn full_batch(&self) -> Result<Batch> {
        Batch::full(self.n_samples())
    }

    fn full_loss(&self, w: &ParamVector) -> Result<f64> {
        self.loss(w, &self.full_batch()?)
    }

    fn full_grad(&self, w: &ParamVector) -> Result<ParamVector> {
        self.grad(w, &self.full_batch()?)
    }

    fn name(&self) -> String {
        "objective".to_string()
    }
}

/// An objective whose parameters define a classifier `F(w; x)`.
pub trait Classifier: Objective {
    fn num_classes(&self) -> usize;

    fn num_features(&self) -> usize;

    /// Pre-softmax logits `F(w; x)`, computed from the direction `w/‖w‖`.
    fn logits(&self, w: &ParamVector, x: &[f64]) -> Result<Vec<f64>>;

    /// Inputs and labels of the training set.
    fn train_data(&self) -> &crate::models::Dataset;
}

/// Objectives that know how to draw a random initialization.
pub trait RandomInit {
    /// A draw from the default initializer with every weight multiplied by
    /// `scale`.
    fn random_init(&self, scale: f64, rng: &mut crate::rng::SimRng) -> ParamVector;
}
