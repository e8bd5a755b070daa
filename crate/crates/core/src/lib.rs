//! Simulation and diagnostics for training scale-invariant networks with
//! normalization and weight decay.
//!
//! The crate covers the loss primitives and models, the discrete optimizers
//! and their continuous-time counterpart, hyperparameter schedules, and the
//! diagnostics used to compare trained ensembles.

pub mod diagnostics;
pub mod error;
pub mod invariance;
pub mod models;
pub mod noise;
pub mod objective;
pub mod optim;
pub mod protocols;
pub mod param;
pub mod rng;
pub mod schedule;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use objective::{Batch, BatchSampler, Classifier, Objective, RandomInit, Sampling};
pub use param::ParamVector;
