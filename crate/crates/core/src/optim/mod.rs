//! Discrete update rules and function-space comparison.

mod adamw;
mod exp_lr;
mod momentum;
mod sgd;

pub use adamw::AdamWState;
pub use exp_lr::{ExpLr, EXP_LR_OVERFLOW};
pub use momentum::MomentumState;
pub use sgd::SgdWd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::argmax;
use crate::objective::Classifier;
use crate::param::ParamVector;

/// Update rule used by trial runners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Momentum {
        beta: f64,
    },
}

pub fn direction(w: &ParamVector) -> Result<ParamVector> {
    w.direction()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionSpaceDistance {
    /// Largest Euclidean distance between logit vectors over the probes.
    pub max_logit_distance: f64,
    /// Fraction of probes whose predicted class differs.
    pub argmax_disagreement: f64,
}

/// Compares two parameter vectors through the outputs they induce. Logits are
/// computed from directions, so the comparison is scale-free.
pub fn function_space_distance<C: Classifier + ?Sized>(
    obj: &C,
    w1: &ParamVector,
    w2: &ParamVector,
    probes: &[Vec<f64>],
) -> Result<FunctionSpaceDistance> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("need at least one probe".into()));
    }
    let mut max_d = 0.0f64;
    let mut differ = 0usize;
    for x in probes {
        let a = obj.logits(w1, x)?;
        let b = obj.logits(w2, x)?;
        let d = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        max_d = max_d.max(d);
        if argmax(&a) != argmax(&b) {
            differ += 1;
        }
    }
    Ok(FunctionSpaceDistance {
        max_logit_distance: max_d,
        argmax_disagreement: differ as f64 / probes.len() as f64,
    })
}
