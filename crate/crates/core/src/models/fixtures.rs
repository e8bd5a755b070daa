//! Objectives that deliberately break scale-invariance. Test fixtures only:
//! they exist as negative controls for the invariance suite.

use crate::error::Result;
use crate::objective::{Batch, Objective};
use crate::param::ParamVector;

/// `w ↦ ‖w‖²/2`. NOT scale-invariant.
#[derive(Debug, Clone, Copy)]
pub struct HalfSquaredNorm {
    pub dim: usize,
}

impl Objective for HalfSquaredNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_samples(&self) -> usize {
        1
    }

    fn loss(&self, w: &ParamVector, _batch: &Batch) -> Result<f64> {
        w.check_dim(self.dim)?;
        Ok(0.5 * w.norm_sq())
    }

    fn grad(&self, w: &ParamVector, _batch: &Batch) -> Result<ParamVector> {
        w.check_dim(self.dim)?;
        Ok(w.clone())
    }

    fn name(&self) -> String {
        "fixture-half-squared-norm".to_string()
    }
}
