//! The two-parameter loss `L(x, y) = x² / (x² + y²)`.

use crate::error::{Error, Result};
use crate::objective::{Batch, Objective};
use crate::param::{ParamVector, ORIGIN_GUARD};

/// Evaluates the toy loss and its gradient at `(x, y)`.
pub fn toy_loss_eval(x: f64, y: f64) -> Result<(f64, [f64; 2])> {
    let r2 = x * x + y * y;
    if !(r2.sqrt() > ORIGIN_GUARD) {
        return Err(Error::Origin { norm: r2.sqrt() });
    }
    let loss = x * x / r2;
    let r4 = r2 * r2;
    Ok((loss, [2.0 * x * y * y / r4, -2.0 * x * x * y / r4]))
}

/// Full-batch only: any batch evaluates the same deterministic loss.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToyLoss2D;

impl ToyLoss2D {
    fn eval(&self, w: &ParamVector) -> Result<(f64, [f64; 2])> {
        w.check_dim(2)?;
        toy_loss_eval(w[0], w[1])
    }
}

impl Objective for ToyLoss2D {
    fn dim(&self) -> usize {
        2
    }

    fn n_samples(&self) -> usize {
        1
    }

    fn loss(&self, w: &ParamVector, _batch: &Batch) -> Result<f64> {
        Ok(self.eval(w)?.0)
    }

    fn grad(&self, w: &ParamVector, _batch: &Batch) -> Result<ParamVector> {
        Ok(ParamVector::new(self.eval(w)?.1.to_vec()))
    }

    fn name(&self) -> String {
        "toy".to_string()
    }
}
