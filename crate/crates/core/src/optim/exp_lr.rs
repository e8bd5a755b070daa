use std::borrow::Cow;

use crate::error::Result;
use crate::objective::{Batch, Objective};
use crate::param::ParamVector;

use super::sgd::{check_intrinsic, check_lr};

/// Multipliers above this trigger a joint renormalization of `w` and the
/// learning rate.
pub const EXP_LR_OVERFLOW: f64 = 1e100;

/// SGD without weight decay under the exponentially growing learning rate
/// `η_t = η(1 − λ_e)^{−2t}`.
///
/// Started from `√(1 − λ_e)·w₀`, the iterates are exactly
/// `√(1 − λ_e)(1 − λ_e)^{−t}` times the iterates of [`super::SgdWd`] started
/// from `w₀` with the same `(η, λ_e)` and batches, so the two runs coincide in
/// function space. See [`ExpLr::matching_init`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExpLr {
    eta: f64,
    lambda_e: f64,
    pub t: usize,
    multiplier: f64,
    /// Number of overflow renormalizations performed so far.
    pub renormalizations: usize,
}

impl ExpLr {
    pub fn new(eta: f64, lambda_e: f64) -> Result<Self> {
        check_lr(eta)?;
        check_intrinsic(lambda_e)?;
        Ok(ExpLr {
            eta,
            lambda_e,
            t: 0,
            multiplier: eta,
            renormalizations: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Starting point whose trajectory tracks SGD+WD started at `w0`.
    pub fn matching_init(&self, w0: &ParamVector) -> ParamVector {
        w0.scaled((1.0 - self.lambda_e).sqrt())
    }

    /// Learning rate used by the next step.
    pub fn current_lr(&self) -> f64 {
        self.multiplier
    }

    pub fn step<O: Objective + ?Sized>(&mut self, obj: &O, w: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        let norm = w.checked_norm()?;
        let mut base = Cow::Borrowed(w);
        if self.multiplier > EXP_LR_OVERFLOW || !self.multiplier.is_finite() {
            // Scaling w by 1/‖w‖ scales the gradient by ‖w‖; the LR must
            // shrink by ‖w‖² to keep the direction update unchanged.
            self.multiplier /= norm * norm;
            base = Cow::Owned(w.scaled(1.0 / norm));
            self.renormalizations += 1;
        }
        let g = obj.grad(&base, batch)?;
        let mut next = base.into_owned();
        next.axpy(-self.multiplier, &g)?;
        let decay = 1.0 - self.lambda_e;
        self.multiplier /= decay * decay;
        self.t += 1;
        Ok(next)
    }
}
