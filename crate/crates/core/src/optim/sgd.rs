use crate::error::{invalid, Result};
use crate::objective::{Batch, Objective};
use crate::param::ParamVector;

/// SGD with decoupled weight decay in the intrinsic-LR parameterization:
/// `w ← (1 − λ_e)w − η(∇L(w; B) + ξ)`.
///
/// Only `η` and `λ_e = ηλ` are stored; the classic factor `λ` never enters
/// the update.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdWd {
    eta: f64,
    lambda_e: f64,
    pub step: usize,
}

pub(crate) fn check_lr(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid(format!("learning rate must be positive and finite, got {eta}")));
    }
    Ok(())
}

pub(crate) fn check_intrinsic(lambda_e: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda_e) {
        return Err(invalid(format!("intrinsic LR must lie in [0, 1), got {lambda_e}")));
    }
    Ok(())
}

impl SgdWd {
    pub fn new(eta: f64, lambda_e: f64) -> Result<Self> {
        check_lr(eta)?;
        check_intrinsic(lambda_e)?;
        Ok(SgdWd {
            eta,
            lambda_e,
            step: 0,
        })
    }

    /// From a learning rate and a classic weight-decay factor.
    pub fn from_lr_wd(eta: f64, lambda: f64) -> Result<Self> {
        SgdWd::new(eta, eta * lambda)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda_e(&self) -> f64 {
        self.lambda_e
    }

    pub fn set_hyper(&mut self, eta: f64, lambda_e: f64) -> Result<()> {
        check_lr(eta)?;
        check_intrinsic(lambda_e)?;
        self.eta = eta;
        self.lambda_e = lambda_e;
        Ok(())
    }

    /// Applies the update with an already computed gradient.
    pub fn apply(&mut self, w: &ParamVector, grad: &ParamVector, noise: Option<&ParamVector>) -> Result<ParamVector> {
        let mut next = w.scaled(1.0 - self.lambda_e);
        next.axpy(-self.eta, grad)?;
        if let Some(xi) = noise {
            next.axpy(-self.eta, xi)?;
        }
        self.step += 1;
        Ok(next)
    }

    pub fn step<O: Objective + ?Sized>(
        &mut self,
        obj: &O,
        w: &ParamVector,
        batch: &Batch,
        noise: Option<&ParamVector>,
    ) -> Result<ParamVector> {
        w.checked_norm()?;
        let g = obj.grad(w, batch)?;
        self.apply(w, &g, noise)
    }
}
