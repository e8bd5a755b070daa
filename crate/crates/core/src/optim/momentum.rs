use crate::error::{invalid, Result};
use crate::objective::{Batch, Objective};
use crate::param::ParamVector;

use super::sgd::check_lr;

/// Heavy-ball SGD with coupled weight decay:
/// `v ← βv + (∇L(w; B) + λw)`, `w ← w − ηv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub beta: f64,
    pub velocity: ParamVector,
    pub eta: f64,
    pub lambda: f64,
    pub step: usize,
}

impl MomentumState {
    pub fn new(beta: f64, eta: f64, lambda: f64, dim: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(invalid(format!("momentum must lie in [0, 1), got {beta}")));
        }
        check_lr(eta)?;
        if !(lambda >= 0.0) {
            return Err(invalid(format!("weight decay must be non-negative, got {lambda}")));
        }
        Ok(MomentumState {
            beta,
            velocity: ParamVector::zeros(dim),
            eta,
            lambda,
            step: 0,
        })
    }

    pub fn lambda_e(&self) -> f64 {
        self.eta * self.lambda
    }

    pub fn apply(&mut self, w: &ParamVector, grad: &ParamVector) -> Result<ParamVector> {
        let mut v = self.velocity.scaled(self.beta);
        v.axpy(1.0, grad)?;
        v.axpy(self.lambda, w)?;
        let mut next = w.clone();
        next.axpy(-self.eta, &v)?;
        self.velocity = v;
        self.step += 1;
        Ok(next)
    }

    pub fn step<O: Objective + ?Sized>(&mut self, obj: &O, w: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        w.checked_norm()?;
        self.velocity.check_dim(w.dim())?;
        let g = obj.grad(w, batch)?;
        self.apply(w, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ToyLoss2D;
    use crate::optim::SgdWd;

    #[test]
    fn zero_momentum_matches_sgd_wd() {
        let obj = ToyLoss2D;
        let batch = obj.full_batch().unwrap();
        let (eta, lambda) = (0.1, 0.3);
        let mut mom = MomentumState::new(0.0, eta, lambda, 2).unwrap();
        let mut sgd = SgdWd::new(eta, eta * lambda).unwrap();
        let mut a = ParamVector::new(vec![0.4, 1.1]);
        let mut b = a.clone();
        for _ in 0..20 {
            a = mom.step(&obj, &a, &batch).unwrap();
            b = sgd.step(&obj, &b, &batch, None).unwrap();
        }
        assert!(a.sub(&b).unwrap().norm() < 1e-14 * b.norm());
    }

    #[test]
    fn flat_start_without_decay_stays_put() {
        let obj = ToyLoss2D;
        let mut mom = MomentumState::new(0.9, 0.1, 0.0, 2).unwrap();
        let w = ParamVector::new(vec![0.0, 3.0]);
        let next = mom.step(&obj, &w, &obj.full_batch().unwrap()).unwrap();
        assert_eq!(next, w);
    }

    #[test]
    fn invalid_momentum() {
        assert!(MomentumState::new(1.0, 0.1, 0.0, 2).is_err());
        assert!(MomentumState::new(0.5, 0.1, -1.0, 2).is_err());
    }
}
