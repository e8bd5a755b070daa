use crate::error::{invalid, Result};
use crate::objective::{Batch, Objective};
use crate::param::ParamVector;

/// Adam with decoupled weight decay:
///
/// ```text
/// t ← t + 1
/// m ← β₁m + (1 − β₁)g,  v ← β₂v + (1 − β₂)g²
/// m̂ = m/(1 − β₁ᵗ),     v̂ = v/(1 − β₂ᵗ)
/// θ ← θ − η_t(α m̂/(√v̂ + ε) + λθ)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lambda: f64,
    /// Schedule multiplier `η_t`.
    pub eta: f64,
    pub m: ParamVector,
    pub v: ParamVector,
    pub t: usize,
}

impl AdamWState {
    pub fn new(alpha: f64, beta1: f64, beta2: f64, epsilon: f64, lambda: f64, eta: f64, dim: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(invalid("moment decay rates must lie in [0, 1)"));
        }
        if !(epsilon >= 0.0) || !(lambda >= 0.0) {
            return Err(invalid("epsilon and weight decay must be non-negative"));
        }
        Ok(AdamWState {
            alpha,
            beta1,
            beta2,
            epsilon,
            lambda,
            eta,
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            t: 0,
        })
    }

    /// Defaults `α = 1e-3, β₁ = 0.9, β₂ = 0.999, ε = 1e-8`.
    pub fn with_defaults(lambda: f64, eta: f64, dim: usize) -> Result<Self> {
        AdamWState::new(1e-3, 0.9, 0.999, 1e-8, lambda, eta, dim)
    }

    pub fn apply(&mut self, theta: &ParamVector, grad: &ParamVector) -> Result<ParamVector> {
        grad.check_dim(theta.dim())?;
        self.m.check_dim(theta.dim())?;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut next = theta.clone();
        for i in 0..theta.dim() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            let denom = v_hat.sqrt() + self.epsilon;
            // 0/0 only when the whole gradient history of this coordinate is 0.
            let adaptive = if denom == 0.0 { 0.0 } else { m_hat / denom };
            next[i] = theta[i] - self.eta * (self.alpha * adaptive + self.lambda * theta[i]);
        }
        Ok(next)
    }

    pub fn step<O: Objective + ?Sized>(&mut self, obj: &O, theta: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        theta.checked_norm()?;
        let g = obj.grad(theta, batch)?;
        self.apply(theta, &g)
    }
}
