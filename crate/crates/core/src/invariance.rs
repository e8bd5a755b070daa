//! Scale-invariance verification and finite-difference oracles.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::models::radial_gradient;
use crate::objective::{Batch, Objective};
use crate::param::ParamVector;
use crate::rng;

/// A raw base function `g`, used to build `f(w) = g(w/‖w‖)`. `g` itself need
/// not be scale-invariant.
pub trait BaseFunction {
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64]) -> Vec<f64>;
}

/// Central-difference gradient of `obj.loss(·, batch)`.
pub fn finite_diff_grad<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    batch: &Batch,
    h: f64,
) -> Result<ParamVector> {
    if !(h > 0.0) {
        return Err(invalid(format!("finite-difference step must be positive, got {h}")));
    }
    w.check_dim(obj.dim())?;
    let mut out = Vec::with_capacity(w.dim());
    let mut probe = w.clone();
    for i in 0..w.dim() {
        let x = w[i];
        probe[i] = x + h;
        let plus = obj.loss(&probe, batch)?;
        probe[i] = x - h;
        let minus = obj.loss(&probe, batch)?;
        probe[i] = x;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(ParamVector::new(out))
}

/// Default Hessian-vector step: `1e-4 · max(1, ‖w‖)`.
pub fn default_hvp_step(w: &ParamVector) -> f64 {
    1e-4 * w.norm().max(1.0)
}

/// `H(x)v` by central differences of `grad`, stepping a distance `h` along
/// `v/‖v‖`.
pub fn hvp_by_differences<F>(grad: F, x: &ParamVector, v: &ParamVector, h: f64) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> Result<ParamVector>,
{
    v.check_dim(x.dim())?;
    let vn = v.norm();
    if vn == 0.0 {
        return Ok(ParamVector::zeros(x.dim()));
    }
    let s = h / vn;
    let mut plus = x.clone();
    plus.axpy(s, v)?;
    let mut minus = x.clone();
    minus.axpy(-s, v)?;
    let mut out = grad(&plus)?.sub(&grad(&minus)?)?;
    out.scale_mut(1.0 / (2.0 * s));
    Ok(out)
}

/// Supremum deviations over the tested scale factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// `max |f(αw) − f(w)|`
    pub loss: f64,
    /// `max ‖α∇f(αw) − ∇f(w)‖ / ‖∇f(w)‖`
    pub grad_scaling: f64,
    /// `|⟨∇f(w), w⟩| / (‖∇f(w)‖‖w‖)`
    pub perpendicularity: f64,
    /// `max ‖α²H(αw)v − H(w)v‖ / ‖H(w)v‖`
    pub hessian_scaling: f64,
    /// `|f(w)|`, the scale for the loss tolerance.
    pub loss_scale: f64,
    pub tol: f64,
}

impl InvarianceReport {
    pub fn loss_ok(&self) -> bool {
        self.loss <= self.tol * (1.0 + self.loss_scale)
    }

    pub fn grad_scaling_ok(&self) -> bool {
        self.grad_scaling <= self.tol
    }

    pub fn perpendicularity_ok(&self) -> bool {
        self.perpendicularity <= self.tol
    }

    pub fn hessian_scaling_ok(&self) -> bool {
        self.hessian_scaling <= self.tol
    }

    pub fn passed(&self) -> bool {
        self.loss_ok() && self.grad_scaling_ok() && self.perpendicularity_ok() && self.hessian_scaling_ok()
    }

    /// Names of the checks that exceeded the tolerance.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.loss_ok() {
            out.push("loss-invariance");
        }
        if !self.grad_scaling_ok() {
            out.push("gradient-scaling");
        }
        if !self.perpendicularity_ok() {
            out.push("perpendicularity");
        }
        if !self.hessian_scaling_ok() {
            out.push("hessian-scaling");
        }
        out
    }
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Checks `f(αw) = f(w)`, `∇f(αw) = ∇f(w)/α`, `⟨∇f(w), w⟩ = 0` and
/// `∇²f(αw) = ∇²f(w)/α²` on the full batch.
///
/// Hessian-vector products use a step proportional to the norm of the point,
/// so that the difference stencils at `w` and `αw` are exact rescalings of
/// each other.
pub fn verify_scale_invariance<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    alphas: &[f64],
    tol: f64,
) -> Result<InvarianceReport> {
    let norm = w.checked_norm()?;
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0)) {
        return Err(invalid(format!("scale factors must be positive, got {a}")));
    }
    let batch = obj.full_batch()?;
    let f0 = obj.loss(w, &batch)?;
    let g0 = obj.grad(w, &batch)?;
    let g0n = g0.norm();

    let mut prng = rng::stream(0x5ca1e, "hvp-probe", w.dim() as u64);
    let v = ParamVector::new(
        (0..w.dim())
            .map(|_| rand::Rng::sample::<f64, _>(&mut prng, rand_distr::StandardNormal))
            .collect(),
    );
    let grad_fn = |x: &ParamVector| obj.grad(x, &batch);
    let h0 = hvp_by_differences(grad_fn, w, &v, 1e-4 * norm)?;
    let h0n = h0.norm();

    let mut report = InvarianceReport {
        loss: 0.0,
        grad_scaling: 0.0,
        perpendicularity: relative(g0.dot(w)?.abs(), g0n * norm),
        hessian_scaling: 0.0,
        loss_scale: f0.abs(),
        tol,
    };
    for &alpha in alphas {
        let wa = w.scaled(alpha);
        let fa = obj.loss(&wa, &batch)?;
        report.loss = report.loss.max((fa - f0).abs());

        let ga = obj.grad(&wa, &batch)?.scaled(alpha);
        report.grad_scaling = report.grad_scaling.max(relative(ga.sub(&g0)?.norm(), g0n));

        let ha = hvp_by_differences(grad_fn, &wa, &v, 1e-4 * norm * alpha)?.scaled(alpha * alpha);
        report.hessian_scaling = report.hessian_scaling.max(relative(ha.sub(&h0)?.norm(), h0n));
    }
    Ok(report)
}

/// Deviation between `vᵀ∇²f(w)v` and
/// `(vᵀ∇²g(w̄)v − w̄ᵀ∇g(w̄)‖v‖²)/‖w‖²` for `f(w) = g(w/‖w‖)` and `v ⟂ w`.
/// Both curvatures come from difference quotients of analytic gradients.
pub fn hessian_perp_identity_check(
    g: &dyn BaseFunction,
    w: &ParamVector,
    v: &ParamVector,
    tol: f64,
) -> Result<f64> {
    w.check_dim(g.dim())?;
    v.check_dim(g.dim())?;
    let norm = w.checked_norm()?;
    let vn = v.norm();
    if vn == 0.0 {
        return Ok(0.0);
    }
    let cos = v.dot(w)?.abs() / (vn * norm);
    if cos > tol {
        return Err(invalid(format!("probe is not perpendicular to w (|cos| = {cos:e})")));
    }
    let f_grad = |x: &ParamVector| -> Result<ParamVector> {
        let n = x.checked_norm()?;
        let u = x.scaled(1.0 / n);
        radial_gradient(&u, n, ParamVector::new(g.gradient(u.as_slice())))
    };
    let g_grad = |x: &ParamVector| -> Result<ParamVector> { Ok(ParamVector::new(g.gradient(x.as_slice()))) };

    let h = default_hvp_step(w);
    let lhs = v.dot(&hvp_by_differences(f_grad, w, v, h)?)?;

    let unit = w.scaled(1.0 / norm);
    let curv_g = v.dot(&hvp_by_differences(g_grad, &unit, v, 1e-4)?)?;
    let radial = unit.dot(&ParamVector::new(g.gradient(unit.as_slice())))?;
    let rhs = (curv_g - radial * vn * vn) / (norm * norm);
    Ok((lhs - rhs).abs())
}

/// `g(u) = ⟨b, u⟩`. Test fixture.
#[derive(Debug, Clone)]
pub struct LinearBase {
    pub b: Vec<f64>,
}

impl BaseFunction for LinearBase {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, u: &[f64]) -> f64 {
        crate::param::dot(&self.b, u)
    }

    fn gradient(&self, _u: &[f64]) -> Vec<f64> {
        self.b.clone()
    }
}

/// `g(u) = ½uᵀAu + bᵀu` with symmetric `A` (row-major). Test fixture.
#[derive(Debug, Clone)]
pub struct QuadraticBase {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl QuadraticBase {
    pub fn hessian_form(&self, v: &[f64]) -> f64 {
        let d = self.b.len();
        (0..d)
            .map(|i| v[i] * crate::param::dot(&self.a[i * d..(i + 1) * d], v))
            .sum()
    }
}

impl BaseFunction for QuadraticBase {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, u: &[f64]) -> f64 {
        0.5 * self.hessian_form(u) + crate::param::dot(&self.b, u)
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let d = self.b.len();
        (0..d)
            .map(|i| crate::param::dot(&self.a[i * d..(i + 1) * d], u) + self.b[i])
            .collect()
    }
}
