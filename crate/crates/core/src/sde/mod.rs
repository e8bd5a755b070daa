//! Continuous-time surrogates of SGD with weight decay.
//!
//! [`em_step_weight_sde`] discretizes
//! `dW = −η(∇L(W)dt + Σ_W^{1/2}dB) − λ_e W dt` by Euler–Maruyama; the
//! [`ode`] submodule holds the deterministic norm and `γ` dynamics that the
//! simulations are compared against. With `dt = 1` one SDE step is one SGD
//! step, so times are measured in steps.

pub mod ode;

pub use ode::{
    gamma_closed_form, gamma_linear_growth, gamma_ode_integrate, initial_gamma_ratio, norm_ode_integrate,
    recovery_time_closed_form, stationary_effective_lr, stationary_norm_sq, two_phase_norm_time, OdeTrajectory,
    TwoPhaseTimes,
};

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::noise::sample_gradient_noise_with;
use crate::objective::{BatchSampler, Objective};
use crate::param::ParamVector;

/// How the diffusion term is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum NoiseMode {
    /// `ξ = ∇L(W; B) − ∇L(W)` for a fresh minibatch.
    EmpiricalBatch { batch: BatchSampler },
    /// Gaussian in the hyperplane orthogonal to `W`, isotropic within it,
    /// with `E‖ξ‖² = σ²/‖W‖²` (so the trace at the unit direction is `σ²`).
    ConstantTrace { sigma2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub eta: f64,
    pub lambda_e: f64,
    pub noise: NoiseMode,
}

impl SdeConfig {
    pub fn new(dt: f64, eta: f64, lambda_e: f64, noise: NoiseMode) -> Result<Self> {
        let cfg = SdeConfig {
            dt,
            eta,
            lambda_e,
            noise,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses [`SdeConfig::default_dt`].
    pub fn with_default_dt(eta: f64, lambda_e: f64, noise: NoiseMode) -> Result<Self> {
        SdeConfig::new(SdeConfig::default_dt(eta, lambda_e), eta, lambda_e, noise)
    }

    /// `min(1e-4/λ_e, η)`: at least a thousand steps per `0.1/λ_e` of time.
    pub fn default_dt(eta: f64, lambda_e: f64) -> f64 {
        if lambda_e > 0.0 {
            (1e-4 / lambda_e).min(eta)
        } else {
            eta
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.eta > 0.0) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.eta)));
        }
        if !(self.lambda_e >= 0.0) {
            return Err(invalid(format!("intrinsic LR must be non-negative, got {}", self.lambda_e)));
        }
        if !(1.0 - 2.0 * self.lambda_e * self.dt > 0.0) {
            return Err(invalid(format!(
                "dt = {} too large for λ_e = {}: need 1 − 2λ_e·dt > 0",
                self.dt, self.lambda_e
            )));
        }
        if let NoiseMode::ConstantTrace { sigma2 } = self.noise {
            if !(sigma2 >= 0.0) {
                return Err(invalid(format!("σ² must be non-negative, got {sigma2}")));
            }
        }
        Ok(())
    }
}

/// Gaussian noise orthogonal to `w` with `E‖ξ‖² = σ²/‖w‖²`. The component
/// along `w` is removed twice so `⟨ξ, w⟩` vanishes to rounding.
pub fn constant_trace_noise<R: Rng + ?Sized>(w: &ParamVector, sigma2: f64, rng: &mut R) -> Result<ParamVector> {
    let d = w.dim();
    if d < 2 {
        return Err(invalid("orthogonal noise needs dimension ≥ 2"));
    }
    let g = w.norm_sq();
    let unit = w.direction()?;
    let mut z = ParamVector::new((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    z.project_out(&unit)?;
    z.project_out(&unit)?;
    z.scale_mut((sigma2 / (g * (d - 1) as f64)).sqrt());
    Ok(z)
}

/// The quantities produced by one Euler–Maruyama step.
#[derive(Debug, Clone, PartialEq)]
pub struct EmStep {
    pub w: ParamVector,
    pub noise: ParamVector,
    /// `‖W‖²·‖ξ‖²`: a one-draw estimate of the trace at the unit direction.
    pub trace_est: f64,
}

/// `W' = W − η(∇L(W)dt + √dt·ξ) − λ_e W dt`.
pub fn em_step_weight_sde<O, R>(cfg: &SdeConfig, obj: &O, w: &ParamVector, rng: &mut R) -> Result<EmStep>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let g = w.checked_norm()?.powi(2);
    let full = obj.full_grad(w)?;
    let noise = match cfg.noise {
        NoiseMode::EmpiricalBatch { batch } => sample_gradient_noise_with(obj, w, &full, &batch, rng)?,
        NoiseMode::ConstantTrace { sigma2 } => constant_trace_noise(w, sigma2, rng)?,
    };
    let mut next = w.scaled(1.0 - cfg.lambda_e * cfg.dt);
    next.axpy(-cfg.eta * cfg.dt, &full)?;
    next.axpy(-cfg.eta * cfg.dt.sqrt(), &noise)?;
    let trace_est = g * noise.norm_sq();
    Ok(EmStep {
        w: next,
        noise,
        trace_est,
    })
}

/// One row of an SDE trajectory export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdeRow {
    pub t: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub gamma: f64,
    pub eff_lr: f64,
    pub trace_est: f64,
}

impl SdeRow {
    pub fn new(t: f64, g: f64, eta: f64, trace_est: f64) -> Self {
        SdeRow {
            t,
            g,
            gamma: (g / eta).powi(2),
            eff_lr: eta / g,
            trace_est,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeTrajectory {
    pub rows: Vec<SdeRow>,
    pub final_w: ParamVector,
}

impl SdeTrajectory {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Runs `steps` Euler–Maruyama steps from `w0`, recording every
/// `record_every` steps (and the initial point). Times start at `t0`.
///
/// The initial row has `trace_est = NaN` since no noise has been drawn yet.
pub fn simulate<O, R>(
    cfg: &SdeConfig,
    obj: &O,
    w0: &ParamVector,
    steps: usize,
    record_every: usize,
    t0: f64,
    rng: &mut R,
) -> Result<SdeTrajectory>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if record_every == 0 {
        return Err(invalid("record_every must be at least 1"));
    }
    let mut w = w0.clone();
    let mut rows = vec![SdeRow::new(t0, w.checked_norm()?.powi(2), cfg.eta, f64::NAN)];
    for k in 1..=steps {
        let step = em_step_weight_sde(cfg, obj, &w, rng)?;
        w = step.w;
        if k % record_every == 0 || k == steps {
            rows.push(SdeRow::new(t0 + k as f64 * cfg.dt, w.norm_sq(), cfg.eta, step.trace_est));
        }
    }
    Ok(SdeTrajectory { rows, final_w: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fixtures::HalfSquaredNorm;
    use crate::models::{make_gaussian_mixture, make_radial_mlp, Activation, MlpSpec, ToyLoss2D};
    use crate::rng::rng_from_seed;
    use std::sync::Arc;

    #[test]
    fn pure_decay_without_noise_or_gradient() {
        // Zero gradient: the toy loss is flat along the y-axis.
        let cfg = SdeConfig::new(0.1, 0.5, 0.2, NoiseMode::ConstantTrace { sigma2: 0.0 }).unwrap();
        let w = ParamVector::new(vec![0.0, 2.0]);
        let step = em_step_weight_sde(&cfg, &ToyLoss2D, &w, &mut rng_from_seed(1)).unwrap();
        let expect = (1.0 - 0.02f64).powi(2) * 4.0;
        assert!((step.w.norm_sq() - expect).abs() < 1e-15);
    }

    #[test]
    fn constant_trace_noise_is_orthogonal_with_right_scale() {
        let mut rng = rng_from_seed(3);
        let w = ParamVector::new(vec![1.0, -2.0, 0.5, 3.0, 0.25]);
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let xi = constant_trace_noise(&w, 2.0, &mut rng).unwrap();
            assert!(xi.dot(&w).unwrap().abs() < 1e-14 * w.norm() * xi.norm().max(1e-300));
            acc += xi.norm_sq();
        }
        let expect = 2.0 / w.norm_sq();
        assert!(((acc / n as f64) - expect).abs() < 0.03 * expect);
    }

    #[test]
    fn noise_trace_scales_inversely_with_norm() {
        let mut rng = rng_from_seed(4);
        let w = ParamVector::new(vec![0.3, 0.4, 1.2]);
        let xi1 = constant_trace_noise(&w, 1.0, &mut rng_from_seed(9)).unwrap();
        let xi2 = constant_trace_noise(&w.scaled(5.0), 1.0, &mut rng_from_seed(9)).unwrap();
        assert!(xi1.scaled(0.2).sub(&xi2).unwrap().norm() < 1e-15);
        let _ = constant_trace_noise(&w, 1.0, &mut rng).unwrap();
    }

    #[test]
    fn norm_update_identity() {
        let data = Arc::new(make_gaussian_mixture(24, 2, 3, 2.0, 5).unwrap());
        let (model, w0) = make_radial_mlp(MlpSpec::new(vec![2, 4, 3], Activation::Tanh), data, 5).unwrap();
        let cfg = SdeConfig::new(
            0.05,
            0.2,
            0.1,
            NoiseMode::EmpiricalBatch {
                batch: BatchSampler::new(6),
            },
        )
        .unwrap();
        let mut rng = rng_from_seed(11);
        let mut w = w0;
        for _ in 0..50 {
            let g = w.norm_sq();
            let full = model.full_grad(&w).unwrap();
            let step = em_step_weight_sde(&cfg, &model, &w, &mut rng).unwrap();
            let mut inc = full.scaled(cfg.dt);
            inc.axpy(cfg.dt.sqrt(), &step.noise).unwrap();
            let lhs = step.w.norm_sq() - g;
            let rhs = (-2.0 * cfg.lambda_e * cfg.dt + (cfg.lambda_e * cfg.dt).powi(2)) * g
                + cfg.eta * cfg.eta * inc.norm_sq();
            assert!((lhs - rhs).abs() < 1e-12 * g, "{lhs} vs {rhs}");
            w = step.w;
        }
    }

    #[test]
    fn dt_guard() {
        let noise = NoiseMode::ConstantTrace { sigma2: 1.0 };
        assert!(SdeConfig::new(5.0, 0.1, 0.1, noise).is_err());
        assert!(SdeConfig::new(4.9, 0.1, 0.1, noise).is_ok());
        assert_eq!(SdeConfig::default_dt(0.1, 0.01), 0.01);
        assert_eq!(SdeConfig::default_dt(0.1, 1e-4), 0.1);
    }

    #[test]
    fn origin_guard() {
        let cfg = SdeConfig::new(0.1, 0.1, 0.1, NoiseMode::ConstantTrace { sigma2: 1.0 }).unwrap();
        let w = ParamVector::zeros(3);
        assert!(em_step_weight_sde(&cfg, &HalfSquaredNorm { dim: 3 }, &w, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn csv_export_has_documented_columns() {
        let cfg = SdeConfig::new(0.01, 0.1, 0.05, NoiseMode::ConstantTrace { sigma2: 1.0 }).unwrap();
        let w0 = ParamVector::new(vec![0.2, 1.0]);
        let traj = simulate(&cfg, &ToyLoss2D, &w0, 20, 5, 0.0, &mut rng_from_seed(2)).unwrap();
        assert_eq!(traj.rows.len(), 5);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,G,gamma,eff_lr,trace_est\n"));
        for row in &traj.rows {
            assert!((row.gamma - (row.g / cfg.eta).powi(2)).abs() <= 1e-12 * row.gamma);
        }
    }
}
