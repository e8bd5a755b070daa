use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Check, DataSpec, Report};
use crate::error::Result;
use crate::invariance::{finite_diff_grad, hessian_perp_identity_check, verify_scale_invariance};
use crate::models::fixtures::HalfSquaredNorm;
use crate::models::{Activation, MlpSpec, RadialMlp, ToyLoss2D};
use crate::noise::{grad_noise_trace, sample_gradient_noise};
use crate::objective::{BatchSampler, Objective};
use crate::param::ParamVector;
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Toy,
    MlpTanh,
    MlpRelu,
    /// Linear radial classifier.
    Linear,
    /// `‖w‖²/2`, which is not scale-invariant; a negative control.
    HalfSquaredNorm,
}

impl ObjectiveKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Toy => "toy",
            ObjectiveKind::MlpTanh => "mlp-tanh",
            ObjectiveKind::MlpRelu => "mlp-relu",
            ObjectiveKind::Linear => "linear",
            ObjectiveKind::HalfSquaredNorm => "half-squared-norm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceSuiteConfig {
    pub objectives: Vec<ObjectiveKind>,
    pub data: DataSpec,
    pub hidden: usize,
    /// Random points per objective, with norms log-uniform in `[0.1, 10]`.
    pub points: usize,
    pub alphas: Vec<f64>,
    pub batch_size: usize,
    pub noise_samples: usize,
    pub seed: u64,
}

impl Default for InvarianceSuiteConfig {
    fn default() -> Self {
        InvarianceSuiteConfig {
            objectives: vec![
                ObjectiveKind::Toy,
                ObjectiveKind::MlpTanh,
                ObjectiveKind::MlpRelu,
                ObjectiveKind::Linear,
            ],
            data: DataSpec {
                n: 40,
                features: 3,
                classes: 3,
                separation: 2.0,
                seed: 7,
            },
            hidden: 6,
            points: 5,
            alphas: vec![0.5, 2.0, 7.0],
            batch_size: 8,
            noise_samples: 2000,
            seed: 0,
        }
    }
}

/// Worst deviations for one objective over all tested points.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ObjectiveDeviations {
    pub objective: String,
    pub loss: f64,
    pub grad_scaling: f64,
    pub perpendicularity: f64,
    pub batch_perpendicularity: f64,
    pub hessian_scaling: f64,
    pub finite_diff: f64,
    pub noise_perpendicularity: Option<f64>,
    /// Largest `|Tr(Σ_{cw}) − Tr(Σ_w)/c²|` in combined standard errors.
    pub covariance_scaling_z: Option<f64>,
    pub hessian_identity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceSuiteReport {
    pub objectives: Vec<ObjectiveDeviations>,
    pub checks: Vec<Check>,
}

impl Report for InvarianceSuiteReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

pub const LOSS_TOL: f64 = 1e-9;
pub const GRAD_TOL: f64 = 1e-8;
pub const PERP_TOL: f64 = 1e-9;
pub const HESSIAN_TOL: f64 = 1e-8;
pub const NOISE_PERP_TOL: f64 = 1e-10;
pub const HESSIAN_IDENTITY_TOL: f64 = 1e-6;
pub const STDERR_LIMIT: f64 = 3.0;

fn random_point(dim: usize, rng: &mut SimRng) -> Result<ParamVector> {
    let dir = ParamVector::new((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).direction()?;
    let norm = 10f64.powf(rng.random_range(-1.0..1.0));
    Ok(dir.scaled(norm))
}

fn perpendicular_probe(w: &ParamVector, rng: &mut SimRng) -> Result<ParamVector> {
    let mut v = ParamVector::new((0..w.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    let u = w.direction()?;
    v.project_out(&u)?;
    v.project_out(&u)?;
    v.direction()
}

fn examine(
    kind: ObjectiveKind,
    obj: &dyn Objective,
    mlp: Option<&RadialMlp>,
    cfg: &InvarianceSuiteConfig,
) -> Result<ObjectiveDeviations> {
    let mut rng = rng::stream(cfg.seed, kind.name(), 0);
    let mut dev = ObjectiveDeviations {
        objective: kind.name().to_string(),
        ..Default::default()
    };
    let full = obj.full_batch()?;
    let noisy = obj.n_samples() > cfg.batch_size;
    let sampler = BatchSampler::new(cfg.batch_size.min(obj.n_samples()));
    for p in 0..cfg.points {
        let w = random_point(obj.dim(), &mut rng)?;
        let rep = verify_scale_invariance(obj, &w, &cfg.alphas, 0.0)?;
        dev.loss = dev.loss.max(rep.loss / (1.0 + rep.loss_scale));
        dev.grad_scaling = dev.grad_scaling.max(rep.grad_scaling);
        dev.perpendicularity = dev.perpendicularity.max(rep.perpendicularity);
        dev.hessian_scaling = dev.hessian_scaling.max(rep.hessian_scaling);

        for _ in 0..10 {
            let batch = sampler.sample(obj.n_samples(), &mut rng)?;
            let g = obj.grad(&w, &batch)?;
            let gn = g.norm();
            if gn > 0.0 {
                dev.batch_perpendicularity = dev.batch_perpendicularity.max(g.dot(&w)?.abs() / (gn * w.norm()));
            }
        }

        let g = obj.grad(&w, &full)?;
        let fd = finite_diff_grad(obj, &w, &full, 1e-5 * w.norm())?;
        let err = fd.sub(&g)?.norm() / (1e-6f64).max(1e-4 * g.norm());
        dev.finite_diff = dev.finite_diff.max(err);

        if noisy {
            let mut worst = 0.0f64;
            for _ in 0..50 {
                let xi = sample_gradient_noise(obj, &w, &sampler, &mut rng)?;
                let xn = xi.norm();
                if xn > 0.0 {
                    worst = worst.max(xi.dot(&w)?.abs() / (xn * w.norm()));
                }
            }
            dev.noise_perpendicularity = Some(dev.noise_perpendicularity.unwrap_or(0.0).max(worst));

            let c = 2.0;
            let seed = rng::derive_seed(cfg.seed, kind.name(), p as u64);
            let base = grad_noise_trace(obj, &w, &sampler, cfg.noise_samples, seed)?;
            let scaled = grad_noise_trace(obj, &w.scaled(c), &sampler, cfg.noise_samples, seed ^ 0x9e37)?;
            let se = ((base.stderr / (c * c)).powi(2) + scaled.stderr.powi(2)).sqrt();
            let z = (scaled.mean - base.mean / (c * c)).abs() / se;
            dev.covariance_scaling_z = Some(dev.covariance_scaling_z.unwrap_or(0.0).max(z));
        }

        if let Some(m) = mlp {
            let unit_w = w.direction()?.scaled(10f64.powf(rng.random_range(-0.3..0.3)));
            let v = perpendicular_probe(&unit_w, &mut rng)?;
            let base = m.base_function(&full);
            let d = hessian_perp_identity_check(&base, &unit_w, &v, 1e-9)?;
            dev.hessian_identity = Some(dev.hessian_identity.unwrap_or(0.0).max(d));
        }
    }
    Ok(dev)
}

/// Runs the invariance, gradient, noise-covariance, and Hessian checks on
/// every configured objective.
pub fn run_invariance_suite(cfg: &InvarianceSuiteConfig) -> Result<InvarianceSuiteReport> {
    let data = Arc::new(cfg.data.build()?);
    let (p, k) = (cfg.data.features, cfg.data.classes);
    let mut objectives = Vec::new();
    let mut checks = Vec::new();
    for &kind in &cfg.objectives {
        let dev = match kind {
            ObjectiveKind::Toy => examine(kind, &ToyLoss2D, None, cfg)?,
            ObjectiveKind::HalfSquaredNorm => examine(kind, &HalfSquaredNorm { dim: 5 }, None, cfg)?,
            ObjectiveKind::MlpTanh | ObjectiveKind::MlpRelu | ObjectiveKind::Linear => {
                let spec = match kind {
                    ObjectiveKind::MlpTanh => MlpSpec::new(vec![p, cfg.hidden, k], Activation::Tanh),
                    ObjectiveKind::MlpRelu => MlpSpec::new(vec![p, cfg.hidden, k], Activation::Relu),
                    _ => MlpSpec::new(vec![p, k], Activation::Tanh),
                };
                let model = RadialMlp::new(spec, data.clone())?;
                examine(kind, &model, Some(&model), cfg)?
            }
        };
        let n = &dev.objective;
        checks.push(Check::at_most(format!("{n}/loss-invariance"), dev.loss, LOSS_TOL));
        checks.push(Check::at_most(format!("{n}/gradient-scaling"), dev.grad_scaling, GRAD_TOL));
        checks.push(Check::at_most(format!("{n}/perpendicularity"), dev.perpendicularity, PERP_TOL));
        checks.push(Check::at_most(
            format!("{n}/batch-perpendicularity"),
            dev.batch_perpendicularity,
            PERP_TOL,
        ));
        checks.push(Check::at_most(format!("{n}/hessian-scaling"), dev.hessian_scaling, HESSIAN_TOL));
        checks.push(Check::at_most(format!("{n}/finite-difference-gradient"), dev.finite_diff, 1.0));
        if let Some(v) = dev.noise_perpendicularity {
            checks.push(Check::at_most(format!("{n}/noise-perpendicularity"), v, NOISE_PERP_TOL));
        }
        if let Some(z) = dev.covariance_scaling_z {
            checks.push(Check::at_most(format!("{n}/covariance-scaling"), z, STDERR_LIMIT));
        }
        if let Some(d) = dev.hessian_identity {
            checks.push(Check::at_most(format!("{n}/hessian-identity"), d, HESSIAN_IDENTITY_TOL));
        }
        objectives.push(dev);
    }
    Ok(InvarianceSuiteReport { objectives, checks })
}
