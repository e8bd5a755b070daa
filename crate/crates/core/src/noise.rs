//! Minibatch gradient-noise estimation.
//!
//! The noise at `w` is `ξ = ∇L(w; B) − ∇L(w)`; its covariance is `Σ_w` by
//! construction, so resampling batches gives exact first and second moments
//! without ever forming `Σ_w`.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::objective::{BatchSampler, Objective};
use crate::param::ParamVector;
use crate::rng;

/// Estimate of `Tr(Σ_w) = E‖∇L(w; B) − ∇L(w)‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseTraceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// One noise draw given a precomputed full gradient.
pub fn sample_gradient_noise_with<O, R>(
    obj: &O,
    w: &ParamVector,
    full_grad: &ParamVector,
    sampler: &BatchSampler,
    rng: &mut R,
) -> Result<ParamVector>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let batch = sampler.sample(obj.n_samples(), rng)?;
    obj.grad(w, &batch)?.sub(full_grad)
}

/// `ξ = ∇L(w; B) − ∇L(w)` for a freshly drawn batch.
pub fn sample_gradient_noise<O, R>(
    obj: &O,
    w: &ParamVector,
    sampler: &BatchSampler,
    rng: &mut R,
) -> Result<ParamVector>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    sampler.validate(obj.n_samples())?;
    let full = obj.full_grad(w)?;
    sample_gradient_noise_with(obj, w, &full, sampler, rng)
}

/// Monte-Carlo estimate of the noise trace over `n_samples` i.i.d. batches.
pub fn grad_noise_trace<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    sampler: &BatchSampler,
    n_samples: usize,
    seed: u64,
) -> Result<NoiseTraceEstimate> {
    if n_samples < 2 {
        return Err(invalid("need at least two noise samples"));
    }
    sampler.validate(obj.n_samples())?;
    let full = obj.full_grad(w)?;
    let mut rng = rng::stream(seed, "noise-trace", 0);
    let draws = (0..n_samples)
        .map(|_| Ok(sample_gradient_noise_with(obj, w, &full, sampler, &mut rng)?.norm_sq()))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = crate::stats::mean_stderr(&draws);
    Ok(NoiseTraceEstimate {
        mean,
        stderr,
        n_samples,
    })
}
