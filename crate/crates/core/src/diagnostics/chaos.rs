use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::objective::Objective;
use crate::param::ParamVector;

/// Direction distances `d_t = ‖w̄_t − w̄'_t‖` between twin trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosResult {
    /// `d_0, …, d_T`; shorter than requested if a twin hit the origin.
    pub distances: Vec<f64>,
    /// Number of origin-guard events (at most one per twin; the run stops).
    pub origin_events: usize,
}

impl ChaosResult {
    /// `d_T/d_0`; infinite for `d_0 = 0 < d_T`, NaN for `0/0`.
    pub fn ratio(&self) -> f64 {
        self.distances.last().copied().unwrap_or(f64::NAN) / self.distances[0]
    }

    /// `max_t d_t/d_0`.
    pub fn peak_ratio(&self) -> f64 {
        self.distances.iter().cloned().fold(f64::NAN, f64::max) / self.distances[0]
    }

    /// First step with `d_t ≥ threshold`.
    pub fn first_exceeding(&self, threshold: f64) -> Option<usize> {
        self.distances.iter().position(|&d| d >= threshold)
    }
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<ParamVector> {
    ParamVector::new((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).direction()
}

fn twin_start<R: Rng + ?Sized>(w0: &ParamVector, delta: f64, rng: &mut R) -> Result<ParamVector> {
    w0.checked_norm()?;
    if !(delta >= 0.0) {
        return Err(invalid(format!("perturbation size must be non-negative, got {delta}")));
    }
    let mut twin = w0.clone();
    twin.axpy(delta, &random_unit(w0.dim(), rng)?)?;
    Ok(twin)
}

fn direction_distance(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    a.direction()?.distance(&b.direction()?)
}

/// Full-batch GD with weight decay, `w ← (1 − ηλ)w − η∇L(w)`, from `w0` and
/// from `w0 + δu` for a random unit vector `u`.
pub fn chaos_divergence<O, R>(
    obj: &O,
    w0: &ParamVector,
    delta: f64,
    steps: usize,
    eta: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<ChaosResult>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let mut a = w0.clone();
    let mut b = twin_start(w0, delta, rng)?;
    let batch = obj.full_batch()?;
    let shrink = 1.0 - eta * lambda;
    let gd = |w: &ParamVector| -> Result<ParamVector> {
        let g = obj.grad(w, &batch)?;
        let mut next = w.scaled(shrink);
        next.axpy(-eta, &g)?;
        Ok(next)
    };
    let mut distances = vec![direction_distance(&a, &b)?];
    let mut origin_events = 0;
    for _ in 0..steps {
        match (gd(&a), gd(&b)) {
            (Ok(na), Ok(nb)) if na.checked_norm().is_ok() && nb.checked_norm().is_ok() => {
                a = na;
                b = nb;
                distances.push(direction_distance(&a, &b)?);
            }
            (ra, rb) => {
                origin_events += [ra, rb]
                    .iter()
                    .filter(|r| r.as_ref().map_or(true, |w| w.checked_norm().is_err()))
                    .count();
                break;
            }
        }
    }
    Ok(ChaosResult {
        distances,
        origin_events,
    })
}

fn rk4_flow<O: Objective + ?Sized>(obj: &O, w: &ParamVector, eta: f64, lambda_e: f64, h: f64) -> Result<ParamVector> {
    let batch = obj.full_batch()?;
    let f = |x: &ParamVector| -> Result<ParamVector> {
        let mut v = obj.grad(x, &batch)?.scaled(-eta);
        v.axpy(-lambda_e, x)?;
        Ok(v)
    };
    let k1 = f(w)?;
    let mut y = w.clone();
    y.axpy(0.5 * h, &k1)?;
    let k2 = f(&y)?;
    let mut y = w.clone();
    y.axpy(0.5 * h, &k2)?;
    let k3 = f(&y)?;
    let mut y = w.clone();
    y.axpy(h, &k3)?;
    let k4 = f(&y)?;
    let mut out = w.clone();
    out.axpy(h / 6.0, &k1)?;
    out.axpy(h / 3.0, &k2)?;
    out.axpy(h / 3.0, &k3)?;
    out.axpy(h / 6.0, &k4)?;
    Ok(out)
}

/// The continuous-time counterpart of [`chaos_divergence`]: both twins follow
/// `dw/dt = −η∇L(w) − ηλ·w`, integrated by RK4 with step
/// `min(dt_max, ‖w‖²/(2η))`, inside the RK4 stability region for the
/// local contraction rate `2η/‖w‖²` of the direction. Distances are
/// reported at integer times `0, 1, …, steps`.
#[allow(clippy::too_many_arguments)]
pub fn chaos_gradient_flow<O, R>(
    obj: &O,
    w0: &ParamVector,
    delta: f64,
    steps: usize,
    eta: f64,
    lambda: f64,
    dt_max: f64,
    rng: &mut R,
) -> Result<ChaosResult>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    if !(dt_max > 0.0) {
        return Err(invalid("dt_max must be positive"));
    }
    let lambda_e = eta * lambda;
    let mut a = w0.clone();
    let mut b = twin_start(w0, delta, rng)?;
    let mut distances = vec![direction_distance(&a, &b)?];
    let advance = |w: &ParamVector| -> Result<ParamVector> {
        let mut w = w.clone();
        let mut t = 0.0;
        while t < 1.0 {
            let h = dt_max.min(0.5 * w.norm_sq() / eta).min(1.0 - t);
            w = rk4_flow(obj, &w, eta, lambda_e, h)?;
            w.checked_norm()?;
            t += h;
        }
        Ok(w)
    };
    let mut origin_events = 0;
    for _ in 0..steps {
        match rayon::join(|| advance(&a), || advance(&b)) {
            (Ok(na), Ok(nb)) => {
                a = na;
                b = nb;
                distances.push(direction_distance(&a, &b)?);
            }
            (ra, rb) => {
                origin_events += usize::from(ra.is_err()) + usize::from(rb.is_err());
                break;
            }
        }
    }
    Ok(ChaosResult {
        distances,
        origin_events,
    })
}
