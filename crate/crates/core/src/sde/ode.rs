//! Deterministic norm and `γ` dynamics under a prescribed noise trace.
//!
//! With `G = ‖W‖²` and `γ = (G/η)²` the weight SDE projects onto
//!
//! ```text
//! dG/dt = −2λ_e G + η² Tr(t)/G
//! dγ/dt = −4λ_e γ + 2 Tr(t)
//! ```
//!
//! where `Tr(t)` is the trace of the gradient-noise covariance at the unit
//! direction.

use serde::Serialize;

use crate::error::{invalid, Result};

/// Smallest sub-step the positivity guard will try before giving up.
const MIN_SUBSTEP: f64 = 1e-14;

/// A scalar trajectory on the grid `t_k = k·dt` (the last point is `t_end`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeTrajectory {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl OdeTrajectory {
    pub fn last(&self) -> f64 {
        *self.y.last().expect("trajectory holds the initial value")
    }

    /// Linear interpolation at time `s`, clamped to the recorded range.
    pub fn at(&self, s: f64) -> f64 {
        let n = self.t.len();
        if s <= self.t[0] {
            return self.y[0];
        }
        if s >= self.t[n - 1] {
            return self.y[n - 1];
        }
        let k = self.t.partition_point(|&x| x <= s) - 1;
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let a = (s - t0) / (t1 - t0);
        self.y[k] * (1.0 - a) + self.y[k + 1] * a
    }

    /// First recorded time at which `pred` holds.
    pub fn first_time(&self, pred: impl Fn(f64) -> bool) -> Option<f64> {
        self.t.iter().zip(&self.y).find(|(_, &y)| pred(y)).map(|(&t, _)| t)
    }
}

fn rk4_step(f: &dyn Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// RK4 over one interval of length `h`. Any stage or result that leaves the
/// positive half-line is rejected and the interval is retried in halves.
fn positive_rk4(f: &dyn Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> Result<f64> {
    let stages_ok = |h: f64| {
        let k1 = f(t, y);
        let y2 = y + 0.5 * h * k1;
        y2 > 0.0 && {
            let k2 = f(t + 0.5 * h, y2);
            let y3 = y + 0.5 * h * k2;
            y3 > 0.0 && y + h * f(t + 0.5 * h, y3) > 0.0
        }
    };
    if stages_ok(h) {
        let next = rk4_step(f, t, y, h);
        if next > 0.0 && next.is_finite() {
            return Ok(next);
        }
    }
    if h < MIN_SUBSTEP {
        return Err(invalid(format!("positivity guard failed at t = {t}")));
    }
    let mid = positive_rk4(f, t, y, 0.5 * h)?;
    positive_rk4(f, t + 0.5 * h, mid, 0.5 * h)
}

fn integrate_positive(f: &dyn Fn(f64, f64) -> f64, y0: f64, t_end: f64, dt: f64) -> Result<OdeTrajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(invalid("need dt > 0 and a finite t_end ≥ 0"));
    }
    let steps = (t_end / dt).ceil() as usize;
    let mut t = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    t.push(0.0);
    y.push(y0);
    let mut cur = y0;
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = ((k + 1) as f64 * dt).min(t_end);
        cur = positive_rk4(f, t0, cur, t1 - t0)?;
        t.push(t1);
        y.push(cur);
    }
    Ok(OdeTrajectory { t, y })
}

/// Integrates `dG/dt = −2λ_e G + η² Tr(t)/G` from `G(0) = g0`.
pub fn norm_ode_integrate(
    g0: f64,
    eta: f64,
    lambda_e: f64,
    trace: &dyn Fn(f64) -> f64,
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory> {
    if !(g0 > 0.0) {
        return Err(invalid(format!("initial squared norm must be positive, got {g0}")));
    }
    let f = |t: f64, g: f64| -2.0 * lambda_e * g + eta * eta * trace(t) / g;
    integrate_positive(&f, g0, t_end, dt)
}

/// Integrates `dγ/dt = −4λ_e γ + 2Tr(t)` from `γ(0) = gamma0`.
pub fn gamma_ode_integrate(
    gamma0: f64,
    lambda_e: f64,
    trace: &dyn Fn(f64) -> f64,
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory> {
    if !(gamma0 > 0.0) {
        return Err(invalid(format!("initial gamma must be positive, got {gamma0}")));
    }
    let f = |t: f64, g: f64| -4.0 * lambda_e * g + 2.0 * trace(t);
    integrate_positive(&f, gamma0, t_end, dt)
}

/// `γ_t = e^{−4λ_e t}γ₀ + (σ²/2λ_e)(1 − e^{−4λ_e t})` for constant trace `σ²`.
///
/// Errors when `λ_e = 0`; use [`gamma_linear_growth`] instead.
pub fn gamma_closed_form(gamma0: f64, lambda_e: f64, sigma2: f64, t: f64) -> Result<f64> {
    if lambda_e == 0.0 {
        return Err(invalid("no decay: gamma grows linearly, use gamma_linear_growth"));
    }
    if !(lambda_e > 0.0) {
        return Err(invalid(format!("intrinsic LR must be positive, got {lambda_e}")));
    }
    let decay = (-4.0 * lambda_e * t).exp();
    Ok(decay * gamma0 + sigma2 / (2.0 * lambda_e) * -(-4.0 * lambda_e * t).exp_m1())
}

/// `γ_t = γ₀ + 2σ²t`, the `λ_e = 0` solution.
pub fn gamma_linear_growth(gamma0: f64, sigma2: f64, t: f64) -> f64 {
    gamma0 + 2.0 * sigma2 * t
}

/// Stationary effective LR `√(2λ_e/σ²)`.
pub fn stationary_effective_lr(lambda_e: f64, sigma2: f64) -> Result<f64> {
    if !(lambda_e > 0.0) || !(sigma2 > 0.0) {
        return Err(invalid("stationary effective LR needs λ_e > 0 and σ² > 0"));
    }
    Ok((2.0 * lambda_e / sigma2).sqrt())
}

/// Stationary squared norm `G* = η√(σ²/(2λ_e))`.
pub fn stationary_norm_sq(eta: f64, lambda_e: f64, sigma2: f64) -> Result<f64> {
    Ok(eta / stationary_effective_lr(lambda_e, sigma2)?)
}

/// Time for the effective LR to come back within `tol` (relative) of its
/// stationary value after `η ÷ c, λ × c`, which multiplies `γ` by `c²`.
pub fn recovery_time_closed_form(c: f64, lambda_e: f64, tol: f64) -> Result<f64> {
    if !(c >= 1.0) || !(lambda_e > 0.0) || !(tol > 0.0 && tol < 1.0) {
        return Err(invalid("recovery time needs c ≥ 1, λ_e > 0, 0 < tol < 1"));
    }
    let band = 1.0 / (1.0 - tol).powi(2) - 1.0;
    let excess = c * c - 1.0;
    if excess <= band {
        return Ok(0.0);
    }
    Ok((excess / band).ln() / (4.0 * lambda_e))
}

/// Predicted norm-convergence times for direct training versus a warm phase
/// at `K` times the learning rate, with unit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPhaseTimes {
    pub direct: f64,
    pub two_phase: f64,
}

/// Evaluates
///
/// ```text
/// direct    = max(ln ρ, 1)/(ηλ)
/// two-phase = max(ln(ρ/K), 1)/(Kηλ) + ln K/(ηλ)
/// ```
///
/// where `ρ = γ₀/γ*` is the initial `γ = (G₀/η)²` relative to its stationary
/// value `σ²/(2ηλ)`.
pub fn two_phase_norm_time(g0: f64, eta: f64, lambda: f64, k: f64, sigma2: f64) -> Result<TwoPhaseTimes> {
    if !(g0 > 0.0 && eta > 0.0 && lambda > 0.0 && sigma2 > 0.0) || !(k >= 1.0) {
        return Err(invalid("two-phase prediction needs positive inputs and K ≥ 1"));
    }
    let rho = initial_gamma_ratio(g0, eta, lambda, sigma2);
    let rate = eta * lambda;
    let direct = rho.ln().max(1.0) / rate;
    let two_phase = (rho / k).ln().max(1.0) / (k * rate) + k.ln() / rate;
    Ok(TwoPhaseTimes { direct, two_phase })
}

/// `ρ = (G₀/η)² / (σ²/(2ηλ))`.
pub fn initial_gamma_ratio(g0: f64, eta: f64, lambda: f64, sigma2: f64) -> f64 {
    (g0 / eta).powi(2) * 2.0 * eta * lambda / sigma2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn zero_trace_norm_decays_exponentially() {
        let traj = norm_ode_integrate(3.0, 0.1, 0.2, &|_| 0.0, 10.0, 0.01).unwrap();
        for (t, g) in traj.t.iter().zip(&traj.y) {
            assert!(rel(*g, 3.0 * (-0.4 * t).exp()) < 1e-8);
        }
    }

    #[test]
    fn stationary_norm_is_fixed_point() {
        let (eta, le, tr): (f64, f64, f64) = (0.1, 0.01, 2.0);
        let g_star = eta * (tr / (2.0 * le)).sqrt();
        assert!(rel(stationary_norm_sq(eta, le, tr).unwrap(), g_star) < 1e-15);
        let traj = norm_ode_integrate(g_star, eta, le, &|_| tr, 200.0, 0.1).unwrap();
        assert!(traj.y.iter().all(|g| rel(*g, g_star) < 1e-9));
    }

    #[test]
    fn no_decay_squared_norm_grows_linearly() {
        let (g0, eta, tr) = (0.5, 0.3, 1.5);
        let traj = norm_ode_integrate(g0, eta, 0.0, &|_| tr, 5.0, 0.01).unwrap();
        for (t, g) in traj.t.iter().zip(&traj.y) {
            assert!(rel(g * g, g0 * g0 + 2.0 * eta * eta * tr * t) < 1e-6);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(gamma_closed_form(7.0, 0.1, 1.0, 0.0).unwrap(), 7.0);
        let late = gamma_closed_form(7.0, 0.005, 1.0, 1e6).unwrap();
        assert!(rel(late, 100.0) < 1e-12);
        let v = gamma_closed_form(4.0, 0.25, 0.5, 1.0).unwrap();
        assert!(rel(v, 1.0 + 3.0 * (-1.0f64).exp()) < 1e-14);
        assert!(gamma_closed_form(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rk4_matches_closed_form() {
        let traj = gamma_ode_integrate(4.0, 0.25, &|_| 0.5, 1.0, 1e-3).unwrap();
        let v = gamma_closed_form(4.0, 0.25, 0.5, 1.0).unwrap();
        assert!(rel(traj.last(), v) < 1e-8);
    }

    #[test]
    fn stationary_effective_lr_examples() {
        assert!(rel(stationary_effective_lr(0.005, 1.0).unwrap(), 0.1) < 1e-15);
        let a = stationary_effective_lr(0.003, 0.7).unwrap();
        let b = stationary_effective_lr(0.012, 0.7).unwrap();
        assert!(rel(b, 2.0 * a) < 1e-15);
        assert!(stationary_effective_lr(0.0, 1.0).is_err());
        let long = gamma_ode_integrate(1.0, 0.005, &|_| 1.0, 5000.0, 1.0).unwrap();
        assert!(rel(long.last().powf(-0.5), 0.1) < 1e-6);
    }

    #[test]
    fn positivity_guard_halves_steps() {
        // A huge step from a tiny G would overshoot below zero without the guard.
        let traj = norm_ode_integrate(1e-3, 1.0, 50.0, &|_| 0.0, 0.1, 0.1).unwrap();
        assert!(traj.y.iter().all(|&g| g > 0.0));
        assert!(traj.last() < 1e-3 * 0.1);
    }

    #[test]
    fn recovery_time_examples() {
        assert_eq!(recovery_time_closed_form(1.0, 0.01, 0.05).unwrap(), 0.0);
        let a = recovery_time_closed_form(10.0, 2e-4, 0.05).unwrap();
        let b = recovery_time_closed_form(10.0, 1e-4, 0.05).unwrap();
        assert!(rel(b, 2.0 * a) < 1e-12);
        let expect = (99.0f64 / (1.0 / 0.9025 - 1.0)).ln() / (4.0 * 2e-4);
        assert!(rel(a, expect) < 1e-12);
    }

    #[test]
    fn two_phase_degenerate_and_ordering() {
        let t = two_phase_norm_time(50.0, 0.1, 0.01, 1.0, 1.0).unwrap();
        assert!(rel(t.two_phase, t.direct) < 1e-15);
        let t = two_phase_norm_time(1e4, 0.1, 0.01, 10.0, 1.0).unwrap();
        assert!(t.two_phase < t.direct);
        assert!(two_phase_norm_time(1.0, 0.1, 0.01, 0.5, 1.0).is_err());
    }
}
