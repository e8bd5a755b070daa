use std::sync::Arc;

use proptest::prelude::*;
use silab_core::models::{make_gaussian_mixture, make_radial_mlp, Activation, MlpSpec, ToyLoss2D};
use silab_core::sde::{
    gamma_closed_form, gamma_linear_growth, gamma_ode_integrate, norm_ode_integrate, recovery_time_closed_form,
    simulate, stationary_effective_lr, stationary_norm_sq, NoiseMode, SdeConfig,
};
use silab_core::stats::{linear_fit, mean_stderr};
use silab_core::{BatchSampler, ParamVector};

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 32,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    /// `γ = (G/η)²` turns the norm ODE into the linear γ ODE.
    #[test]
    fn norm_ode_maps_onto_gamma_closed_form(
        g0 in 0.05f64..20.0,
        eta in 0.01f64..1.0,
        le in 1e-3f64..0.1,
        sigma2 in 0.1f64..5.0,
    ) {
        let t_end = 2.0 / le;
        let traj = norm_ode_integrate(g0, eta, le, &|_| sigma2, t_end, 0.005 / le).unwrap();
        let gamma0 = (g0 / eta).powi(2);
        for (&t, &g) in traj.t.iter().zip(&traj.y).step_by(20) {
            let exact = gamma_closed_form(gamma0, le, sigma2, t).unwrap();
            let mapped = (g / eta).powi(2);
            prop_assert!((mapped / exact - 1.0).abs() < 1e-7, "t = {t}: {mapped} vs {exact}");
        }
    }

    #[test]
    fn stationary_point_is_a_fixed_point(le in 1e-4f64..0.5, sigma2 in 0.01f64..10.0, eta in 0.01f64..1.0) {
        let star = sigma2 / (2.0 * le);
        let later = gamma_closed_form(star, le, sigma2, 37.0).unwrap();
        prop_assert!((later / star - 1.0).abs() < 1e-12);
        let g = stationary_norm_sq(eta, le, sigma2).unwrap();
        prop_assert!(((g / eta).powi(2) / star - 1.0).abs() < 1e-12);
        let eff = stationary_effective_lr(le, sigma2).unwrap();
        prop_assert!((eff * g / eta - 1.0).abs() < 1e-12);
    }
}

#[test]
fn without_decay_gamma_grows_linearly() {
    let traj = gamma_ode_integrate(3.0, 0.0, &|_| 0.7, 10.0, 0.01).unwrap();
    for (&t, &y) in traj.t.iter().zip(&traj.y) {
        assert!((y - gamma_linear_growth(3.0, 0.7, t)).abs() < 1e-10);
    }
    assert!(gamma_closed_form(3.0, 0.0, 0.7, 1.0).is_err());
}

/// Time for the γ ODE, started at `c²γ*`, to bring the effective LR back
/// within `tol` of its stationary value.
fn measured_recovery(c: f64, le: f64, tol: f64) -> f64 {
    let star = 1.0 / (2.0 * le);
    let unit = 1.0 / (4.0 * le);
    let traj = gamma_ode_integrate(c * c * star, le, &|_| 1.0, 20.0 * unit, 1e-4 * unit).unwrap();
    traj.first_time(|g| (star / g).sqrt() >= 1.0 - tol).unwrap()
}

#[test]
fn recovery_time_is_linear_in_inverse_lambda_e() {
    let grid = [4e-4, 2e-4, 1e-4, 5e-5];
    let x: Vec<f64> = grid.iter().map(|l| 1.0 / l).collect();
    let y: Vec<f64> = grid.iter().map(|&l| measured_recovery(10.0, l, 0.05)).collect();
    for (&l, &t) in grid.iter().zip(&y) {
        let exact = recovery_time_closed_form(10.0, l, 0.05).unwrap();
        assert!((t / exact - 1.0).abs() < 1e-3, "λ_e = {l}: {t} vs {exact}");
    }
    let fit = linear_fit(&x, &y);
    assert!(fit.r_squared >= 0.999, "{fit:?}");
    let halved = recovery_time_closed_form(10.0, 1e-4, 0.05).unwrap();
    let base = recovery_time_closed_form(10.0, 2e-4, 0.05).unwrap();
    assert!((halved / base - 2.0).abs() < 1e-12);
    assert_eq!(recovery_time_closed_form(1.0, 1e-4, 0.05).unwrap(), 0.0);
}

#[test]
fn constant_trace_noise_averages_to_sigma2() {
    // E[‖W‖²‖ξ‖²] = σ² at every step, so the running average of the
    // per-step estimate converges to σ².
    let cfg = SdeConfig::new(0.01, 0.1, 0.05, NoiseMode::ConstantTrace { sigma2: 0.8 }).unwrap();
    let w0 = ParamVector::new(vec![0.3, 1.0]);
    let traj = simulate(&cfg, &ToyLoss2D, &w0, 20_000, 1, 0.0, &mut silab_core::rng::rng_from_seed(6)).unwrap();
    let est: Vec<f64> = traj.rows[1..].iter().map(|r| r.trace_est).collect();
    let (mean, stderr) = mean_stderr(&est);
    assert!((mean - 0.8).abs() < 4.0 * stderr, "{mean} ± {stderr}");
    assert!(traj.rows[0].trace_est.is_nan());
}

#[test]
fn empirical_noise_ensemble_tracks_its_own_trace() {
    // In minibatch-noise mode the norm still obeys G' = (1 − λ_e dt)²G +
    // η²dt‖g + ξ‖², so the run stays positive and the recorded columns agree.
    let data = Arc::new(make_gaussian_mixture(40, 2, 3, 1.5, 3).unwrap());
    let (model, w0) = make_radial_mlp(MlpSpec::new(vec![2, 4, 3], Activation::Tanh), data, 3).unwrap();
    let cfg = SdeConfig::new(
        1.0,
        0.1,
        0.01,
        NoiseMode::EmpiricalBatch {
            batch: BatchSampler::new(8),
        },
    )
    .unwrap();
    let traj = simulate(&cfg, &model, &w0, 500, 10, 0.0, &mut silab_core::rng::rng_from_seed(2)).unwrap();
    assert_eq!(traj.rows.len(), 51);
    for row in &traj.rows {
        assert!(row.g > 0.0);
        assert!((row.gamma - (row.g / 0.1).powi(2)).abs() <= 1e-12 * row.gamma);
        assert!((row.eff_lr * row.g - 0.1).abs() < 1e-15);
    }
}

#[test]
fn trajectories_export_and_reject_bad_configs() {
    let cfg = SdeConfig::new(0.1, 0.1, 0.1, NoiseMode::ConstantTrace { sigma2: 1.0 }).unwrap();
    let traj = simulate(&cfg, &ToyLoss2D, &ParamVector::new(vec![0.1, 1.0]), 5, 1, 2.0, &mut silab_core::rng::rng_from_seed(1))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sde.csv");
    traj.save_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,G,gamma,eff_lr,trace_est"));
    assert_eq!(lines.count(), 6);
    assert!(text.lines().nth(1).unwrap().starts_with("2.0,"));

    assert!(SdeConfig::new(1.0, 0.1, 0.5, NoiseMode::ConstantTrace { sigma2: 1.0 }).is_err());
    assert!(SdeConfig::new(0.0, 0.1, 0.1, NoiseMode::ConstantTrace { sigma2: 1.0 }).is_err());
    assert!(simulate(&cfg, &ToyLoss2D, &ParamVector::zeros(2), 5, 1, 0.0, &mut silab_core::rng::rng_from_seed(1)).is_err());
}
