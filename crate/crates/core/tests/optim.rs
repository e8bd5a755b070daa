use std::sync::Arc;

use proptest::prelude::*;
use silab_core::models::{make_gaussian_mixture, make_radial_mlp, Activation, MlpSpec, RadialMlp, ToyLoss2D};
use silab_core::optim::{direction, AdamWState, ExpLr, MomentumState, SgdWd};
use silab_core::{Batch, BatchSampler, Objective, ParamVector};

fn gap(a: &ParamVector, b: &ParamVector) -> f64 {
    direction(a).unwrap().distance(&direction(b).unwrap()).unwrap()
}

fn model() -> (RadialMlp, ParamVector) {
    let data = Arc::new(make_gaussian_mixture(40, 2, 3, 2.0, 2).unwrap());
    make_radial_mlp(MlpSpec::new(vec![2, 5, 3], Activation::Tanh).with_gain(3.0), data, 2).unwrap()
}

fn batches(n: usize, count: usize, seed: u64) -> Vec<Batch> {
    let mut rng = silab_core::rng::rng_from_seed(seed);
    (0..count).map(|_| BatchSampler::new(8).sample(n, &mut rng).unwrap()).collect()
}

fn start() -> impl Strategy<Value = ParamVector> {
    (-2.0f64..2.0, 0.2f64..2.0).prop_map(|(x, y)| ParamVector::new(vec![x, y]))
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    /// The update depends on (η, λ) only through η and λ_e = ηλ.
    #[test]
    fn sgd_depends_on_lambda_only_through_lambda_e(w in start(), eta in 0.01f64..0.5, le in 0.0f64..0.2) {
        let mut a = SgdWd::new(eta, le).unwrap();
        let mut b = SgdWd::from_lr_wd(eta, le / eta).unwrap();
        let batch = ToyLoss2D.full_batch().unwrap();
        // Both step from the same state: ηλ and λ_e can differ by an ulp, and
        // the toy map amplifies such gaps when trajectories are run apart.
        let mut x = w;
        for _ in 0..20 {
            let next = a.step(&ToyLoss2D, &x, &batch, None).unwrap();
            let other = b.step(&ToyLoss2D, &x, &batch, None).unwrap();
            let rel = next.sub(&other).unwrap().norm() / next.norm();
            prop_assert!(rel <= 1e-14, "relative gap {rel:e}");
            x = next;
        }
    }

    /// Starting from αw with LR α²η reproduces α times the original path.
    #[test]
    fn sgd_scale_and_lr_trade_off_exactly(w in start(), eta in 0.01f64..0.3, le in 0.0f64..0.1, alpha in 0.1f64..10.0) {
        let mut a = SgdWd::new(eta, le).unwrap();
        let mut b = SgdWd::new(alpha * alpha * eta, le).unwrap();
        let batch = ToyLoss2D.full_batch().unwrap();
        let (mut x, mut y) = (w.clone(), w.scaled(alpha));
        for _ in 0..30 {
            x = a.step(&ToyLoss2D, &x, &batch, None).unwrap();
            y = b.step(&ToyLoss2D, &y, &batch, None).unwrap();
            prop_assert!(y.sub(&x.scaled(alpha)).unwrap().norm() <= 1e-9 * y.norm());
        }
    }

    #[test]
    fn sgd_norm_never_shrinks_without_decay(w in start(), eta in 0.001f64..2.0) {
        let mut opt = SgdWd::new(eta, 0.0).unwrap();
        let batch = ToyLoss2D.full_batch().unwrap();
        let mut x = w;
        for _ in 0..50 {
            let next = opt.step(&ToyLoss2D, &x, &batch, None).unwrap();
            prop_assert!(next.norm_sq() >= x.norm_sq() * (1.0 - 1e-15));
            x = next;
        }
    }

    #[test]
    fn exp_lr_follows_sgd_directions(w in start(), eta in 0.01f64..0.2, le in 0.001f64..0.05) {
        let mut sgd = SgdWd::new(eta, le).unwrap();
        let mut exp = ExpLr::new(eta, le).unwrap();
        let batch = ToyLoss2D.full_batch().unwrap();
        let (mut x, mut y) = (w.clone(), exp.matching_init(&w));
        for _ in 0..40 {
            x = sgd.step(&ToyLoss2D, &x, &batch, None).unwrap();
            y = exp.step(&ToyLoss2D, &y, &batch).unwrap();
            prop_assert!(gap(&x, &y) <= 1e-9);
        }
    }

    #[test]
    fn adamw_is_invariant_to_joint_rescaling(w in start(), c in 0.05f64..20.0, lambda in 0.0f64..0.2) {
        let mut a = AdamWState::new(1e-2, 0.9, 0.999, 0.0, lambda, 0.1, 2).unwrap();
        let mut b = AdamWState::new(c * 1e-2, 0.9, 0.999, 0.0, lambda, 0.1, 2).unwrap();
        let batch = ToyLoss2D.full_batch().unwrap();
        let (mut x, mut y) = (w.clone(), w.scaled(c));
        for _ in 0..40 {
            x = a.step(&ToyLoss2D, &x, &batch).unwrap();
            y = b.step(&ToyLoss2D, &y, &batch).unwrap();
            prop_assert!(gap(&x, &y) <= 1e-9);
        }
    }

    #[test]
    fn momentum_reparametrization(w in start(), c in 0.1f64..10.0, beta in 0.0f64..0.95) {
        let mut a = MomentumState::new(beta, 0.05, 0.2, 2).unwrap();
        let mut b = MomentumState::new(beta, c * 0.05, 0.2 / c, 2).unwrap();
        let batch = ToyLoss2D.full_batch().unwrap();
        let (mut x, mut y) = (w.clone(), w.scaled(c.sqrt()));
        for _ in 0..40 {
            x = a.step(&ToyLoss2D, &x, &batch).unwrap();
            y = b.step(&ToyLoss2D, &y, &batch).unwrap();
            prop_assert!(gap(&x, &y) <= 1e-9);
            prop_assert!(y.sub(&x.scaled(c.sqrt())).unwrap().norm() <= 1e-9 * y.norm());
        }
    }
}

#[test]
fn minibatch_equivalences_on_an_mlp() {
    let (model, w0) = model();
    let seq = batches(model.n_samples(), 300, 4);

    let mut sgd = SgdWd::new(0.1, 0.01).unwrap();
    let mut exp = ExpLr::new(0.1, 0.01).unwrap();
    let (mut x, mut y) = (w0.clone(), exp.matching_init(&w0));
    for b in &seq {
        x = sgd.step(&model, &x, b, None).unwrap();
        y = exp.step(&model, &y, b).unwrap();
    }
    assert!(gap(&x, &y) < 1e-8, "exp-LR gap {:e}", gap(&x, &y));

    let mut m1 = MomentumState::new(0.9, 0.1, 0.1, model.dim()).unwrap();
    let mut m2 = MomentumState::new(0.9, 0.4, 0.025, model.dim()).unwrap();
    let (mut x, mut y) = (w0.clone(), w0.scaled(2.0));
    for b in &seq {
        x = m1.step(&model, &x, b).unwrap();
        y = m2.step(&model, &y, b).unwrap();
    }
    assert!(gap(&x, &y) < 1e-8, "momentum gap {:e}", gap(&x, &y));
}

#[test]
fn noisy_step_norm_identity() {
    // Gradient and noise are both perpendicular to w, so
    // ‖w'‖² = (1 − λ_e)²‖w‖² + η²‖g + ξ‖².
    let (model, w) = model();
    let batch = Batch::new(vec![0, 3, 7], model.n_samples()).unwrap();
    let g = model.grad(&w, &batch).unwrap();
    let mut xi = ParamVector::new((0..model.dim()).map(|i| (i as f64).sin()).collect());
    xi.project_out(&w.direction().unwrap()).unwrap();
    let mut opt = SgdWd::new(0.3, 0.05).unwrap();
    let next = opt.apply(&w, &g, Some(&xi)).unwrap();
    let expect = 0.95f64.powi(2) * w.norm_sq() + 0.09 * g.add(&xi).unwrap().norm_sq();
    assert!((next.norm_sq() - expect).abs() < 1e-12 * expect);
}
