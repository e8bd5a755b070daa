use std::sync::Arc;

use rand::seq::SliceRandom;
use silab_core::diagnostics::{
    collect_histograms, mean_tv_distance, multinomial_tv_floor, pairwise_distance_matrix, run_ensemble, run_trial,
    swa_average, EnsembleSpec, InitSpec, Metrics, PredictionHistogram, RecordPlan,
};
use silab_core::models::{make_gaussian_mixture, Activation, MlpSpec, RadialMlp};
use silab_core::optim::OptimizerKind;
use silab_core::schedule::Schedule;
use silab_core::stats::{mean, spearman};
use silab_core::{BatchSampler, ParamVector};

fn model() -> RadialMlp {
    let data = Arc::new(make_gaussian_mixture(80, 2, 3, 1.5, 4).unwrap());
    RadialMlp::new(MlpSpec::new(vec![2, 6, 3], Activation::Tanh), data).unwrap()
}

fn spec(n_trials: usize, total_steps: usize, snapshots: Vec<usize>) -> EnsembleSpec {
    EnsembleSpec {
        n_trials,
        init: InitSpec::Random { scale: 1.0 },
        schedule: Schedule::constant(0.1, 0.1).unwrap(),
        optimizer: OptimizerKind::Sgd,
        batch: BatchSampler::new(8),
        total_steps,
        record: RecordPlan {
            every: 25,
            metrics: Metrics::NormOnly,
            snapshots,
        },
        seed: 9,
        tag: "diag".into(),
    }
}

fn probes() -> Vec<Vec<f64>> {
    (0..30)
        .map(|i| {
            let a = i as f64 * 0.7;
            vec![2.0 * a.cos(), 2.0 * a.sin()]
        })
        .collect()
}

#[test]
fn one_trial_gives_one_hot_histograms() {
    let m = model();
    let records = run_ensemble(&spec(2, 40, vec![40]), &m, None).unwrap();
    let h = collect_histograms(&records[..1], &m, &probes(), 40).unwrap();
    assert_eq!(h.n_trials, 1);
    for i in 0..h.probes.len() {
        let f = h.frequencies(i);
        assert_eq!(f.iter().filter(|&&p| p == 1.0).count(), 1);
        assert_eq!(f.iter().sum::<f64>(), 1.0);
    }
}

#[test]
fn rescaled_trials_have_identical_histograms() {
    let m = model();
    let records = run_ensemble(&spec(6, 60, vec![60]), &m, None).unwrap();
    let mut scaled = records.clone();
    for (i, r) in scaled.iter_mut().enumerate() {
        let w = r.snapshots.get_mut(&60).unwrap();
        w.scale_mut(10f64.powi(i as i32 - 3));
    }
    let a = collect_histograms(&records, &m, &probes(), 60).unwrap();
    let b = collect_histograms(&scaled, &m, &probes(), 60).unwrap();
    assert_eq!(a, b);
    assert_eq!(mean_tv_distance(&a, &b).unwrap(), 0.0);
    assert!(collect_histograms(&records, &m, &probes(), 30).is_err());
}

#[test]
fn multinomial_floor_matches_split_half_oracle() {
    // Oracle: split a large i.i.d. sample from known distributions into
    // halves many times and average the TV.
    let p = vec![vec![0.5, 0.3, 0.2], vec![0.9, 0.05, 0.05], vec![1.0, 0.0, 0.0]];
    let n = 50;
    let mut rng = silab_core::rng::rng_from_seed(17);
    let mut tvs = Vec::new();
    for _ in 0..400 {
        let mut counts_a = Vec::new();
        let mut counts_b = Vec::new();
        for probs in &p {
            let mut pool: Vec<usize> = probs
                .iter()
                .enumerate()
                .flat_map(|(k, &q)| std::iter::repeat_n(k, (q * 2.0 * n as f64).round() as usize))
                .collect();
            pool.shuffle(&mut rng);
            let count = |xs: &[usize]| (0..3).map(|k| xs.iter().filter(|&&x| x == k).count() as u64).collect::<Vec<_>>();
            counts_a.push(count(&pool[..n]));
            counts_b.push(count(&pool[n..]));
        }
        let probes: Vec<Vec<f64>> = (0..p.len()).map(|i| vec![i as f64]).collect();
        let a = PredictionHistogram::from_counts(probes.clone(), counts_a).unwrap();
        let b = PredictionHistogram::from_counts(probes, counts_b).unwrap();
        tvs.push(mean_tv_distance(&a, &b).unwrap());
    }
    // For a pool of 2n with exact composition p, a random half has
    // Var(p̂_a) = p(1−p)/(2(2n−1)) and p̂_a − p̂_b = 2(p̂_a − p), so the
    // difference has variance 2p(1−p)/(2n−1): the same as two independent
    // draws of size n up to a factor 2n/(2n−1).
    let split = mean(&tvs);
    let floor = multinomial_tv_floor(&p, n, n, 4000, 3).unwrap();
    let ratio = split / floor;
    assert!((ratio - 1.0).abs() < 0.06, "split {split}, floor {floor}, ratio {ratio}");
    let deterministic = multinomial_tv_floor(&[vec![1.0, 0.0]], 10, 10, 50, 0).unwrap();
    assert_eq!(deterministic, 0.0);
}

#[test]
fn distances_grow_with_time_separation_before_equilibrium() {
    // Without weight decay the norm only grows and the iterates drift, so
    // d(T, T + Δ) increases with Δ.
    let m = model();
    let mut s = spec(2, 600, (0..=600).step_by(60).collect());
    s.schedule = Schedule::constant(0.1, 0.0).unwrap();
    let rec = run_trial(&s, &m, None, 0).unwrap();
    let snaps: Vec<ParamVector> = rec.snapshots.values().cloned().collect();
    let d = pairwise_distance_matrix(&snaps).unwrap();
    let lags: Vec<f64> = (1..snaps.len()).map(|k| k as f64).collect();
    let from_start: Vec<f64> = (1..snaps.len()).map(|k| d[0][k]).collect();
    let rho = spearman(&lags, &from_start);
    assert!(rho > 0.9, "spearman {rho}: {from_start:?}");
    for i in 0..snaps.len() {
        assert_eq!(d[i][i], 0.0);
        for j in 0..snaps.len() {
            assert_eq!(d[i][j], d[j][i]);
        }
    }
    let avg = swa_average(&snaps).unwrap();
    assert!(!avg.at_origin);
}

#[test]
fn ensembles_are_reproducible_and_trials_independent() {
    let m = model();
    let s = spec(4, 100, vec![100]);
    let a = run_ensemble(&s, &m, None).unwrap();
    let b = run_ensemble(&s, &m, None).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].snapshots[&100], a[1].snapshots[&100]);
    let mut reseeded = s.clone();
    reseeded.seed += 1;
    let c = run_ensemble(&reseeded, &m, None).unwrap();
    assert_ne!(a[0].snapshots[&100], c[0].snapshots[&100]);
    let mut single = s.clone();
    single.n_trials = 1;
    assert!(run_ensemble(&single, &m, None).is_err());
}

#[test]
fn records_export_csv() {
    let m = model();
    let mut s = spec(2, 50, vec![]);
    s.record.metrics = Metrics::Full;
    let rec = run_trial(&s, &m, None, 0).unwrap();
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    for col in ["step", "norm_sq", "eta", "eff_lr", "train_loss"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    assert_eq!(text.lines().count(), 1 + rec.rows.len());
}
