//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! with its measured values before asserting.

use std::time::{Duration, Instant};

use silab_core::protocols::*;

fn report<R: Report + std::fmt::Debug>(id: u32, title: &str, started: Instant, budget: Duration, r: &R) {
    let elapsed = started.elapsed();
    let within = elapsed <= budget;
    let ok = r.passed() && within;
    let details: Vec<String> = r
        .checks()
        .iter()
        .map(|c| format!("{}={:.4e} (limit {:.4e})", c.name, c.value, c.limit))
        .collect();
    println!(
        "criterion {id} [{title}]: {} in {:.1}s (budget {}s); {}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs(),
        details.join(", ")
    );
    if !ok {
        println!("{r:#?}");
    }
    assert!(r.passed(), "criterion {id} failed checks: {:?}", r.failures());
    assert!(within, "criterion {id} exceeded its {}s budget", budget.as_secs());
}

#[test]
fn criterion_1_scale_invariance_suite() {
    let t = Instant::now();
    let r = run_invariance_suite(&InvarianceSuiteConfig::default()).unwrap();
    report(1, "scale-invariance suite", t, Duration::from_secs(60), &r);
}

#[test]
fn criterion_2_gamma_dynamics() {
    let t = Instant::now();
    let r = run_gamma_check(&GammaConfig::default()).unwrap();
    report(2, "gamma dynamics", t, Duration::from_secs(300), &r);
}

#[test]
fn criterion_3_equivalences() {
    let t = Instant::now();
    let r = run_equivalence(&EquivalenceConfig::default()).unwrap();
    report(3, "optimizer equivalences", t, Duration::from_secs(60), &r);
}

#[test]
fn criterion_4_chaos() {
    let t = Instant::now();
    let r = run_chaos(&ChaosConfig::default()).unwrap();
    report(4, "toy chaos", t, Duration::from_secs(1), &r);
}

#[test]
fn criterion_5_equilibrium_independence() {
    let t = Instant::now();
    let r = run_equilibrium_tv(&EquilibriumConfig::default()).unwrap();
    report(5, "equilibrium independence", t, Duration::from_secs(900), &r);
}

#[test]
fn criterion_6_mixing_time_scaling() {
    let t = Instant::now();
    let r = run_mixing_time(&MixingConfig::default()).unwrap();
    report(6, "mixing-time scaling", t, Duration::from_secs(1200), &r);
}

#[test]
fn criterion_7_effective_lr_rebound() {
    let t = Instant::now();
    let r = run_rebound(&ReboundConfig::default()).unwrap();
    report(7, "effective-LR rebound", t, Duration::from_secs(120), &r);
}

#[test]
fn criterion_8_two_phase() {
    let t = Instant::now();
    let r = run_two_phase_protocol(&TwoPhaseConfig::default()).unwrap();
    report(8, "two-phase training", t, Duration::from_secs(120), &r);
}

#[test]
fn criterion_9_two_phase_ordering() {
    let t = Instant::now();
    let r = run_ordering(&OrderingConfig::default()).unwrap();
    report(9, "warm-phase ordering", t, Duration::from_secs(60), &r);
}
