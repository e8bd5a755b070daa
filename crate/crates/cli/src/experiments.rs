//! The experiment registry: runs a resolved config and turns its report into
//! a summary plus CSV tables.

use serde::Serialize;
use serde_json::{json, Map, Value};
use silab_core::protocols::{
    run_chaos, run_equilibrium_tv, run_equivalence, run_gamma_check, run_init_scale, run_invariance_suite,
    run_mixing_time, run_ordering, run_rebound, run_two_phase_protocol, Check, Report, TvComparison,
};

use crate::config::{Params, Resolved};
use crate::CliError;

/// Version of the summary JSON layout. Fields may be added without a bump.
pub const SCHEMA_VERSION: u32 = 1;

/// A CSV table; cells are preformatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &str, header: &[&'static str]) -> Self {
        Table {
            file: file.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip form, switching to exponent notation for very large
/// or small magnitudes.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::Number::from_f64(x).map_or_else(|| x.to_string(), |n| n.to_string())
    } else {
        x.to_string()
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// Headline numbers, repeated from the report for quick comparison.
    pub metrics: Map<String, Value>,
    pub report: Value,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn summary(&self, resolved: &Resolved) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": resolved.name.as_str(),
            "seed": resolved.seed,
            "status": if self.passed() { "pass" } else { "fail" },
            "passed": self.passed(),
            "failures": self.failures(),
            "checks": self.checks,
            "metrics": self.metrics,
            "report": self.report,
        })
    }
}

fn to_value<T: Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Runtime(e.to_string()))
}

fn metrics(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn outcome<R: Report>(report: &R, metrics: Map<String, Value>, tables: Vec<Table>) -> Result<Outcome, CliError> {
    Ok(Outcome {
        checks: report.checks().to_vec(),
        metrics,
        report: to_value(report)?,
        tables,
    })
}

fn runtime(e: silab_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn tv_row(table: &mut Table, stage: &str, c: &TvComparison) {
    table.push(vec![
        stage.to_string(),
        c.step.to_string(),
        num(c.tv),
        num(c.split_half_floor),
        num(c.multinomial_floor),
        num(c.baseline),
        num(c.error_a),
        num(c.error_b),
    ]);
}

/// Runs the experiment. Deterministic in the resolved parameters.
pub fn run(resolved: &Resolved) -> Result<Outcome, CliError> {
    match &resolved.params {
        Params::Verify(cfg) => {
            let inv = run_invariance_suite(&cfg.invariance).map_err(runtime)?;
            let eqv = run_equivalence(&cfg.equivalence).map_err(runtime)?;
            let mut dev = Table::new(
                "invariance.csv",
                &["objective", "loss", "grad_scaling", "perpendicularity", "hessian_scaling", "finite_diff"],
            );
            for o in &inv.objectives {
                dev.push(vec![
                    o.objective.clone(),
                    num(o.loss),
                    num(o.grad_scaling),
                    num(o.perpendicularity),
                    num(o.hessian_scaling),
                    num(o.finite_diff),
                ]);
            }
            let mut checks = inv.checks.clone();
            checks.extend(eqv.checks.iter().cloned());
            Ok(Outcome {
                metrics: metrics(&[
                    ("objectives", json!(inv.objectives.len())),
                    ("exp_lr_direction", json!(eqv.exp_lr_direction)),
                ]),
                report: json!({ "invariance": to_value(&inv)?, "equivalence": to_value(&eqv)? }),
                checks,
                tables: vec![dev],
            })
        }
        Params::ToyChaos(cfg) => {
            let r = run_chaos(cfg).map_err(runtime)?;
            let mut t = Table::new("distances.csv", &["step", "gd_distance", "flow_distance"]);
            for (i, (g, f)) in r.gd_distances.iter().zip(&r.flow_distances).enumerate() {
                t.push(vec![i.to_string(), num(*g), num(*f)]);
            }
            let m = metrics(&[
                ("first_step_above_half", json!(r.first_step_above_half)),
                ("gd_peak_ratio", json!(r.gd_peak_ratio)),
                ("flow_peak_ratio", json!(r.flow_peak_ratio)),
            ]);
            outcome(&r, m, vec![t])
        }
        Params::GammaCheck(cfg) => {
            let r = run_gamma_check(cfg).map_err(runtime)?;
            let mut grid = Table::new("gamma_grid.csv", &["gamma0", "lambda_e", "max_relative_error"]);
            for &(g, l, e) in &r.grid {
                grid.push(vec![num(g), num(l), num(e)]);
            }
            let mut ens = Table::new("norm_checkpoints.csv", &["t", "ode", "em_mean", "em_stderr", "z"]);
            for c in &r.checkpoints {
                ens.push(vec![num(c.t), num(c.ode), num(c.mean), num(c.stderr), num(c.z)]);
            }
            let max_z = r.checkpoints.iter().map(|c| c.z).fold(0.0, f64::max);
            let m = metrics(&[
                ("max_grid_relative_error", json!(r.max_grid_error)),
                ("max_checkpoint_z", json!(max_z)),
                ("eta", json!(cfg.eta)),
            ]);
            outcome(&r, m, vec![grid, ens])
        }
        Params::Equivalence(cfg) => {
            let r = run_equivalence(cfg).map_err(runtime)?;
            let mut t = Table::new("directions.csv", &["optimizer", "scale", "max_direction_deviation"]);
            t.push(vec!["exp-lr".into(), String::new(), num(r.exp_lr_direction)]);
            for &(c, d) in &r.adamw_direction {
                t.push(vec!["adamw".into(), num(c), num(d)]);
            }
            for &(c, d) in &r.momentum_direction {
                t.push(vec!["momentum".into(), num(c), num(d)]);
            }
            let m = metrics(&[
                ("exp_lr_direction", json!(r.exp_lr_direction)),
                ("exp_lr_norm_ratio", json!(r.exp_lr_norm_ratio)),
            ]);
            outcome(&r, m, vec![t])
        }
        Params::EquilibriumTv(cfg) => {
            let r = run_equilibrium_tv(cfg).map_err(runtime)?;
            let mut t = Table::new(
                "tv.csv",
                &["stage", "step", "tv", "split_half_floor", "multinomial_floor", "baseline", "error_a", "error_b"],
            );
            tv_row(&mut t, "switch", &r.at_switch);
            tv_row(&mut t, "equilibrium", &r.at_equilibrium);
            tv_row(&mut t, "fine-tune", &r.after_fine_tune);
            let m = metrics(&[
                ("weak_tv", json!(r.at_equilibrium.tv)),
                ("weak_floor", json!(r.at_equilibrium.split_half_floor)),
                ("strong_tv", json!(r.after_fine_tune.tv)),
                ("strong_floor", json!(r.after_fine_tune.split_half_floor)),
            ]);
            outcome(&r, m, vec![t])
        }
        Params::MixingTime(cfg) => {
            let r = run_mixing_time(cfg).map_err(runtime)?;
            let mut t = Table::new(
                "mixing.csv",
                &["lambda_e", "inverse_lambda_e", "ensemble_steps", "mean_trial_steps", "recovered_fraction"],
            );
            for p in &r.points {
                t.push(vec![
                    num(p.lambda_e),
                    num(1.0 / p.lambda_e),
                    opt(p.ensemble_steps),
                    opt(p.mean_trial_steps),
                    num(p.recovered_fraction),
                ]);
            }
            let m = metrics(&[
                ("slope", json!(r.fit.map(|f| f.slope))),
                ("intercept", json!(r.fit.map(|f| f.intercept))),
                ("r_squared", json!(r.fit.map(|f| f.r_squared))),
                ("closed_form_slope", json!(r.closed_form_slope)),
            ]);
            outcome(&r, m, vec![t])
        }
        Params::TwoPhase(cfg) => {
            let r = run_two_phase_protocol(cfg).map_err(runtime)?;
            let mut t = Table::new(
                "history.csv",
                &["step", "phase", "train_loss", "train_acc", "norm_sq", "eta", "eff_lr"],
            );
            for row in &r.history {
                let phase = if row.step < r.transition_step { 1 } else { 2 };
                t.push(vec![
                    row.step.to_string(),
                    phase.to_string(),
                    opt(row.train_loss),
                    opt(row.train_acc),
                    num(row.norm_sq),
                    num(row.eta),
                    num(row.eff_lr),
                ]);
            }
            let m = metrics(&[
                ("transition_step", json!(r.transition_step)),
                ("final_train_acc", json!(r.final_train_acc)),
                ("max_norm_drop", json!(r.max_norm_drop)),
            ]);
            outcome(&r, m, vec![t])
        }
        Params::InitScale(cfg) => {
            let r = run_init_scale(cfg).map_err(runtime)?;
            let mut t = Table::new("runs.csv", &["run", "converged", "phase1_steps", "final_norm_sq"]);
            t.push(vec![
                "direct".into(),
                r.direct_converged.to_string(),
                r.direct_steps.to_string(),
                num(r.direct_final_norm_sq),
            ]);
            t.push(vec![
                "warm".into(),
                r.warm_converged.to_string(),
                r.warm_total_steps.to_string(),
                num(r.warm_final_norm_sq),
            ]);
            let m = metrics(&[
                ("direct_converged", json!(r.direct_converged)),
                ("warm_converged", json!(r.warm_converged)),
                ("warm_total_steps", json!(r.warm_total_steps)),
            ]);
            outcome(&r, m, vec![t])
        }
        Params::LrRebound(cfg) => {
            let r = run_rebound(cfg).map_err(runtime)?;
            let mut t = Table::new("rebound.csv", &["quantity", "value"]);
            for (k, v) in [
                ("eff_lr_before", r.eff_lr_before),
                ("eff_lr_instant_after", r.eff_lr_instant_after),
                ("eff_lr_after", r.eff_lr_after),
                ("ratio", r.ratio),
                ("expected_ratio", r.expected_ratio),
            ] {
                t.push(vec![k.into(), num(v)]);
            }
            let m = metrics(&[("ratio", json!(r.ratio)), ("expected_ratio", json!(r.expected_ratio))]);
            outcome(&r, m, vec![t])
        }
        Params::NormOrdering(cfg) => {
            let r = run_ordering(cfg).map_err(runtime)?;
            let mut t = Table::new(
                "draws.csv",
                &[
                    "draw",
                    "g0",
                    "eta",
                    "lambda",
                    "k",
                    "rho",
                    "predicted_direct",
                    "predicted_two_phase",
                    "measured_direct",
                    "measured_two_phase",
                ],
            );
            for (i, d) in r.draws.iter().enumerate() {
                t.push(vec![
                    i.to_string(),
                    num(d.g0),
                    num(d.eta),
                    num(d.lambda),
                    num(d.k),
                    num(d.rho),
                    num(d.predicted_direct),
                    num(d.predicted_two_phase),
                    num(d.measured_direct),
                    num(d.measured_two_phase),
                ]);
            }
            let m = metrics(&[("draws", json!(r.draws.len()))]);
            outcome(&r, m, vec![t])
        }
    }
}

/// The table of check results written next to every summary.
pub fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new("checks.csv", &["name", "value", "limit", "passed"]);
    for c in checks {
        t.push(vec![c.name.clone(), num(c.value), num(c.limit), c.passed.to_string()]);
    }
    t
}
