//! Long-format plot data (`series,x,y`) derived from run summaries.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::ExperimentName;
use crate::experiments::num;
use crate::CliError;

/// One plot file: rows of `(series, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub file: &'static str,
    pub rows: Vec<(String, f64, f64)>,
}

impl PlotData {
    fn new(file: &'static str) -> Self {
        PlotData { file, rows: Vec::new() }
    }

    fn add(&mut self, series: &str, x: Option<f64>, y: Option<f64>) {
        if let (Some(x), Some(y)) = (x, y) {
            self.rows.push((series.to_string(), x, y));
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,x,y\n");
        for (s, x, y) in &self.rows {
            out.push_str(&format!("{s},{},{}\n", num(*x), num(*y)));
        }
        out
    }
}

fn f(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn items(v: &Value) -> &[Value] {
    v.as_array().map(Vec::as_slice).unwrap_or(&[])
}

/// Plot files for one summary. Experiments without a figure analogue give
/// none.
pub fn plots_for(summary: &Value) -> Result<Vec<PlotData>, CliError> {
    let name = summary["experiment"]
        .as_str()
        .and_then(ExperimentName::parse)
        .ok_or_else(|| CliError::Input("summary has no known experiment name".into()))?;
    let r = &summary["report"];
    if r.is_null() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    match name {
        ExperimentName::Verify => {}
        ExperimentName::ToyChaos => {
            let mut p = PlotData::new("distance_vs_step.csv");
            for (key, series) in [("gd_distances", "gd-wd"), ("flow_distances", "gradient-flow")] {
                for (i, d) in items(&r[key]).iter().enumerate() {
                    p.add(series, Some(i as f64), f(d));
                }
            }
            out.push(p);
        }
        ExperimentName::GammaCheck => {
            let mut grid = PlotData::new("gamma_grid_error.csv");
            for g in items(&r["grid"]) {
                let series = format!("lambda_e={}", num(f(&g[1]).unwrap_or(f64::NAN)));
                grid.add(&series, f(&g[0]), f(&g[2]));
            }
            let eta = f(&summary["metrics"]["eta"]);
            let mut norm = PlotData::new("norm_vs_time.csv");
            let mut eff = PlotData::new("effective_lr_vs_time.csv");
            for c in items(&r["checkpoints"]) {
                let t = f(&c["t"]);
                for (key, series) in [("ode", "ode"), ("mean", "em-mean")] {
                    let g = f(&c[key]);
                    norm.add(series, t, g);
                    eff.add(series, t, eta.zip(g).map(|(e, g)| e / g));
                }
            }
            out.extend([grid, norm, eff]);
        }
        ExperimentName::Equivalence => {
            let mut p = PlotData::new("deviation_vs_scale.csv");
            for (key, series) in [("adamw_direction", "adamw"), ("momentum_direction", "momentum")] {
                for pair in items(&r[key]) {
                    p.add(series, f(&pair[0]), f(&pair[1]));
                }
            }
            out.push(p);
        }
        ExperimentName::EquilibriumTv => {
            let mut p = PlotData::new("tv_vs_step.csv");
            for stage in ["at_switch", "at_equilibrium", "after_fine_tune"] {
                let c = &r[stage];
                let step = f(&c["step"]);
                for (key, series) in [
                    ("tv", "tv"),
                    ("split_half_floor", "split-half-floor"),
                    ("multinomial_floor", "multinomial-floor"),
                    ("baseline", "baseline"),
                ] {
                    p.add(series, step, f(&c[key]));
                }
            }
            out.push(p);
        }
        ExperimentName::MixingTime => {
            let mut p = PlotData::new("mixing_steps_vs_inverse_lambda_e.csv");
            let fit = &r["fit"];
            for pt in items(&r["points"]) {
                let x = f(&pt["lambda_e"]).map(|l| 1.0 / l);
                p.add("ensemble", x, f(&pt["ensemble_steps"]));
                p.add("mean-trial", x, f(&pt["mean_trial_steps"]));
                let line = f(&fit["intercept"]).zip(f(&fit["slope"]));
                p.add("fit", x, line.zip(x).map(|((a, b), x)| a + b * x));
            }
            out.push(p);
        }
        ExperimentName::TwoPhase => {
            let mut acc = PlotData::new("accuracy_vs_step.csv");
            let mut norm = PlotData::new("norm_vs_step.csv");
            let mut eff = PlotData::new("effective_lr_vs_step.csv");
            let transition = f(&r["transition_step"]).unwrap_or(f64::INFINITY);
            for row in items(&r["history"]) {
                let step = f(&row["step"]);
                let series = if step.is_some_and(|s| s < transition) { "phase-1" } else { "phase-2" };
                acc.add(series, step, f(&row["train_acc"]));
                norm.add(series, step, f(&row["norm_sq"]));
                eff.add(series, step, f(&row["eff_lr"]));
            }
            out.extend([acc, norm, eff]);
        }
        ExperimentName::InitScale => {
            let mut p = PlotData::new("final_norm_vs_steps.csv");
            p.add("direct", f(&r["direct_steps"]), f(&r["direct_final_norm_sq"]));
            p.add("warm", f(&r["warm_total_steps"]), f(&r["warm_final_norm_sq"]));
            out.push(p);
        }
        ExperimentName::LrRebound => {
            let mut p = PlotData::new("effective_lr_vs_phase.csv");
            p.add("measured", Some(0.0), f(&r["eff_lr_before"]));
            p.add("measured", Some(1.0), f(&r["eff_lr_instant_after"]));
            p.add("measured", Some(2.0), f(&r["eff_lr_after"]));
            let before = f(&r["eff_lr_before"]);
            let expected = before.zip(f(&r["expected_ratio"])).map(|(b, k)| b * k);
            p.add("stationary-prediction", Some(0.0), before);
            p.add("stationary-prediction", Some(2.0), expected);
            out.push(p);
        }
        ExperimentName::NormOrdering => {
            let mut p = PlotData::new("convergence_time_vs_draw.csv");
            for (i, d) in items(&r["draws"]).iter().enumerate() {
                let x = Some(i as f64);
                p.add("measured-direct", x, f(&d["measured_direct"]));
                p.add("measured-two-phase", x, f(&d["measured_two_phase"]));
                p.add("predicted-direct", x, f(&d["predicted_direct"]));
                p.add("predicted-two-phase", x, f(&d["predicted_two_phase"]));
            }
            out.push(p);
        }
    }
    Ok(out)
}

/// Run directories under `root`: `root` itself when it holds a summary,
/// otherwise its immediate subdirectories that do, in name order.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !root.is_dir() {
        return Err(CliError::Input(format!("{} is not a directory", root.display())));
    }
    if root.join("summary.json").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut runs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| CliError::Input(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("summary.json").is_file())
        .collect();
    runs.sort();
    Ok(runs)
}

/// Writes `plots/*.csv` inside every run directory under `root` and returns
/// the files written.
pub fn export(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let runs = find_runs(root)?;
    if runs.is_empty() {
        return Err(CliError::Input(format!("no summary.json found under {}", root.display())));
    }
    let mut written = Vec::new();
    for run in runs {
        let text = std::fs::read_to_string(run.join("summary.json")).map_err(|e| CliError::Input(e.to_string()))?;
        let summary: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", run.join("summary.json").display())))?;
        let plots = plots_for(&summary)?;
        if plots.is_empty() {
            continue;
        }
        let dir = run.join("plots");
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Input(e.to_string()))?;
        for p in plots {
            let path = dir.join(p.file);
            std::fs::write(&path, p.to_csv()).map_err(|e| CliError::Input(e.to_string()))?;
            written.push(path);
        }
    }
    Ok(written)
}
