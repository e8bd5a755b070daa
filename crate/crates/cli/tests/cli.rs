use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use silab_cli::config::{ExperimentConfig, ExperimentName, Overrides};

fn silab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn bundled() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn bundled_configs_cover_every_experiment_and_round_trip() {
    let files = bundled();
    assert_eq!(files.len(), ExperimentName::ALL.len());
    for path in files {
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(path.file_stem().unwrap().to_str(), Some(cfg.experiment.as_str()));
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        // The bundled files spell out the reference setting.
        let defaults = ExperimentConfig::new(cfg.experiment).resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.resolve(&Overrides::default()).unwrap(), defaults);
        // Resolving is idempotent through the written form.
        let written = defaults.to_config().unwrap();
        let reparsed = ExperimentConfig::from_toml(&written.to_toml().unwrap()).unwrap();
        assert_eq!(reparsed, written);
        assert_eq!(reparsed.resolve(&Overrides::default()).unwrap(), defaults);
    }
}

#[test]
fn verify_passes_by_default_and_is_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let a = silab(tmp.path(), &["verify", "--out", "a"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stdout));
    let b = silab(tmp.path(), &["verify", "--out", "b"]);
    assert_eq!(code(&b), 0);
    for file in ["summary.json", "checks.csv", "invariance.csv"] {
        let x = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    let s = summary(&tmp.path().join("a"));
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["status"], "pass");
    assert_eq!(s["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_negative_control_names_perpendicularity() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("neg.toml"),
        "experiment = \"verify\"\n[params.invariance]\nobjectives = [\"toy\", \"half-squared-norm\"]\n",
    )
    .unwrap();
    let o = silab(tmp.path(), &["verify", "--config", "neg.toml", "--out", "neg"]);
    assert_eq!(code(&o), 1);
    let s = summary(&tmp.path().join("neg"));
    let failures: Vec<&str> = s["failures"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(failures.contains(&"half-squared-norm/perpendicularity"), "{failures:?}");
    assert!(failures.iter().all(|f| f.starts_with("half-squared-norm/")));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&silab(tmp.path(), &["run", "no-such-experiment"])), 2);
    assert_eq!(code(&silab(tmp.path(), &["run"])), 2);
    assert_eq!(code(&silab(tmp.path(), &["run", "toy-chaos", "--trials", "3"])), 2);
    assert_eq!(code(&silab(tmp.path(), &["run", "toy-chaos", "--config", "missing.toml"])), 2);
    std::fs::write(tmp.path().join("chaos.toml"), "experiment = \"toy-chaos\"\n").unwrap();
    assert_eq!(code(&silab(tmp.path(), &["run", "gamma-check", "--config", "chaos.toml"])), 2);
    std::fs::write(tmp.path().join("typo.toml"), "experiment = \"toy-chaos\"\n[params]\nstpes = 4\n").unwrap();
    assert_eq!(code(&silab(tmp.path(), &["run", "toy-chaos", "--config", "typo.toml"])), 2);
    assert_eq!(code(&silab(tmp.path(), &["--help"])), 0);
}

#[test]
fn runs_are_deterministic_in_config_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        assert_eq!(code(&silab(tmp.path(), &["run", "toy-chaos", "--seed", "3", "--out", out])), 0);
    }
    for file in ["summary.json", "distances.csv", "config.toml"] {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(file)).unwrap(),
            std::fs::read(tmp.path().join("b").join(file)).unwrap(),
            "{file}"
        );
    }
    // The written config reproduces the run on its own.
    let o = silab(tmp.path(), &["run", "toy-chaos", "--config", "a/config.toml", "--out", "c"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        std::fs::read(tmp.path().join("a/summary.json")).unwrap(),
        std::fs::read(tmp.path().join("c/summary.json")).unwrap()
    );
    // A different seed changes the perturbation and therefore the distances.
    assert_eq!(code(&silab(tmp.path(), &["run", "toy-chaos", "--seed", "4", "--out", "d"])), 0);
    assert_ne!(
        std::fs::read(tmp.path().join("a/distances.csv")).unwrap(),
        std::fs::read(tmp.path().join("d/distances.csv")).unwrap()
    );
    assert!(summary(&tmp.path().join("d"))["seed"] == 4);
}

#[test]
fn default_output_directory_is_per_experiment_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&silab(tmp.path(), &["run", "toy-chaos", "--seed", "2"])), 0);
    assert!(tmp.path().join("results/toy-chaos-seed2/summary.json").is_file());
}

#[test]
fn gamma_check_summary_and_three_plot_series() {
    let tmp = tempfile::tempdir().unwrap();
    let o = silab(tmp.path(), &["run", "gamma-check", "--trials", "60", "--out", "runs/gamma"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(&tmp.path().join("runs/gamma"));
    let err = s["metrics"]["max_grid_relative_error"].as_f64().unwrap();
    assert!(err <= 1e-8, "{err}");
    assert_eq!(s["report"]["grid"].as_array().unwrap().len(), 25);

    assert_eq!(code(&silab(tmp.path(), &["export-plots", "runs"])), 0);
    let plots = tmp.path().join("runs/gamma/plots");
    let mut files: Vec<String> = std::fs::read_dir(&plots)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["effective_lr_vs_time.csv", "gamma_grid_error.csv", "norm_vs_time.csv"]);
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(plots.join(f)).unwrap()).collect();
    for bytes in &first {
        let text = std::str::from_utf8(bytes).unwrap();
        assert!(text.starts_with("series,x,y\n"));
        assert!(text.lines().skip(1).all(|l| l.split(',').count() == 3));
    }
    assert_eq!(code(&silab(tmp.path(), &["export-plots", "runs/gamma"])), 0);
    let second: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(plots.join(f)).unwrap()).collect();
    assert_eq!(first, second);
}

#[test]
fn export_plots_needs_results() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    assert_eq!(code(&silab(tmp.path(), &["export-plots", "empty"])), 1);
    assert_eq!(code(&silab(tmp.path(), &["export-plots", "absent"])), 1);
}

#[test]
fn mixing_time_summary_reports_the_fit() {
    let tmp = tempfile::tempdir().unwrap();
    // A small ensemble keeps this fast; the fit is reported whether or not
    // its checks pass.
    let o = silab(tmp.path(), &["run", "mixing-time", "--trials", "4", "--out", "m"]);
    assert!(matches!(code(&o), 0 | 1));
    let s = summary(&tmp.path().join("m"));
    for key in ["slope", "intercept", "r_squared"] {
        assert!(s["metrics"][key].is_number(), "{key}: {}", s["metrics"]);
    }
    assert_eq!(code(&silab(tmp.path(), &["export-plots", "m"])), 0);
    let plot = std::fs::read_to_string(tmp.path().join("m/plots/mixing_steps_vs_inverse_lambda_e.csv")).unwrap();
    assert!(plot.lines().any(|l| l.starts_with("fit,")));
}

#[test]
fn init_scale_flags_the_direct_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = silab(tmp.path(), &["run", "init-scale", "--out", "i"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(&tmp.path().join("i"));
    assert_eq!(s["metrics"]["direct_converged"], false);
    assert_eq!(s["metrics"]["warm_converged"], true);
}

#[test]
fn runtime_failures_keep_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // A negative learning rate passes parsing but fails inside the run.
    std::fs::write(
        tmp.path().join("bad.toml"),
        "experiment = \"lr-rebound\"\n[params]\neta = -0.1\n",
    )
    .unwrap();
    let o = silab(tmp.path(), &["run", "lr-rebound", "--config", "bad.toml", "--out", "bad"]);
    assert_eq!(code(&o), 1);
    let dir = tmp.path().join("bad");
    assert!(dir.join("config.toml").is_file());
    let s = summary(&dir);
    assert_eq!(s["status"], "error");
    assert!(s["error"].as_str().unwrap().contains("run failed"));
}
