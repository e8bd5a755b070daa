//! The `silab` command line: config-driven experiment runs with CSV and
//! JSON outputs.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a run
//! errors, 2 for usage and config errors.

pub mod config;
pub mod experiments;
pub mod plots;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ExperimentConfig, ExperimentName, Overrides, Resolved};
use experiments::{Outcome, Table, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad or unreadable configuration; exit code 2.
    Config(String),
    /// Missing or malformed inputs to `export-plots`; exit code 1.
    Input(String),
    /// The experiment itself failed; exit code 1.
    Runtime(String),
    /// Results could not be written; exit code 1.
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
            CliError::Output(m) => write!(f, "cannot write results: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "silab", version, about = "Scale-invariant training dynamics experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (TOML); its `experiment` must match the command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Global seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: results/<experiment>-seed<seed>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trial count, for experiments that run ensembles.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scale-invariance and optimizer-equivalence property suites.
    Verify(RunArgs),
    /// Run one registered experiment.
    Run {
        #[arg(value_enum)]
        name: ExperimentName,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Write long-format plot CSVs for every run under a results directory.
    ExportPlots { results: PathBuf },
    /// Print an experiment's fully explicit default config.
    ShowConfig {
        #[arg(value_enum)]
        name: ExperimentName,
    },
}

fn load_config(name: ExperimentName, args: &RunArgs) -> Result<Resolved, CliError> {
    let cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != name {
                return Err(CliError::Config(format!(
                    "{} configures {}, not {name}",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(name),
    };
    cfg.resolve(&Overrides {
        seed: args.seed,
        trials: args.trials,
        output_dir: args.out.clone(),
    })
}

fn write_table(dir: &Path, table: &Table) -> Result<(), CliError> {
    let out = |e: csv::Error| CliError::Output(e.to_string());
    let mut w = csv::Writer::from_path(dir.join(&table.file)).map_err(out)?;
    w.write_record(&table.header).map_err(out)?;
    for row in &table.rows {
        w.write_record(row).map_err(out)?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// Runs a resolved experiment and writes `config.toml`, its CSV tables,
/// `checks.csv` and `summary.json` into the output directory. The config is
/// written first, so a failed run still leaves it behind together with an
/// error summary.
pub fn execute(resolved: &Resolved) -> Result<Outcome, CliError> {
    let dir = &resolved.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let config_text = resolved.to_config()?.to_toml()?;
    std::fs::write(dir.join("config.toml"), config_text).map_err(|e| CliError::Output(e.to_string()))?;
    let outcome = match experiments::run(resolved) {
        Ok(o) => o,
        Err(e) => {
            let summary = json!({
                "schema_version": SCHEMA_VERSION,
                "experiment": resolved.name.as_str(),
                "seed": resolved.seed,
                "status": "error",
                "passed": false,
                "error": e.to_string(),
            });
            write_json(&dir.join("summary.json"), &summary)?;
            return Err(e);
        }
    };
    for table in &outcome.tables {
        write_table(dir, table)?;
    }
    write_table(dir, &experiments::checks_table(&outcome.checks))?;
    write_json(&dir.join("summary.json"), &outcome.summary(resolved))?;
    Ok(outcome)
}

fn run_and_report(name: ExperimentName, args: &RunArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let resolved = load_config(name, args)?;
    let outcome = execute(&resolved)?;
    for c in &outcome.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{verdict} {} = {:e} (limit {:e})", c.name, c.value, c.limit);
    }
    let passed = outcome.passed();
    let _ = writeln!(
        out,
        "{name}: {} ({} checks), results in {}",
        if passed { "pass" } else { "FAIL" },
        outcome.checks.len(),
        resolved.output_dir.display()
    );
    Ok(if passed { 0 } else { 1 })
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Verify(args) => run_and_report(ExperimentName::Verify, &args, out),
        Command::Run { name, args } => run_and_report(name, &args, out),
        Command::ExportPlots { results } => {
            let files = plots::export(&results)?;
            for f in &files {
                let _ = writeln!(out, "{}", f.display());
            }
            Ok(0)
        }
        Command::ShowConfig { name } => {
            let resolved = ExperimentConfig::new(name).resolve(&Overrides::default())?;
            let _ = write!(out, "{}", resolved.to_config()?.to_toml()?);
            Ok(0)
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "silab: {e}");
            e.exit_code()
        }
    }
}
