//! Experiment configuration files.
//!
//! A config names one experiment and carries that experiment's parameters in
//! a `[params]` table. Any parameter left out takes its reference value, so
//! an empty `[params]` table reproduces the bundled setting:
//!
//! ```toml
//! experiment = "gamma-check"
//! seed = 3
//! output_dir = "results/gamma"
//!
//! [params]
//! trials = 400
//! ```
//!
//! Nested tables inside `[params]` (datasets, models, phase specs) must be
//! given in full when present.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use silab_core::protocols::{
    ChaosConfig, EquilibriumConfig, EquivalenceConfig, GammaConfig, InitScaleConfig, InvarianceSuiteConfig,
    MixingConfig, OrderingConfig, ReboundConfig, TwoPhaseConfig,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    /// Scale-invariance and equivalence property suites.
    Verify,
    ToyChaos,
    GammaCheck,
    Equivalence,
    EquilibriumTv,
    MixingTime,
    TwoPhase,
    InitScale,
    LrRebound,
    NormOrdering,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 10] = [
        ExperimentName::Verify,
        ExperimentName::ToyChaos,
        ExperimentName::GammaCheck,
        ExperimentName::Equivalence,
        ExperimentName::EquilibriumTv,
        ExperimentName::MixingTime,
        ExperimentName::TwoPhase,
        ExperimentName::InitScale,
        ExperimentName::LrRebound,
        ExperimentName::NormOrdering,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Verify => "verify",
            ExperimentName::ToyChaos => "toy-chaos",
            ExperimentName::GammaCheck => "gamma-check",
            ExperimentName::Equivalence => "equivalence",
            ExperimentName::EquilibriumTv => "equilibrium-tv",
            ExperimentName::MixingTime => "mixing-time",
            ExperimentName::TwoPhase => "two-phase",
            ExperimentName::InitScale => "init-scale",
            ExperimentName::LrRebound => "lr-rebound",
            ExperimentName::NormOrdering => "norm-ordering",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ExperimentName::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The on-disk form of a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    /// Global seed; replaces the experiment's own `seed` parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Replaces the experiment's trial count, where it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default)]
    pub params: toml::Table,
}

/// Parameters of `verify`: both property suites.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub invariance: InvarianceSuiteConfig,
    pub equivalence: EquivalenceConfig,
}

/// Typed parameters of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Verify(VerifyConfig),
    ToyChaos(ChaosConfig),
    GammaCheck(GammaConfig),
    Equivalence(EquivalenceConfig),
    EquilibriumTv(EquilibriumConfig),
    MixingTime(MixingConfig),
    TwoPhase(TwoPhaseConfig),
    InitScale(InitScaleConfig),
    LrRebound(ReboundConfig),
    NormOrdering(OrderingConfig),
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

/// A config with every parameter filled in and overrides applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub name: ExperimentName,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub params: Params,
}

fn config_error(msg: impl fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

fn typed<T: DeserializeOwned>(table: &toml::Table) -> Result<T, CliError> {
    table.clone().try_into().map_err(config_error)
}

fn to_table<T: Serialize>(value: &T) -> Result<toml::Table, CliError> {
    toml::Table::try_from(value).map_err(config_error)
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentName) -> Self {
        ExperimentConfig {
            experiment,
            seed: None,
            output_dir: None,
            trials: None,
            params: toml::Table::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(config_error)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(config_error)
    }

    /// Fills in defaults and applies `overrides`, then the file's own
    /// top-level values.
    pub fn resolve(&self, overrides: &Overrides) -> Result<Resolved, CliError> {
        let p = &self.params;
        let mut params = match self.experiment {
            ExperimentName::Verify => Params::Verify(typed(p)?),
            ExperimentName::ToyChaos => Params::ToyChaos(typed(p)?),
            ExperimentName::GammaCheck => Params::GammaCheck(typed(p)?),
            ExperimentName::Equivalence => Params::Equivalence(typed(p)?),
            ExperimentName::EquilibriumTv => Params::EquilibriumTv(typed(p)?),
            ExperimentName::MixingTime => Params::MixingTime(typed(p)?),
            ExperimentName::TwoPhase => Params::TwoPhase(typed(p)?),
            ExperimentName::InitScale => Params::InitScale(typed(p)?),
            ExperimentName::LrRebound => Params::LrRebound(typed(p)?),
            ExperimentName::NormOrdering => Params::NormOrdering(typed(p)?),
        };
        if let Some(seed) = overrides.seed.or(self.seed) {
            params.set_seed(seed);
        }
        if let Some(n) = overrides.trials.or(self.trials) {
            params.set_trials(n)?;
        }
        let seed = params.seed();
        let output_dir = overrides
            .output_dir
            .clone()
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("results").join(format!("{}-seed{seed}", self.experiment)));
        Ok(Resolved {
            name: self.experiment,
            seed,
            output_dir,
            params,
        })
    }
}

impl Params {
    pub fn seed(&self) -> u64 {
        match self {
            Params::Verify(c) => c.invariance.seed,
            Params::ToyChaos(c) => c.seed,
            Params::GammaCheck(c) => c.seed,
            Params::Equivalence(c) => c.seed,
            Params::EquilibriumTv(c) => c.seed,
            Params::MixingTime(c) => c.seed,
            Params::TwoPhase(c) => c.seed,
            Params::InitScale(c) => c.seed,
            Params::LrRebound(c) => c.seed,
            Params::NormOrdering(c) => c.seed,
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            Params::Verify(c) => {
                c.invariance.seed = seed;
                c.equivalence.seed = seed;
            }
            Params::ToyChaos(c) => c.seed = seed,
            Params::GammaCheck(c) => c.seed = seed,
            Params::Equivalence(c) => c.seed = seed,
            Params::EquilibriumTv(c) => c.seed = seed,
            Params::MixingTime(c) => c.seed = seed,
            Params::TwoPhase(c) => c.seed = seed,
            Params::InitScale(c) => c.seed = seed,
            Params::LrRebound(c) => c.seed = seed,
            Params::NormOrdering(c) => c.seed = seed,
        }
    }

    fn set_trials(&mut self, n: usize) -> Result<(), CliError> {
        match self {
            Params::GammaCheck(c) => c.trials = n,
            Params::EquilibriumTv(c) => c.trials = n,
            Params::MixingTime(c) => c.trials = n,
            Params::LrRebound(c) => c.trials = n,
            Params::NormOrdering(c) => c.draws = n,
            _ => return Err(config_error("this experiment has no trial count to override")),
        }
        Ok(())
    }

    fn table(&self) -> Result<toml::Table, CliError> {
        match self {
            Params::Verify(c) => to_table(c),
            Params::ToyChaos(c) => to_table(c),
            Params::GammaCheck(c) => to_table(c),
            Params::Equivalence(c) => to_table(c),
            Params::EquilibriumTv(c) => to_table(c),
            Params::MixingTime(c) => to_table(c),
            Params::TwoPhase(c) => to_table(c),
            Params::InitScale(c) => to_table(c),
            Params::LrRebound(c) => to_table(c),
            Params::NormOrdering(c) => to_table(c),
        }
    }
}

impl Resolved {
    /// The fully explicit config that reproduces this run. Its seed lives in
    /// `params`, so the top-level seed is left out, and so is the output
    /// directory, so that rerunning it never overwrites the original.
    pub fn to_config(&self) -> Result<ExperimentConfig, CliError> {
        Ok(ExperimentConfig {
            experiment: self.name,
            seed: None,
            output_dir: None,
            trials: None,
            params: self.params.table()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in ExperimentName::ALL {
            assert_eq!(ExperimentName::parse(n.as_str()), Some(n));
            let cfg = ExperimentConfig::new(n);
            let text = cfg.to_toml().unwrap();
            assert!(text.contains(&format!("experiment = \"{n}\"")));
        }
        assert_eq!(ExperimentName::parse("nope"), None);
    }

    #[test]
    fn partial_params_keep_defaults() {
        let cfg = ExperimentConfig::from_toml("experiment = \"gamma-check\"\n[params]\ntrials = 7\n").unwrap();
        let r = cfg.resolve(&Overrides::default()).unwrap();
        match r.params {
            Params::GammaCheck(g) => {
                assert_eq!(g.trials, 7);
                assert_eq!(g.sigma2, GammaConfig::default().sigma2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = ExperimentConfig::from_toml("experiment = \"mixing-time\"\nseed = 4\ntrials = 3\n").unwrap();
        let r = cfg.resolve(&Overrides::default()).unwrap();
        assert_eq!(r.seed, 4);
        assert_eq!(r.output_dir, PathBuf::from("results/mixing-time-seed4"));
        let o = Overrides {
            seed: Some(9),
            trials: Some(5),
            output_dir: Some("x".into()),
        };
        let r = cfg.resolve(&o).unwrap();
        assert_eq!((r.seed, r.output_dir.as_path()), (9, Path::new("x")));
        match r.params {
            Params::MixingTime(m) => assert_eq!(m.trials, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"unknown\"").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"toy-chaos\"\ncolour = 1").is_err());
        let typo = ExperimentConfig::from_toml("experiment = \"toy-chaos\"\n[params]\nstpes = 3\n").unwrap();
        assert!(typo.resolve(&Overrides::default()).is_err());
        let no_trials = ExperimentConfig::new(ExperimentName::ToyChaos);
        let o = Overrides {
            trials: Some(3),
            ..Overrides::default()
        };
        assert!(matches!(no_trials.resolve(&o), Err(CliError::Config(_))));
    }
}
