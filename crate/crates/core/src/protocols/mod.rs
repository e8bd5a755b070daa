//! Reproducible experiment protocols. Each protocol takes a serializable
//! configuration (whose `Default` is the reference setting), runs
//! deterministically from its seed, and returns a report listing named
//! checks with their measured values and limits.

mod chaos;
mod equilibrium;
mod equivalence;
mod gamma;
mod invariance_suite;
mod mixing;
mod ordering;
mod rebound;
mod two_phase;

pub use chaos::{run_chaos, ChaosConfig, ChaosReport};
pub use equilibrium::{run_equilibrium_tv, EquilibriumConfig, EquilibriumReport, TvComparison};
pub use equivalence::{run_equivalence, EquivalenceConfig, EquivalenceReport};
pub use gamma::{run_gamma_check, GammaConfig, GammaReport};
pub use invariance_suite::{run_invariance_suite, InvarianceSuiteConfig, InvarianceSuiteReport, ObjectiveKind};
pub use mixing::{run_mixing_time, MixingConfig, MixingReport};
pub use ordering::{run_ordering, OrderingConfig, OrderingReport};
pub use rebound::{run_rebound, ReboundConfig, ReboundReport};
pub use two_phase::{run_init_scale, run_two_phase_protocol, InitScaleConfig, InitScaleReport, TwoPhaseConfig, TwoPhaseReport};

use serde::{Deserialize, Serialize};

/// One named assertion: passes when `value` is on the right side of `limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ limit` (NaN fails).
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    /// Passes when `value ≥ limit` (NaN fails).
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            passed: value >= limit,
        }
    }

    /// A boolean condition, reported as 1 (true) against a limit of 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            limit: 1.0,
            passed: ok,
        }
    }
}

/// Implemented by every protocol report.
pub trait Report: Serialize {
    fn checks(&self) -> &[Check];

    fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    fn failures(&self) -> Vec<&str> {
        self.checks().iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Dataset recipe shared by the classifier protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub n: usize,
    pub features: usize,
    pub classes: usize,
    pub separation: f64,
    pub seed: u64,
}

impl DataSpec {
    pub fn build(&self) -> crate::Result<crate::models::Dataset> {
        crate::models::make_gaussian_mixture(self.n, self.features, self.classes, self.separation, self.seed)
    }
}
