use serde::{Deserialize, Serialize};

use super::{Check, Report};
use crate::diagnostics::{chaos_divergence, chaos_gradient_flow};
use crate::error::Result;
use crate::models::ToyLoss2D;
use crate::param::ParamVector;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosConfig {
    pub w0: Vec<f64>,
    pub delta: f64,
    pub steps: usize,
    pub eta: f64,
    pub lambda: f64,
    pub flow_dt_max: f64,
    pub seed: u64,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        ChaosConfig {
            w0: vec![5e-3, 0.5],
            delta: 1e-6,
            steps: 100,
            eta: 0.1,
            lambda: 0.5,
            flow_dt_max: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosReport {
    pub gd_distances: Vec<f64>,
    pub flow_distances: Vec<f64>,
    pub first_step_above_half: Option<usize>,
    /// `max_t d_t/d_0` for the GD twins.
    pub gd_peak_ratio: f64,
    /// `d_T/d_0` for the GD twins. The twins re-synchronize whenever both
    /// fall back onto the minimizing direction, so this endpoint value
    /// depends on where in a burst the horizon ends.
    pub gd_end_ratio: f64,
    pub flow_peak_ratio: f64,
    pub origin_events: usize,
    pub checks: Vec<Check>,
}

impl Report for ChaosReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Twin GD+WD trajectories on the toy loss, and their gradient-flow
/// counterparts started from the same pair of points.
pub fn run_chaos(cfg: &ChaosConfig) -> Result<ChaosReport> {
    let w0 = ParamVector::new(cfg.w0.clone());
    let gd = chaos_divergence(
        &ToyLoss2D,
        &w0,
        cfg.delta,
        cfg.steps,
        cfg.eta,
        cfg.lambda,
        &mut rng::stream(cfg.seed, "chaos", 0),
    )?;
    let flow = chaos_gradient_flow(
        &ToyLoss2D,
        &w0,
        cfg.delta,
        cfg.steps,
        cfg.eta,
        cfg.lambda,
        cfg.flow_dt_max,
        &mut rng::stream(cfg.seed, "chaos", 0),
    )?;
    let first = gd.first_exceeding(0.5);
    let full_run = gd.distances.len() == cfg.steps + 1 && flow.distances.len() == cfg.steps + 1;
    let checks = vec![
        Check::at_most(
            "steps-to-distance-0.5",
            first.map_or(f64::INFINITY, |s| s as f64),
            cfg.steps as f64,
        ),
        Check::at_least("gd-peak-divergence-ratio", gd.peak_ratio(), 1e4),
        Check::at_most("flow-peak-divergence-ratio", flow.peak_ratio(), 10.0),
        Check::holds("no-origin-events", full_run),
    ];
    Ok(ChaosReport {
        first_step_above_half: first,
        gd_peak_ratio: gd.peak_ratio(),
        gd_end_ratio: gd.ratio(),
        flow_peak_ratio: flow.peak_ratio(),
        origin_events: gd.origin_events + flow.origin_events,
        gd_distances: gd.distances,
        flow_distances: flow.distances,
        checks,
    })
}
