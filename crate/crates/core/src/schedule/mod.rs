//! Piecewise-constant learning-rate and weight-decay schedules.
//!
//! A schedule starts from `(η₀, λ₀)` and applies [`ScheduleEvent`]s at given
//! steps. The intrinsic LR is always derived as `λ_e = ηλ`; an event on `λ_e`
//! is stored by adjusting `λ`.

mod table;
mod two_phase;

pub use table::{bundled_table, make_table_schedule, parse_cell, ScheduleTable, TableRow};
pub use two_phase::{norm_converged, run_two_phase, TwoPhaseResult, TwoPhaseSpec, WarmPhase};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Eta,
    Lambda,
    LambdaE,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Set,
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    pub step: usize,
    pub target: Target,
    pub action: Action,
    pub value: f64,
}

impl ScheduleEvent {
    pub fn new(step: usize, target: Target, action: Action, value: f64) -> Self {
        ScheduleEvent {
            step,
            target,
            action,
            value,
        }
    }

    pub fn scale(step: usize, target: Target, factor: f64) -> Self {
        ScheduleEvent::new(step, target, Action::Scale, factor)
    }

    pub fn set(step: usize, target: Target, value: f64) -> Self {
        ScheduleEvent::new(step, target, Action::Set, value)
    }
}

/// Hyperparameters in force at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperParams {
    pub eta: f64,
    pub lambda: f64,
    pub lambda_e: f64,
}

impl HyperParams {
    fn new(eta: f64, lambda: f64) -> Self {
        HyperParams {
            eta,
            lambda,
            lambda_e: eta * lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub init_eta: f64,
    pub init_lambda: f64,
    #[serde(default)]
    pub events: Vec<ScheduleEvent>,
}

impl Schedule {
    pub fn constant(eta: f64, lambda: f64) -> Result<Self> {
        Schedule::new(eta, lambda, Vec::new())
    }

    pub fn new(init_eta: f64, init_lambda: f64, events: Vec<ScheduleEvent>) -> Result<Self> {
        let s = Schedule {
            init_eta,
            init_lambda,
            events,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks ordering, factors, and that every prefix yields `η > 0, λ ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        check_state(self.init_eta, self.init_lambda, 0)?;
        for pair in self.events.windows(2) {
            if pair[1].step < pair[0].step {
                return Err(Error::Schedule(format!(
                    "event steps must be non-decreasing ({} after {})",
                    pair[1].step, pair[0].step
                )));
            }
        }
        for e in &self.events {
            if !e.value.is_finite() {
                return Err(Error::Schedule(format!("non-finite value at step {}", e.step)));
            }
            if e.action == Action::Scale && !(e.value > 0.0) {
                return Err(Error::Schedule(format!("scale factors must be positive, got {}", e.value)));
            }
        }
        let mut state = HyperParams::new(self.init_eta, self.init_lambda);
        for group in self.groups() {
            state = apply_group(state, group)?;
        }
        Ok(())
    }

    fn groups(&self) -> impl Iterator<Item = &[ScheduleEvent]> {
        self.events.chunk_by(|a, b| a.step == b.step)
    }

    /// Appends events, which must not precede existing ones.
    pub fn with_events(mut self, events: impl IntoIterator<Item = ScheduleEvent>) -> Result<Self> {
        self.events.extend(events);
        self.validate()?;
        Ok(self)
    }

    /// Every step at which at least one event fires.
    pub fn event_steps(&self) -> Vec<usize> {
        self.groups().map(|g| g[0].step).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Schedule::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Schedule = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn check_state(eta: f64, lambda: f64, step: usize) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Schedule(format!("learning rate must stay positive (step {step}, η = {eta})")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Schedule(format!("weight decay must stay non-negative (step {step}, λ = {lambda})")));
    }
    Ok(())
}

/// Applies all events sharing one step. Events on `η` go first, then `λ`,
/// then `λ_e`; a `λ_e` event is measured against the value before the step
/// and stored as `λ = λ_e/η` with the step's final `η`.
fn apply_group(prev: HyperParams, group: &[ScheduleEvent]) -> Result<HyperParams> {
    let step = group[0].step;
    let touches = |t: Target| group.iter().any(|e| e.target == t);
    if touches(Target::LambdaE) && touches(Target::Lambda) && !touches(Target::Eta) {
        return Err(Error::Schedule(format!(
            "step {step} sets both λ_e and λ without η; the result is ambiguous"
        )));
    }
    let update = |cur: f64, e: &ScheduleEvent| match e.action {
        Action::Set => e.value,
        Action::Scale => cur * e.value,
    };
    let mut eta = prev.eta;
    let mut lambda = prev.lambda;
    for e in group.iter().filter(|e| e.target == Target::Eta) {
        eta = update(eta, e);
    }
    for e in group.iter().filter(|e| e.target == Target::Lambda) {
        lambda = update(lambda, e);
    }
    let mut lambda_e = None;
    for e in group.iter().filter(|e| e.target == Target::LambdaE) {
        lambda_e = Some(update(lambda_e.unwrap_or(prev.lambda_e), e));
    }
    if let Some(le) = lambda_e {
        if !(le >= 0.0) {
            return Err(Error::Schedule(format!("intrinsic LR must stay non-negative (step {step})")));
        }
        check_state(eta, 0.0, step)?;
        lambda = le / eta;
    }
    check_state(eta, lambda, step)?;
    Ok(HyperParams::new(eta, lambda))
}

/// Values in force at `step`: all events with `event.step ≤ step` applied.
pub fn schedule_at(schedule: &Schedule, step: usize) -> Result<HyperParams> {
    let mut state = HyperParams::new(schedule.init_eta, schedule.init_lambda);
    check_state(state.eta, state.lambda, 0)?;
    for group in schedule.groups() {
        if group[0].step > step {
            break;
        }
        state = apply_group(state, group)?;
    }
    Ok(state)
}

/// Evaluates a schedule step by step with amortized constant cost.
#[derive(Debug, Clone)]
pub struct ScheduleCursor<'a> {
    schedule: &'a Schedule,
    next_event: usize,
    state: HyperParams,
}

impl<'a> ScheduleCursor<'a> {
    pub fn new(schedule: &'a Schedule) -> Result<Self> {
        schedule.validate()?;
        Ok(ScheduleCursor {
            schedule,
            next_event: 0,
            state: HyperParams::new(schedule.init_eta, schedule.init_lambda),
        })
    }

    /// Values at `step`; steps must be queried in non-decreasing order.
    pub fn at(&mut self, step: usize) -> Result<HyperParams> {
        let events = &self.schedule.events;
        while self.next_event < events.len() && events[self.next_event].step <= step {
            let s = events[self.next_event].step;
            let end = events[self.next_event..]
                .iter()
                .position(|e| e.step != s)
                .map_or(events.len(), |p| self.next_event + p);
            self.state = apply_group(self.state, &events[self.next_event..end])?;
            self.next_event = end;
        }
        Ok(self.state)
    }
}

fn check_factors(drops: &[(usize, f64)]) -> Result<()> {
    for &(step, f) in drops {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Schedule(format!("decay factor at step {step} must be positive, got {f}")));
        }
    }
    Ok(())
}

/// Divides `η` by each factor at its step.
pub fn make_step_decay(eta: f64, lambda: f64, drops: &[(usize, f64)]) -> Result<Schedule> {
    check_factors(drops)?;
    let events = drops
        .iter()
        .map(|&(s, f)| ScheduleEvent::scale(s, Target::Eta, 1.0 / f))
        .collect();
    Schedule::new(eta, lambda, events)
}

/// Divides `λ` by each factor at its step.
pub fn make_wd_decay(eta: f64, lambda: f64, drops: &[(usize, f64)]) -> Result<Schedule> {
    check_factors(drops)?;
    let events = drops
        .iter()
        .map(|&(s, f)| ScheduleEvent::scale(s, Target::Lambda, 1.0 / f))
        .collect();
    Schedule::new(eta, lambda, events)
}

/// Divides both `η` and `λ` by `√factor`, so `λ_e` drops by the full factor.
pub fn make_mixed_decay(eta: f64, lambda: f64, drops: &[(usize, f64)]) -> Result<Schedule> {
    check_factors(drops)?;
    let events = drops
        .iter()
        .flat_map(|&(s, f)| {
            let r = 1.0 / f.sqrt();
            [ScheduleEvent::scale(s, Target::Eta, r), ScheduleEvent::scale(s, Target::Lambda, r)]
        })
        .collect();
    Schedule::new(eta, lambda, events)
}
