//! Schedule tables: one row of cells per schedule, one column per epoch.
//!
//! Cell grammar, comma separated: `LR/4`, `LR×4` (also `x` or `*`), `WD=0`,
//! and a bare target such as the `LR` in `LR,WD×4`, which shares the next
//! operation. `-` means no change.

use serde::{Deserialize, Serialize};

use super::{Action, Schedule, ScheduleEvent, Target};
use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/random_history.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTable {
    pub init_eta: f64,
    pub init_lambda: f64,
    pub epochs: Vec<usize>,
    pub rows: Vec<TableRow>,
}

impl ScheduleTable {
    pub fn from_toml(text: &str) -> Result<Self> {
        let t: ScheduleTable = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for row in &t.rows {
            if row.cells.len() != t.epochs.len() {
                return Err(Error::Schedule(format!(
                    "row {} has {} cells for {} epochs",
                    row.name,
                    row.cells.len(),
                    t.epochs.len()
                )));
            }
        }
        Ok(t)
    }

    pub fn row(&self, name: &str) -> Result<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::Schedule(format!("no row named {name}")))
    }

    /// The schedule of row `name`, with epochs converted to steps.
    pub fn schedule(&self, name: &str, steps_per_epoch: usize) -> Result<Schedule> {
        make_table_schedule(self, &self.row(name)?.cells, steps_per_epoch)
    }
}

/// The five random-history schedules (initial LR 0.4, WD 5e-4).
pub fn bundled_table() -> ScheduleTable {
    ScheduleTable::from_toml(BUNDLED).expect("bundled schedule table parses")
}

fn parse_target(s: &str) -> Result<Target> {
    match s {
        "LR" => Ok(Target::Eta),
        "WD" => Ok(Target::Lambda),
        "IWD" | "LRxWD" => Ok(Target::LambdaE),
        other => Err(Error::Schedule(format!("unknown schedule target {other:?}"))),
    }
}

fn parse_value(s: &str, cell: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Schedule(format!("malformed number {s:?} in cell {cell:?}")))
}

/// Parses one cell into `(target, action, value)` triples.
pub fn parse_cell(cell: &str) -> Result<Vec<(Target, Action, f64)>> {
    let compact: String = cell.chars().filter(|c| !c.is_whitespace()).collect();
    if compact == "-" || compact.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut pending = Vec::new();
    for token in compact.split(',') {
        let op = token.char_indices().find(|(_, c)| matches!(c, '/' | '×' | 'x' | '*' | '='));
        let Some((pos, op)) = op.filter(|&(pos, _)| pos > 0) else {
            pending.push(parse_target(token)?);
            continue;
        };
        let target = parse_target(&token[..pos])?;
        let value = parse_value(&token[pos + op.len_utf8()..], cell)?;
        let (action, value) = match op {
            '/' => (Action::Scale, 1.0 / value),
            '=' => (Action::Set, value),
            _ => (Action::Scale, value),
        };
        if action == Action::Scale && !(value > 0.0 && value.is_finite()) {
            return Err(Error::Schedule(format!("non-positive factor in cell {cell:?}")));
        }
        for t in pending.drain(..) {
            out.push((t, action, value));
        }
        out.push((target, action, value));
    }
    if !pending.is_empty() {
        return Err(Error::Schedule(format!("cell {cell:?} ends without an operation")));
    }
    Ok(out)
}

/// One event per parsed operation, placed at `epoch × steps_per_epoch`.
pub fn make_table_schedule(table: &ScheduleTable, cells: &[String], steps_per_epoch: usize) -> Result<Schedule> {
    if cells.len() != table.epochs.len() {
        return Err(Error::Schedule(format!(
            "row has {} cells for {} epochs",
            cells.len(),
            table.epochs.len()
        )));
    }
    let mut events = Vec::new();
    for (cell, &epoch) in cells.iter().zip(&table.epochs) {
        for (target, action, value) in parse_cell(cell)? {
            events.push(ScheduleEvent::new(epoch * steps_per_epoch, target, action, value));
        }
    }
    Schedule::new(table.init_eta, table.init_lambda, events)
}
