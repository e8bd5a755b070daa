use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::param::ParamVector;

/// Measurements taken at one step, describing the state after `step`
/// updates and the learning rate about to be applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecordRow {
    pub step: usize,
    pub train_loss: Option<f64>,
    pub train_acc: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_acc: Option<f64>,
    pub norm_sq: f64,
    pub eta: f64,
    pub eff_lr: f64,
    pub trace_est: Option<f64>,
}

impl RecordRow {
    /// A row with only the norm columns filled in.
    pub fn norm_only(step: usize, norm_sq: f64, eta: f64) -> Self {
        RecordRow {
            step,
            train_loss: None,
            train_acc: None,
            test_loss: None,
            test_acc: None,
            norm_sq,
            eta,
            eff_lr: eta / norm_sq,
            trace_est: None,
        }
    }
}

/// Time series of one training run plus parameter snapshots.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub rows: Vec<RecordRow>,
    #[serde(skip)]
    pub snapshots: BTreeMap<usize, ParamVector>,
}

impl TrajectoryRecord {
    pub fn new() -> Self {
        TrajectoryRecord::default()
    }

    pub fn push(&mut self, row: RecordRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(invalid(format!("record steps must increase ({} after {})", row.step, last.step)));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn snapshot(&self, step: usize) -> Option<&ParamVector> {
        self.snapshots.get(&step)
    }

    pub fn last_row(&self) -> Option<&RecordRow> {
        self.rows.last()
    }

    pub fn steps(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.step).collect()
    }

    pub fn norm_sq(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.norm_sq).collect()
    }

    pub fn eff_lr(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eff_lr).collect()
    }

    /// Rows are written with empty fields for missing measurements.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path).map_err(Error::from)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_must_increase() {
        let mut rec = TrajectoryRecord::new();
        rec.push(RecordRow::norm_only(0, 1.0, 0.1)).unwrap();
        assert!(rec.push(RecordRow::norm_only(0, 1.0, 0.1)).is_err());
        rec.push(RecordRow::norm_only(5, 2.0, 0.1)).unwrap();
        assert_eq!(rec.steps(), vec![0, 5]);
        assert!((rec.eff_lr()[1] - 0.05).abs() < 1e-17);
    }

    #[test]
    fn csv_header() {
        let mut rec = TrajectoryRecord::new();
        rec.push(RecordRow::norm_only(0, 2.0, 0.1)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "step,train_loss,train_acc,test_loss,test_acc,norm_sq,eta,eff_lr,trace_est"
        );
        assert!(text.lines().nth(1).unwrap().starts_with("0,,,,,2.0,0.1,0.05,"));
    }
}
