//! Synthetic classification data.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(invalid(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if inputs.len() < 2 {
            return Err(invalid("a dataset needs at least two samples"));
        }
        let p = inputs[0].len();
        if p == 0 || inputs.iter().any(|x| x.len() != p) {
            return Err(invalid("all inputs must share a nonzero feature count"));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(invalid(format!("label {y} out of range for {num_classes} classes")));
        }
        Ok(Dataset {
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// CSV with a header of `x0..x{p-1}` followed by `label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.num_features()).map(|j| format!("x{j}")).collect();
        header.push("label".to_string());
        out.write_record(&header)?;
        for (x, y) in self.inputs.iter().zip(&self.labels) {
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            row.push(y.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().last() != Some("label") || header.len() < 2 {
            return Err(Error::Parse(
                "dataset CSV must end with a `label` column".into(),
            ));
        }
        let p = header.len() - 1;
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let x = (0..p)
                .map(|j| record[j].trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            let y = record[p]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            inputs.push(x);
            labels.push(y);
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Dataset::new(inputs, labels, k)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }
}

/// Class means at distance `separation` from the origin.
fn class_means(p: usize, k: usize, separation: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut means = vec![vec![0.0; p]; k];
    match p {
        1 => {
            if k > 2 {
                return Err(invalid("one feature supports at most two classes"));
            }
            means[0][0] = separation;
            if k == 2 {
                means[1][0] = -separation;
            }
        }
        2 => {
            for (c, m) in means.iter_mut().enumerate() {
                let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
                m[0] = separation * angle.cos();
                m[1] = separation * angle.sin();
            }
        }
        _ if k <= 2 * p => {
            for (c, m) in means.iter_mut().enumerate() {
                m[c / 2] = if c % 2 == 0 { separation } else { -separation };
            }
        }
        _ => {
            let mut rng = rng::stream(seed, "class-means", 0);
            for m in means.iter_mut() {
                let dir: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (mj, dj) in m.iter_mut().zip(dir) {
                    *mj = separation * dj / norm;
                }
            }
        }
    }
    Ok(means)
}

/// `K` Gaussian classes with unit isotropic noise around means on a sphere of
/// radius `separation`. Labels cycle `0..K`, so every class is present.
pub fn make_gaussian_mixture(
    n: usize,
    p: usize,
    k: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if k == 0 || n < k || n < 2 {
        return Err(invalid(format!("need n ≥ max(K, 2), got n = {n}, K = {k}")));
    }
    if p == 0 {
        return Err(invalid("need at least one feature"));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(invalid(format!("separation must be finite and ≥ 0, got {separation}")));
    }
    let means = class_means(p, k, separation, seed)?;
    let mut rng = rng::stream(seed, "samples", 0);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % k;
        let x: Vec<f64> = means[y]
            .iter()
            .map(|m| m + rng.sample::<f64, _>(StandardNormal))
            .collect();
        inputs.push(x);
        labels.push(y);
    }
    Dataset::new(inputs, labels, k)
}
