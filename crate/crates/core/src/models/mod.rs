//! Concrete scale-invariant objectives and synthetic datasets.

mod dataset;
pub mod fixtures;
mod mlp;
mod toy;

pub use dataset::{make_gaussian_mixture, Dataset};
pub use mlp::{make_radial_mlp, Activation, MlpBase, MlpSpec, RadialMlp};
pub use toy::{toy_loss_eval, ToyLoss2D};

use crate::error::Result;
use crate::objective::Classifier;
use crate::param::ParamVector;

/// `(1/‖w‖)(I − w̄w̄ᵀ)·base_grad` given the unit vector `w̄` and `‖w‖`.
///
/// The projection is applied twice so the result is perpendicular to `w̄` to
/// rounding even when `base_grad` is mostly radial.
pub fn radial_gradient(unit: &ParamVector, norm: f64, mut base_grad: ParamVector) -> Result<ParamVector> {
    base_grad.project_out(unit)?;
    base_grad.project_out(unit)?;
    base_grad.scale_mut(1.0 / norm);
    Ok(base_grad)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict_class<C: Classifier + ?Sized>(obj: &C, w: &ParamVector, x: &[f64]) -> Result<usize> {
    Ok(argmax(&obj.logits(w, x)?))
}

pub fn predict_batch<C: Classifier + ?Sized>(
    obj: &C,
    w: &ParamVector,
    inputs: &[Vec<f64>],
) -> Result<Vec<usize>> {
    inputs.iter().map(|x| predict_class(obj, w, x)).collect()
}

/// Fraction of `data` classified correctly.
pub fn accuracy<C: Classifier + ?Sized>(obj: &C, w: &ParamVector, data: &Dataset) -> Result<f64> {
    let preds = predict_batch(obj, w, data.inputs())?;
    let correct = preds.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / data.len() as f64)
}

/// Mean cross-entropy of the classifier on `data`.
pub fn cross_entropy<C: Classifier + ?Sized>(obj: &C, w: &ParamVector, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in data.inputs().iter().zip(data.labels()) {
        let logits = obj.logits(w, x)?;
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - logits[y];
    }
    Ok(total / data.len() as f64)
}
