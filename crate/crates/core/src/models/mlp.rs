//! Radially projected MLP classifiers `f(w) = g(w/‖w‖)`.
//!
//! The base network `g` is a bias-free MLP with softmax cross-entropy on
//! `gain · (last layer pre-activations)`. The whole flattened parameter
//! vector is normalized before the forward pass, so the objective is exactly
//! scale-invariant and its gradient is the tangential projection
//! `(1/‖w‖)(I − w̄w̄ᵀ)∇g(w̄)`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{radial_gradient, Dataset};
use crate::error::{invalid, Result};
use crate::invariance::BaseFunction;
use crate::objective::{Batch, Classifier, Objective, RandomInit};
use crate::param::{dot, ParamVector};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// `[p, hidden..., K]`; a two-entry list is a linear model.
    pub widths: Vec<usize>,
    pub activation: Activation,
    /// Fixed multiplier on the logits (plays the role of a frozen last layer).
    #[serde(default = "default_gain")]
    pub gain: f64,
}

fn default_gain() -> f64 {
    1.0
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Self {
        MlpSpec {
            widths,
            activation,
            gain: 1.0,
        }
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RadialMlp {
    spec: MlpSpec,
    data: Arc<Dataset>,
    /// Start of each layer's row-major `(out, in)` weight block.
    offsets: Vec<usize>,
    dim: usize,
}

impl RadialMlp {
    pub fn new(spec: MlpSpec, data: Arc<Dataset>) -> Result<Self> {
        if spec.widths.len() < 2 || spec.widths.contains(&0) {
            return Err(invalid("widths need at least an input and an output layer, all nonzero"));
        }
        if spec.widths[0] != data.num_features() {
            return Err(invalid(format!(
                "input width {} does not match {} dataset features",
                spec.widths[0],
                data.num_features()
            )));
        }
        if *spec.widths.last().unwrap() != data.num_classes() {
            return Err(invalid(format!(
                "output width {} does not match {} classes",
                spec.widths.last().unwrap(),
                data.num_classes()
            )));
        }
        if !(spec.gain > 0.0) || !spec.gain.is_finite() {
            return Err(invalid("gain must be positive and finite"));
        }
        let mut offsets = Vec::with_capacity(spec.widths.len() - 1);
        let mut dim = 0;
        for w in spec.widths.windows(2) {
            offsets.push(dim);
            dim += w[0] * w[1];
        }
        Ok(RadialMlp {
            spec,
            data,
            offsets,
            dim,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.data
    }

    /// Same network on a different dataset (e.g. a held-out split).
    pub fn with_dataset(&self, data: Arc<Dataset>) -> Result<Self> {
        RadialMlp::new(self.spec.clone(), data)
    }

    /// Per-layer i.i.d. normal weights with variance `1/fan_in`, times `scale`.
    pub fn kaiming_init(&self, scale: f64, rng: &mut SimRng) -> ParamVector {
        let mut w = Vec::with_capacity(self.dim);
        for pair in self.spec.widths.windows(2) {
            let std = scale / (pair[0] as f64).sqrt();
            for _ in 0..pair[0] * pair[1] {
                w.push(std * rng.sample::<f64, _>(StandardNormal));
            }
        }
        ParamVector::new(w)
    }

    fn layers(&self) -> usize {
        self.offsets.len()
    }

    /// Forward pass of the base network at `u`; fills per-layer
    /// pre-activations and activations and returns the logits.
    fn forward(&self, u: &[f64], x: &[f64], zs: &mut [Vec<f64>], acts: &mut [Vec<f64>]) -> Vec<f64> {
        let last = self.layers() - 1;
        acts[0].clear();
        acts[0].extend_from_slice(x);
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.spec.widths[l], self.spec.widths[l + 1]);
            let block = &u[self.offsets[l]..self.offsets[l] + n_in * n_out];
            let z: Vec<f64> = block.chunks_exact(n_in).map(|row| dot(row, &acts[l])).collect();
            if l < last {
                acts[l + 1] = z.iter().map(|&v| self.spec.activation.apply(v)).collect();
            }
            zs[l] = z;
        }
        zs[last].iter().map(|v| self.spec.gain * v).collect()
    }

    /// Base-network loss and (optionally) gradient at `u`, not projected.
    fn base_eval(&self, u: &[f64], batch: &Batch, want_grad: bool) -> (f64, Option<Vec<f64>>) {
        let n_layers = self.layers();
        let mut zs = vec![Vec::new(); n_layers];
        let mut acts = vec![Vec::new(); n_layers];
        let mut grad = if want_grad { Some(vec![0.0; self.dim]) } else { None };
        let inv_b = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &i in batch.indices() {
            let logits = self.forward(u, self.data.input(i), &mut zs, &mut acts);
            let y = self.data.label(i);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logits.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum_exp.ln();
            total += lse - logits[y];
            let Some(g) = grad.as_mut() else { continue };
            let mut delta: Vec<f64> = logits
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let p = (v - lse).exp();
                    let t = if k == y { 1.0 } else { 0.0 };
                    self.spec.gain * (p - t) * inv_b
                })
                .collect();
            for l in (0..n_layers).rev() {
                let (n_in, n_out) = (self.spec.widths[l], self.spec.widths[l + 1]);
                let off = self.offsets[l];
                let a_in = &acts[l];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut g[off + o * n_in..off + (o + 1) * n_in];
                    for (gj, aj) in row.iter_mut().zip(a_in) {
                        *gj += d * aj;
                    }
                }
                if l > 0 {
                    let block = &u[off..off + n_in * n_out];
                    let mut da = vec![0.0; n_in];
                    for (o, row) in block.chunks_exact(n_in).enumerate() {
                        let d = delta[o];
                        for (daj, wj) in da.iter_mut().zip(row) {
                            *daj += d * wj;
                        }
                    }
                    let z_prev = &zs[l - 1];
                    delta = da
                        .iter()
                        .zip(z_prev.iter().zip(&acts[l]))
                        .map(|(d, (&z, &a))| d * self.spec.activation.derivative(z, a))
                        .collect();
                }
            }
        }
        (total * inv_b, grad)
    }

    /// Logits of the base network evaluated at an arbitrary (not
    /// necessarily unit) parameter vector.
    pub fn base_logits(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        let mut zs = vec![Vec::new(); self.layers()];
        let mut acts = vec![Vec::new(); self.layers()];
        self.forward(u, x, &mut zs, &mut acts)
    }

    /// The base function `g` restricted to one batch, for Hessian checks.
    pub fn base_function<'a>(&'a self, batch: &'a Batch) -> MlpBase<'a> {
        MlpBase { mlp: self, batch }
    }

    fn check(&self, w: &ParamVector) -> Result<f64> {
        w.check_dim(self.dim)?;
        w.checked_norm()
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        let n = self.data.len();
        match batch.indices().iter().find(|&&i| i >= n) {
            Some(&index) => Err(crate::error::Error::BatchOutOfBounds { index, n }),
            None => Ok(()),
        }
    }
}

impl Objective for RadialMlp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_samples(&self) -> usize {
        self.data.len()
    }

    fn loss(&self, w: &ParamVector, batch: &Batch) -> Result<f64> {
        let norm = self.check(w)?;
        self.check_batch(batch)?;
        let u = w.scaled(1.0 / norm);
        Ok(self.base_eval(u.as_slice(), batch, false).0)
    }

    fn grad(&self, w: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        Ok(self.loss_and_grad(w, batch)?.1)
    }

    fn loss_and_grad(&self, w: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
        let norm = self.check(w)?;
        self.check_batch(batch)?;
        let u = w.scaled(1.0 / norm);
        let (loss, g) = self.base_eval(u.as_slice(), batch, true);
        let grad = radial_gradient(&u, norm, ParamVector::new(g.expect("gradient requested")))?;
        Ok((loss, grad))
    }

    fn name(&self) -> String {
        let widths: Vec<String> = self.spec.widths.iter().map(|w| w.to_string()).collect();
        format!("radial-mlp[{}]-{:?}", widths.join("-"), self.spec.activation).to_lowercase()
    }
}

impl Classifier for RadialMlp {
    fn num_classes(&self) -> usize {
        self.data.num_classes()
    }

    fn num_features(&self) -> usize {
        self.data.num_features()
    }

    fn logits(&self, w: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
        let norm = self.check(w)?;
        if x.len() != self.num_features() {
            return Err(crate::error::Error::DimMismatch {
                expected: self.num_features(),
                actual: x.len(),
            });
        }
        let u = w.scaled(1.0 / norm);
        Ok(self.base_logits(u.as_slice(), x))
    }

    fn train_data(&self) -> &Dataset {
        &self.data
    }
}

impl RandomInit for RadialMlp {
    fn random_init(&self, scale: f64, rng: &mut SimRng) -> ParamVector {
        self.kaiming_init(scale, rng)
    }
}

pub struct MlpBase<'a> {
    mlp: &'a RadialMlp,
    batch: &'a Batch,
}

impl BaseFunction for MlpBase<'_> {
    fn dim(&self) -> usize {
        self.mlp.dim
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.mlp.base_eval(u, self.batch, false).0
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        self.mlp.base_eval(u, self.batch, true).1.expect("gradient requested")
    }
}

/// Builds a radial MLP on `dataset` and draws its Kaiming initialization.
pub fn make_radial_mlp(
    spec: MlpSpec,
    dataset: Arc<Dataset>,
    seed: u64,
) -> Result<(RadialMlp, ParamVector)> {
    let mlp = RadialMlp::new(spec, dataset)?;
    let mut rng = crate::rng::stream(seed, "init", 0);
    let w0 = mlp.kaiming_init(1.0, &mut rng);
    Ok((mlp, w0))
}
