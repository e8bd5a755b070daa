//! Flat parameter vectors.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms at or below this value are treated as the origin, where a
/// scale-invariant gradient is undefined.
pub const ORIGIN_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(data: Vec<f64>) -> Self {
        ParamVector(data)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimMismatch {
                expected,
                actual: self.dim(),
            });
        }
        Ok(())
    }

    fn check_same(&self, other: &ParamVector) -> Result<()> {
        other.check_dim(self.dim())
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.check_same(other)?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Returns the norm, failing when it is within the origin guard.
    pub fn checked_norm(&self) -> Result<f64> {
        let norm = self.norm();
        if !(norm > ORIGIN_GUARD) {
            return Err(Error::Origin { norm });
        }
        Ok(norm)
    }

    pub fn scaled(&self, alpha: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|x| alpha * x).collect())
    }

    pub fn scale_mut(&mut self, alpha: f64) {
        self.0.iter_mut().for_each(|x| *x *= alpha);
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_same(other)?;
        Ok(ParamVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_same(other)?;
        Ok(ParamVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn distance(&self, other: &ParamVector) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// Unit vector `w / ‖w‖`.
    pub fn direction(&self) -> Result<ParamVector> {
        let norm = self.checked_norm()?;
        Ok(self.scaled(1.0 / norm))
    }

    /// Removes the component along the unit vector `unit`.
    pub fn project_out(&mut self, unit: &ParamVector) -> Result<()> {
        let c = self.dot(unit)?;
        self.axpy(-c, unit)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
