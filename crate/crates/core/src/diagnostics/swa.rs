use serde::Serialize;

use crate::error::{invalid, Result};
use crate::param::{ParamVector, ORIGIN_GUARD};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwaAverage {
    pub mean: ParamVector,
    /// The average landed at the origin, where directions are undefined.
    pub at_origin: bool,
}

/// Arithmetic mean of at least two snapshots.
pub fn swa_average(snapshots: &[ParamVector]) -> Result<SwaAverage> {
    if snapshots.len() < 2 {
        return Err(invalid("averaging needs at least two snapshots"));
    }
    let mut mean = ParamVector::zeros(snapshots[0].dim());
    for s in snapshots {
        mean.axpy(1.0, s)?;
    }
    mean.scale_mut(1.0 / snapshots.len() as f64);
    let at_origin = !(mean.norm() > ORIGIN_GUARD);
    Ok(SwaAverage { mean, at_origin })
}

/// Symmetric matrix of Euclidean distances between snapshots.
pub fn pairwise_distance_matrix(snapshots: &[ParamVector]) -> Result<Vec<Vec<f64>>> {
    if snapshots.len() < 2 {
        return Err(invalid("distances need at least two snapshots"));
    }
    let n = snapshots.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = snapshots[i].distance(&snapshots[j])?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_snapshots() {
        let w = ParamVector::new(vec![1.0, -2.0, 3.0]);
        let avg = swa_average(&[w.clone(), w.clone(), w.clone()]).unwrap();
        assert_eq!(avg.mean, w);
        assert!(!avg.at_origin);
        let d = pairwise_distance_matrix(&[w.clone(), w.clone()]).unwrap();
        assert_eq!(d, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn antipodal_pair_flags_origin() {
        let w = ParamVector::new(vec![1.0, -2.0]);
        let avg = swa_average(&[w.clone(), w.scaled(-1.0)]).unwrap();
        assert!(avg.at_origin);
    }

    #[test]
    fn dimension_mismatch() {
        let a = ParamVector::new(vec![1.0]);
        let b = ParamVector::new(vec![1.0, 2.0]);
        assert!(swa_average(&[a.clone(), b.clone()]).is_err());
        assert!(pairwise_distance_matrix(&[a, b]).is_err());
        assert!(swa_average(&[ParamVector::new(vec![1.0])]).is_err());
    }
}
