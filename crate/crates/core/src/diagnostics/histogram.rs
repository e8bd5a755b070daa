use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::Serialize;

use super::record::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::models::predict_class;
use crate::objective::Classifier;
use crate::rng;

/// Per-probe class-prediction counts over an ensemble of trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionHistogram {
    pub probes: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub n_trials: u64,
}

impl PredictionHistogram {
    /// Validates that every probe's counts sum to the same trial count.
    pub fn from_counts(probes: Vec<Vec<f64>>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if probes.len() != counts.len() || counts.is_empty() {
            return Err(Error::HistogramMismatch(format!(
                "{} probes but {} count vectors",
                probes.len(),
                counts.len()
            )));
        }
        let k = counts[0].len();
        let n: u64 = counts[0].iter().sum();
        for c in &counts {
            if c.len() != k || c.iter().sum::<u64>() != n {
                return Err(Error::HistogramMismatch("ragged counts".into()));
            }
        }
        if n == 0 {
            return Err(Error::HistogramMismatch("empty histogram".into()));
        }
        Ok(PredictionHistogram {
            probes,
            counts,
            n_trials: n,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.counts[0].len()
    }

    pub fn frequencies(&self, probe: usize) -> Vec<f64> {
        let n = self.n_trials as f64;
        self.counts[probe].iter().map(|&c| c as f64 / n).collect()
    }

    fn check_compatible(&self, other: &PredictionHistogram) -> Result<()> {
        if self.probes != other.probes {
            return Err(Error::HistogramMismatch("histograms use different probes".into()));
        }
        if self.num_classes() != other.num_classes() {
            return Err(Error::HistogramMismatch("histograms use different class counts".into()));
        }
        Ok(())
    }

    /// Pools two histograms over the same probes.
    pub fn merge(&self, other: &PredictionHistogram) -> Result<PredictionHistogram> {
        self.check_compatible(other)?;
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        PredictionHistogram::from_counts(self.probes.clone(), counts)
    }
}

/// Counts each trial's predicted class on every probe, using the snapshot at
/// `step`.
pub fn collect_histograms<C: Classifier + ?Sized>(
    records: &[TrajectoryRecord],
    obj: &C,
    probes: &[Vec<f64>],
    step: usize,
) -> Result<PredictionHistogram> {
    if records.is_empty() || probes.is_empty() {
        return Err(Error::HistogramMismatch("need trials and probes".into()));
    }
    let mut counts = vec![vec![0u64; obj.num_classes()]; probes.len()];
    for (trial, rec) in records.iter().enumerate() {
        let w = rec.snapshot(step).ok_or(Error::MissingSnapshot { trial, step })?;
        for (p, x) in probes.iter().enumerate() {
            counts[p][predict_class(obj, w, x)?] += 1;
        }
    }
    PredictionHistogram::from_counts(probes.to_vec(), counts)
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Mean over probes of the total variation `½Σ_k |p_k − q_k|` between the
/// empirical class frequencies.
pub fn mean_tv_distance(a: &PredictionHistogram, b: &PredictionHistogram) -> Result<f64> {
    a.check_compatible(b)?;
    let n = a.probes.len();
    Ok((0..n).map(|i| tv(&a.frequencies(i), &b.frequencies(i))).sum::<f64>() / n as f64)
}

/// Mean ensemble error of `a` plus that of `b`: the TV two ensembles would
/// have if their mistakes fell on disjoint probes.
pub fn tv_baseline(a: &PredictionHistogram, b: &PredictionHistogram, labels: &[usize]) -> Result<f64> {
    a.check_compatible(b)?;
    if labels.len() != a.probes.len() {
        return Err(Error::HistogramMismatch(format!(
            "{} labels for {} probes",
            labels.len(),
            a.probes.len()
        )));
    }
    let error = |h: &PredictionHistogram| -> Result<f64> {
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let f = h.frequencies(i);
            let p = f
                .get(y)
                .ok_or_else(|| Error::HistogramMismatch(format!("label {y} out of range")))?;
            total += 1.0 - p;
        }
        Ok(total / labels.len() as f64)
    };
    Ok(error(a)? + error(b)?)
}

/// Expected mean TV between two independent multinomial samples of sizes
/// `n_a` and `n_b` drawn from the per-probe distributions `p`, estimated by
/// simulation. This is the sampling floor of [`mean_tv_distance`] for two
/// ensembles that share one true distribution.
pub fn multinomial_tv_floor(p: &[Vec<f64>], n_a: usize, n_b: usize, reps: usize, seed: u64) -> Result<f64> {
    if p.is_empty() || reps == 0 || n_a == 0 || n_b == 0 {
        return Err(Error::InvalidArgument("need probes, repetitions, and samples".into()));
    }
    let mut rng = rng::stream(seed, "multinomial-floor", 0);
    let mut total = 0.0;
    for probs in p {
        let dist = WeightedIndex::new(probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let k = probs.len();
        for _ in 0..reps {
            let mut ca = vec![0.0; k];
            let mut cb = vec![0.0; k];
            for _ in 0..n_a {
                ca[dist.sample(&mut rng)] += 1.0 / n_a as f64;
            }
            for _ in 0..n_b {
                cb[dist.sample(&mut rng)] += 1.0 / n_b as f64;
            }
            total += tv(&ca, &cb);
        }
    }
    Ok(total / (p.len() * reps) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hist(counts: Vec<Vec<u64>>) -> PredictionHistogram {
        let probes = (0..counts.len()).map(|i| vec![i as f64]).collect();
        PredictionHistogram::from_counts(probes, counts).unwrap()
    }

    #[test]
    fn tv_examples() {
        let a = hist(vec![vec![6, 4]]);
        let b = hist(vec![vec![5, 5]]);
        assert!((mean_tv_distance(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mean_tv_distance(&a, &a).unwrap(), 0.0);
        let c = hist(vec![vec![10, 0]]);
        let d = hist(vec![vec![0, 10]]);
        assert_eq!(mean_tv_distance(&c, &d).unwrap(), 1.0);
    }

    #[test]
    fn baseline_examples() {
        let a = hist(vec![vec![10, 0], vec![0, 10]]);
        assert_eq!(tv_baseline(&a, &a, &[0, 1]).unwrap(), 0.0);
        // Error rates 0.03 and 0.04 over 100 trials on one probe.
        let a = hist(vec![vec![97, 3]]);
        let b = hist(vec![vec![96, 4]]);
        assert!((tv_baseline(&a, &b, &[0]).unwrap() - 0.07).abs() < 1e-15);
        assert!(tv_baseline(&a, &b, &[0, 1]).is_err());
    }

    #[test]
    fn mismatches_rejected() {
        let a = hist(vec![vec![1, 1]]);
        let b = hist(vec![vec![1, 1], vec![2, 0]]);
        assert!(mean_tv_distance(&a, &b).is_err());
        assert!(PredictionHistogram::from_counts(vec![vec![0.0]; 2], vec![vec![1, 1], vec![1, 0]]).is_err());
    }

    #[test]
    fn floor_matches_exact_binomial_case() {
        // One trial per side on a fair coin: TV is 0 or 1 with equal chance.
        let f = multinomial_tv_floor(&[vec![0.5, 0.5]], 1, 1, 20_000, 1).unwrap();
        assert!((f - 0.5).abs() < 0.02);
        // Degenerate distribution: no sampling noise.
        assert_eq!(multinomial_tv_floor(&[vec![1.0, 0.0]], 50, 50, 10, 1).unwrap(), 0.0);
    }

    fn counts_strategy() -> impl Strategy<Value = (Vec<Vec<u64>>, Vec<Vec<u64>>, Vec<Vec<u64>>)> {
        (1usize..5, 2usize..5).prop_flat_map(|(probes, k)| {
            let one = move || {
                prop::collection::vec(prop::collection::vec(0u64..6, k), probes).prop_map(move |mut rows| {
                    // Equal totals per probe: pad the last class.
                    for r in rows.iter_mut() {
                        let s: u64 = r.iter().sum();
                        r[k - 1] += 30 - s;
                    }
                    rows
                })
            };
            (one(), one(), one())
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric((a, b, c) in counts_strategy()) {
            let (a, b, c) = (hist(a), hist(b), hist(c));
            let ab = mean_tv_distance(&a, &b).unwrap();
            let ba = mean_tv_distance(&b, &a).unwrap();
            let bc = mean_tv_distance(&b, &c).unwrap();
            let ac = mean_tv_distance(&a, &c).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(ab == 0.0, a.counts == b.counts);
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
