//! Reductions for Monte Carlo trials.

use serde::{Deserialize, Serialize};

/// Pairwise (tree) summation. The reduction order depends only on the
/// slice length, so identical inputs always give bit-identical sums.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean of independent trials together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let trials = samples.len();
        if trials == 0 {
            return McEstimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                trials,
            };
        }
        let mean = pairwise_sum(samples) / trials as f64;
        let std_error = if trials > 1 {
            let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
            (pairwise_sum(&dev) / (trials - 1) as f64 / trials as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error,
            trials,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
