use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance between two per-graph features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distance {
    /// First Wasserstein distance between histograms on equally spaced bins.
    Wasserstein { bin_width: f64 },
    Euclidean,
}

/// Gaussian kernel `k(a, b) = exp(−d(a, b)² / (2σ²))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sigma: f64,
    pub distance: Distance,
}

impl KernelConfig {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = match self.distance {
            Distance::Wasserstein { bin_width } => wasserstein_1d(a, b) * bin_width,
            Distance::Euclidean => euclidean(a, b),
        };
        (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// W1 between two histograms on unit-spaced bins; the shorter one is padded
/// with zeros.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    let mut ca = 0.0;
    let mut cb = 0.0;
    let mut total = 0.0;
    for i in 0..len {
        ca += a.get(i).copied().unwrap_or(0.0);
        cb += b.get(i).copied().unwrap_or(0.0);
        total += (ca - cb).abs();
    }
    total
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(max(0, mean k(x,x′) + mean k(y,y′) − 2 mean k(x,y)))`.
///
/// The biased estimator averages over all pairs including `x = x′`; the
/// unbiased one drops the diagonal terms and needs two elements per set.
pub fn mmd(x: &[Vec<f64>], y: &[Vec<f64>], kernel: &KernelConfig, unbiased: bool) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("mmd needs nonempty sets".into()));
    }
    if unbiased && (x.len() < 2 || y.len() < 2) {
        return Err(Error::InvalidArgument(
            "unbiased mmd needs at least two elements per set".into(),
        ));
    }
    let within = |s: &[Vec<f64>]| {
        let mut total = 0.0;
        for (i, a) in s.iter().enumerate() {
            for (j, b) in s.iter().enumerate() {
                if !(unbiased && i == j) {
                    total += kernel.eval(a, b);
                }
            }
        }
        let m = s.len() as f64;
        if unbiased {
            total / (m * (m - 1.0))
        } else {
            total / (m * m)
        }
    };
    let mut cross = 0.0;
    for a in x {
        for b in y {
            cross += kernel.eval(a, b);
        }
    }
    cross /= (x.len() * y.len()) as f64;
    let sq = within(x) + within(y) - 2.0 * cross;
    Ok(sq.max(0.0).sqrt())
}

/// Symmetric kernel matrix over `features`.
pub fn kernel_matrix(features: &[Vec<f64>], kernel: &KernelConfig) -> Vec<Vec<f64>> {
    features
        .iter()
        .map(|a| features.iter().map(|b| kernel.eval(a, b)).collect())
        .collect()
}
