//! Graph statistics and the MMD evaluation protocol.

mod mmd;
mod stats;

pub use mmd::{kernel_matrix, mmd, wasserstein_1d, Distance, KernelConfig};
pub use stats::{
    clustering_coefficients, clustering_stat, degree_stat, orbit_counts, orbit_stat, StatHistogram,
    StatKind, CLUSTERING_BINS, ORBITS,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSample;

pub const REPORT_FORMAT_VERSION: u64 = 1;

/// Kernels for the three statistics and the estimator choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub degree: KernelConfig,
    pub clustering: KernelConfig,
    pub orbit: KernelConfig,
    pub unbiased: bool,
}

impl Default for EvalConfig {
    /// Gaussian kernels over W1 between histograms with σ = 1 (degree in
    /// degree units, clustering on `[0, 1]`), and a Gaussian kernel with
    /// σ = 30 over the Euclidean distance between mean orbit-count vectors.
    fn default() -> Self {
        EvalConfig {
            degree: KernelConfig {
                sigma: 1.0,
                distance: Distance::Wasserstein { bin_width: 1.0 },
            },
            clustering: KernelConfig {
                sigma: 1.0,
                distance: Distance::Wasserstein {
                    bin_width: 1.0 / CLUSTERING_BINS as f64,
                },
            },
            orbit: KernelConfig {
                sigma: 30.0,
                distance: Distance::Euclidean,
            },
            unbiased: false,
        }
    }
}

/// One row of the results table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdScores {
    pub deg: f64,
    pub clus: f64,
    pub orbit: f64,
    pub avg: f64,
}

/// Machine-readable evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u64,
    pub model: String,
    pub dataset: String,
    pub deg: f64,
    pub clus: f64,
    pub orbit: f64,
    pub avg: f64,
    pub kernel_config: EvalConfig,
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(model: &str, dataset: &str, scores: MmdScores, config: &EvalConfig, seed: Option<u64>) -> Self {
        Report {
            format_version: REPORT_FORMAT_VERSION,
            model: model.into(),
            dataset: dataset.into(),
            deg: scores.deg,
            clus: scores.clus,
            orbit: scores.orbit,
            avg: scores.avg,
            kernel_config: config.clone(),
            seed,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        match raw.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(REPORT_FORMAT_VERSION) => Ok(serde_json::from_value(raw)?),
            Some(found) => Err(Error::FormatVersion {
                found,
                expected: REPORT_FORMAT_VERSION,
            }),
            None => Err(Error::Format(format!("{}: missing format_version", path.display()))),
        }
    }

    /// `model | deg | clus | orbit | avg` with three decimals.
    pub fn table_row(&self) -> String {
        format!(
            "{} | {:.3} | {:.3} | {:.3} | {:.3}",
            self.model, self.deg, self.clus, self.orbit, self.avg
        )
    }
}

/// Statistic of one kind for every graph, in input order.
pub fn features(graphs: &[GraphSample], kind: StatKind) -> Vec<Vec<f64>> {
    graphs
        .par_iter()
        .map(|g| match kind {
            StatKind::Degree => degree_stat(g, 0).values,
            StatKind::Clustering => clustering_stat(g).values,
            StatKind::Orbit => orbit_stat(g).values,
        })
        .collect()
}

/// MMD between `samples` and `test` for degree, clustering and orbit
/// statistics, and their mean.
pub fn evaluate(samples: &[GraphSample], test: &[GraphSample], config: &EvalConfig) -> Result<MmdScores> {
    if samples.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs nonempty graph sets".into()));
    }
    let one = |kind: StatKind, kernel: &KernelConfig| {
        mmd(&features(samples, kind), &features(test, kind), kernel, config.unbiased)
    };
    let deg = one(StatKind::Degree, &config.degree)?;
    let clus = one(StatKind::Clustering, &config.clustering)?;
    let orbit = one(StatKind::Orbit, &config.orbit)?;
    Ok(MmdScores {
        deg,
        clus,
        orbit,
        avg: (deg + clus + orbit) / 3.0,
    })
}
