use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSample, UpperTriCoords};

/// Strictly decreasing noise levels `σ_1 > … > σ_k > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NoiseLadder {
    sigmas: Vec<f64>,
}

impl NoiseLadder {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidArgument("noise ladder is empty".into()));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "noise levels must be positive and finite, got {sigmas:?}"
            )));
        }
        if sigmas.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "noise levels must be strictly decreasing, got {sigmas:?}"
            )));
        }
        Ok(NoiseLadder { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma(&self, level: usize) -> f64 {
        self.sigmas[level]
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for NoiseLadder {
    fn default() -> Self {
        NoiseLadder {
            sigmas: vec![1.0, 0.5, 0.25, 0.1],
        }
    }
}

impl TryFrom<Vec<f64>> for NoiseLadder {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        NoiseLadder::new(v)
    }
}

impl From<NoiseLadder> for Vec<f64> {
    fn from(l: NoiseLadder) -> Self {
        l.sigmas
    }
}

/// A graph corrupted at noise level `level`, in upper-triangle coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyAdjacency {
    pub coords: UpperTriCoords,
    pub level: usize,
}

/// Adds independent `N(0, σ²)` noise to every strict-upper-triangle entry.
/// The mirrored matrix view is symmetric with zero diagonal by construction.
pub fn perturb(
    graph: &GraphSample,
    ladder: &NoiseLadder,
    level: usize,
    rng: &mut impl Rng,
) -> Result<NoisyAdjacency> {
    if level >= ladder.len() {
        return Err(Error::InvalidArgument(format!(
            "noise level {level} out of range for {} levels",
            ladder.len()
        )));
    }
    let clean = graph.upper();
    let values = add_noise(clean.values(), ladder.sigma(level), rng)?;
    Ok(NoisyAdjacency {
        coords: UpperTriCoords::new(graph.node_count(), values)?,
        level,
    })
}

pub(crate) fn add_noise(values: &[f64], sigma: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise std must be positive, got {sigma}"
        )));
    }
    Ok(values
        .iter()
        .map(|&a| {
            let z: f64 = rng.sample(StandardNormal);
            a + sigma * z
        })
        .collect())
}
