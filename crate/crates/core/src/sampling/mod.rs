//! Graph generation: node-count sampling, projected Langevin dynamics on the
//! energy, and thresholding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{GraphSample, UpperTriCoords};
use crate::model::EnergyModel;
use crate::params::{Bound, ParamSet};
use crate::stein::score_values;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LangevinConfig {
    pub steps: usize,
    /// First step size `η₀`.
    pub step_init: f64,
    /// Last step size `η_f`; intermediate steps interpolate geometrically.
    pub step_final: f64,
    /// Entries `≥ threshold` become edges.
    pub threshold: f64,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        LangevinConfig {
            steps: 1000,
            step_init: 1e-2,
            step_final: 1e-4,
            threshold: 0.5,
        }
    }
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_final > 0.0 && self.step_init >= self.step_final && self.step_init.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "step sizes must satisfy step_init ≥ step_final > 0, got {} and {}",
                self.step_init, self.step_final
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Step size at step `t` of `steps`.
    pub fn step_size(&self, t: usize) -> f64 {
        if self.steps <= 1 {
            return self.step_init;
        }
        let frac = t as f64 / (self.steps - 1) as f64;
        self.step_init * (self.step_final / self.step_init).powf(frac)
    }
}

/// Draws a node count from the empirical distribution of `sizes`.
pub fn sample_node_count(sizes: &[usize], rng: &mut impl Rng) -> Result<usize> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("no training sizes to sample from".into()));
    }
    Ok(sizes[rng.random_range(0..sizes.len())])
}

/// Projected Langevin dynamics in upper-triangle coordinates.
///
/// Starts from `U(0, 1)` entries and iterates
/// `u ← clamp(u + (η_t/2) ∂E/∂u + √η_t ξ, 0, 1)`.
pub fn langevin_sample<E: EnergyModel + ?Sized>(
    model: &E,
    params: &ParamSet,
    n: usize,
    config: &LangevinConfig,
    rng: &mut impl Rng,
) -> Result<UpperTriCoords> {
    config.validate()?;
    let p = crate::graph::pair_count(n);
    let mut u: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
    for t in 0..config.steps {
        let eta = config.step_size(t);
        let grad = score_values(model, params, &u, n).map_err(|e| match e {
            Error::NonFinite { .. } => Error::LangevinNonFinite { step: t },
            other => other,
        })?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::LangevinNonFinite { step: t });
        }
        let noise = eta.sqrt();
        for (x, g) in u.iter_mut().zip(&grad) {
            let xi: f64 = rng.sample(StandardNormal);
            *x = (*x + 0.5 * eta * g + noise * xi).clamp(0.0, 1.0);
        }
    }
    UpperTriCoords::new(n, u)
}

/// Thresholds a relaxed adjacency (`≥ threshold` → edge).
pub fn discretize(m: &UpperTriCoords, threshold: f64) -> GraphSample {
    let n = m.node_count();
    let mut edges = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if m.values()[k] >= threshold {
                edges.push((i, j));
            }
            k += 1;
        }
    }
    GraphSample::from_edges(n, &edges).expect("upper-triangle pairs are valid edges")
}

/// Thresholds a full symmetric matrix with entries in `[0, 1]`.
pub fn discretize_matrix(m: &Tensor, threshold: f64) -> Result<GraphSample> {
    let coords = UpperTriCoords::from_symmetric(m, 1e-9)?;
    Ok(discretize(&coords, threshold))
}

/// Generated graphs with the seed of each chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub graphs: Vec<GraphSample>,
    /// Chain `k` is reproduced by `ChaCha8Rng::seed_from_u64(seeds[k])`.
    pub seeds: Vec<u64>,
}

/// Runs `count` independent chains. Chain `k` takes its seed from stream `k`
/// of the master seed, so the output does not depend on the worker count.
pub fn generate<E: EnergyModel + ?Sized>(
    model: &E,
    params: &ParamSet,
    sizes: &[usize],
    count: usize,
    config: &LangevinConfig,
    seed: u64,
) -> Result<Generated> {
    config.validate()?;
    if count > 0 && sizes.is_empty() {
        return Err(Error::InvalidArgument("no training sizes to sample from".into()));
    }
    let seeds: Vec<u64> = (0..count as u64)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng.random()
        })
        .collect();
    let graphs = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let n = sample_node_count(sizes, &mut rng)?;
            let relaxed = langevin_sample(model, params, n, config, &mut rng)?;
            Ok(discretize(&relaxed, config.threshold))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Generated { graphs, seeds })
}

/// Gaussian log-density `E(u) = −‖u − u*‖² / (2τ)`, ignoring parameters.
#[derive(Clone, Debug)]
pub struct QuadraticEnergy {
    pub target: Vec<f64>,
    pub tau: f64,
}

impl EnergyModel for QuadraticEnergy {
    fn energy<'t>(&self, _p: &Bound<'t>, x: Var<'t>, _n: usize) -> Result<Var<'t>> {
        let target = x.tape().constant(Tensor::vector(self.target.clone()));
        let d = x.sub(target)?;
        d.dot(d)?.scale(-0.5 / self.tau)
    }
}
