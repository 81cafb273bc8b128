//! Small non-graph models for exercising the training loop on vectors.
//!
//! The learnable Gaussian energy has a closed-form score, which makes it
//! possible to check what the adversarial loop converges to.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::objective::Point;
use crate::autodiff::{Activation, Tensor, Var};
use crate::error::{Error, Result};
use crate::gnn::layers::{Dense, Modulation};
use crate::model::{CriticModel, EnergyModel};
use crate::params::{Bound, ParamSet};

/// `E(x) = −½ exp(ρ) ‖x − μ‖²`, with parameters `mu` (`[d]`) and `rho` (`[1]`).
#[derive(Clone, Debug)]
pub struct GaussianEnergy {
    pub dim: usize,
}

impl GaussianEnergy {
    pub fn init_params(&self, mu: f64, rho: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("mu", Tensor::filled(&[self.dim], mu));
        p.insert("rho", Tensor::vector(vec![rho]));
        p
    }

    /// Analytic score `−exp(ρ)(x − μ)`.
    pub fn score(params: &ParamSet, x: &[f64]) -> Result<Vec<f64>> {
        let mu = params.get("mu")?;
        let precision = params.get("rho")?.item().exp();
        Ok(x.iter().zip(mu.data()).map(|(x, m)| -precision * (x - m)).collect())
    }
}

impl EnergyModel for GaussianEnergy {
    fn energy<'t>(&self, p: &Bound<'t>, x: Var<'t>, _n: usize) -> Result<Var<'t>> {
        let diff = x.sub(p.get("mu")?)?;
        let precision = p.get("rho")?.reshape(&[])?.exp()?;
        diff.dot(diff)?.mul(precision)?.scale(-0.5)
    }
}

/// Noise-conditioned two-layer MLP field on `R^d` with tanh hidden units.
#[derive(Clone, Debug)]
pub struct MlpCritic {
    pub dim: usize,
    levels: usize,
    input: Dense,
    output: Dense,
}

impl MlpCritic {
    pub fn new(dim: usize, hidden: usize, levels: usize) -> Result<Self> {
        if dim == 0 || hidden == 0 || levels == 0 {
            return Err(Error::InvalidArgument("mlp critic sizes must be positive".into()));
        }
        Ok(MlpCritic {
            dim,
            levels,
            input: Dense::new("input", dim, hidden).modulated(Some(Modulation { levels })),
            output: Dense::new("output", hidden, dim),
        })
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        self.input.init(&mut p, &mut rng);
        self.output.init(&mut p, &mut rng);
        p
    }
}

impl CriticModel for MlpCritic {
    fn levels(&self) -> usize {
        self.levels
    }

    fn field<'t>(&self, p: &Bound<'t>, x: Var<'t>, _n: usize, level: usize) -> Result<Var<'t>> {
        if level >= self.levels {
            return Err(Error::InvalidArgument(format!("noise level {level} out of range")));
        }
        let row = x.reshape(&[1, self.dim])?;
        let hidden = self
            .input
            .forward(p, row, Some(level))?
            .activation(Activation::Tanh)?;
        self.output.forward(p, hidden, None)?.reshape(&[self.dim])
    }

    fn readout_names(&self) -> Vec<String> {
        vec!["output.w".into(), "output.b".into()]
    }
}

/// `count` draws from `N(mean, std²)` in `dim` dimensions.
pub fn gaussian_points(dim: usize, mean: f64, std: f64, count: usize, seed: u64) -> Result<Vec<Point>> {
    let normal = Normal::new(mean, std)
        .map_err(|e| Error::InvalidArgument(format!("gaussian data: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| Point {
            n: dim,
            values: (0..dim).map(|_| normal.sample(&mut rng)).collect(),
        })
        .collect())
}
