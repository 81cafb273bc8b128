use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::edpgnn::{Backbone, EdpgnnConfig, EdpgnnFeatures};
use super::layers::{Dense, PairIndex};
use super::matrix_input;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;
use crate::model::EnergyModel;
use crate::params::{Bound, ParamSet};

/// Scalar energy network `E_θ`. The model density is `∝ exp(+E_θ(A))`.
///
/// The readout pools every round: the column sums of `h^t` and the mean
/// absolute value of each channel of `A^t` over node pairs, for
/// `t = 0..=T`. The concatenation goes through a two-layer MLP.
#[derive(Clone)]
pub struct EnergyNet {
    backbone: std::sync::Arc<Backbone>,
    readout_in: Dense,
    readout_out: Dense,
}

impl EnergyNet {
    pub fn new(config: &EdpgnnConfig) -> Result<Self> {
        config.validate()?;
        let pooled = (config.steps + 1) * (config.node_dim + config.channels);
        Ok(EnergyNet {
            backbone: std::sync::Arc::new(Backbone::new(config, None)),
            readout_in: Dense::new("readout_in", pooled, config.readout_hidden),
            readout_out: Dense::new("readout_out", config.readout_hidden, 1),
        })
    }

    pub fn config(&self) -> &EdpgnnConfig {
        &self.backbone.config
    }

    /// Glorot-uniform weights, zero biases and ε = 0.
    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        self.backbone.init(&mut params, &mut rng);
        self.readout_in.init(&mut params, &mut rng);
        self.readout_out.init(&mut params, &mut rng);
        params
    }

    /// Backbone features of every round for `adjacency`.
    pub fn features(&self, params: &ParamSet, adjacency: &Tensor) -> Result<EdpgnnFeatures> {
        self.backbone.features(params, adjacency, None)
    }

    /// `E_θ(A)` for a symmetric, zero-diagonal matrix (binary or relaxed).
    pub fn energy_of(&self, params: &ParamSet, adjacency: &Tensor) -> Result<f64> {
        let coords = matrix_input(adjacency)?;
        let tape = Tape::new();
        let p = params.bind(&tape);
        let x = tape.constant(coords.to_tensor());
        Ok(self.energy(&p, x, coords.node_count())?.item())
    }
}

impl EnergyModel for EnergyNet {
    fn energy<'t>(&self, p: &Bound<'t>, x: Var<'t>, n: usize) -> Result<Var<'t>> {
        let pairs = PairIndex::new(n);
        let rounds = self.backbone.forward(p, x, &pairs, None)?;
        let inv_pairs = 1.0 / pairs.len().max(1) as f64;
        let mut pooled = Vec::with_capacity(2 * rounds.nodes.len());
        for (h, a) in rounds.nodes.iter().zip(&rounds.edges) {
            let hs = h.sum_rows()?;
            let am = a.abs()?.sum_rows()?.scale(inv_pairs)?;
            pooled.push(hs.reshape(&[1, hs.numel()])?);
            pooled.push(am.reshape(&[1, am.numel()])?);
        }
        let features = Var::concat(&pooled, 1)?;
        let hidden = self
            .readout_in
            .forward(p, features, None)?
            .activation(self.backbone.config.activation)?;
        self.readout_out.forward(p, hidden, None)?.reshape(&[])
    }
}
