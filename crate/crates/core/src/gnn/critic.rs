use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::edpgnn::{Backbone, EdpgnnConfig, EdpgnnFeatures};
use super::layers::{Dense, Modulation, PairDense, PairIndex};
use super::matrix_input;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::UpperTriCoords;
use crate::model::CriticModel;
use crate::params::{Bound, ParamSet};

/// Noise-conditioned critic `C_{ψ,σ_i}`.
///
/// Same backbone as [`super::EnergyNet`], with every affine layer modulated
/// per noise level as `(W x + b) α_i + β_i`. A per-pair readout over the
/// edge features of all rounds and the final node features gives one value
/// per pair `u < v`; the output matrix mirrors it.
#[derive(Clone)]
pub struct CriticNet {
    backbone: std::sync::Arc<Backbone>,
    levels: usize,
    readout_in: PairDense,
    readout_out: Dense,
}

impl CriticNet {
    pub fn new(config: &EdpgnnConfig, levels: usize) -> Result<Self> {
        config.validate()?;
        if levels == 0 {
            return Err(Error::InvalidArgument("critic needs at least one noise level".into()));
        }
        let modulation = Some(Modulation { levels });
        Ok(CriticNet {
            backbone: std::sync::Arc::new(Backbone::new(config, modulation)),
            levels,
            readout_in: PairDense {
                name: "readout_in".into(),
                edge_in: (config.steps + 1) * config.channels,
                node_in: config.node_dim,
                fan_out: config.readout_hidden,
                modulation,
            },
            readout_out: Dense::new("readout_out", config.readout_hidden, 1),
        })
    }

    pub fn config(&self) -> &EdpgnnConfig {
        &self.backbone.config
    }

    /// Glorot-uniform weights, zero biases, `α = 1`, `β = 0`, ε = 0.
    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        self.backbone.init(&mut params, &mut rng);
        self.readout_in.init(&mut params, &mut rng);
        self.readout_out.init(&mut params, &mut rng);
        params
    }

    /// Backbone features of every round at noise level `level`.
    pub fn features(
        &self,
        params: &ParamSet,
        adjacency: &Tensor,
        level: usize,
    ) -> Result<EdpgnnFeatures> {
        self.check_level(level)?;
        self.backbone.features(params, adjacency, Some(level))
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.levels {
            return Err(Error::InvalidArgument(format!(
                "noise level {level} out of range for {} levels",
                self.levels
            )));
        }
        Ok(())
    }

    /// Symmetric `N × N` field with zero diagonal at noise level `level`.
    pub fn field_of(&self, params: &ParamSet, adjacency: &Tensor, level: usize) -> Result<Tensor> {
        let coords = matrix_input(adjacency)?;
        let n = coords.node_count();
        let tape = Tape::new();
        let p = params.bind(&tape);
        let x = tape.constant(coords.to_tensor());
        let f = self.field(&p, x, n, level)?;
        let out = UpperTriCoords::new(n, f.value().data().to_vec())?;
        Ok(out.to_matrix())
    }
}

impl CriticModel for CriticNet {
    fn levels(&self) -> usize {
        self.levels
    }

    fn field<'t>(&self, p: &Bound<'t>, x: Var<'t>, n: usize, level: usize) -> Result<Var<'t>> {
        self.check_level(level)?;
        let pairs = PairIndex::new(n);
        let rounds = self.backbone.forward(p, x, &pairs, Some(level))?;
        let edges = Var::concat(&rounds.edges, 1)?;
        let h = *rounds.nodes.last().expect("at least h0");
        let hidden = self
            .readout_in
            .forward(p, edges, h, &pairs, Some(level))?
            .activation(self.backbone.config.activation)?;
        self.readout_out
            .forward(p, hidden, None)?
            .reshape(&[pairs.len()])
    }

    fn readout_names(&self) -> Vec<String> {
        vec!["readout_out.w".into(), "readout_out.b".into()]
    }
}
