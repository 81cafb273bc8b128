use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Dense, Modulation, PairDense, PairIndex};
use crate::autodiff::{Activation, Tensor, Var};
use crate::error::{Error, Result};
use crate::params::{Bound, ParamSet};

/// How the self-term weight `(1 + ε)` of the node update is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonMode {
    Fixed(f64),
    /// One trainable ε per message-passing step, initialised to 0.
    LearnablePerStep,
}

/// Shape of an edgewise dense prediction GNN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdpgnnConfig {
    /// Adjacency channels `C`.
    pub channels: usize,
    /// Message-passing steps `T`.
    pub steps: usize,
    /// Node feature width `d_h`.
    pub node_dim: usize,
    pub node_hidden: usize,
    pub edge_hidden: usize,
    pub readout_hidden: usize,
    pub activation: Activation,
    pub epsilon: EpsilonMode,
}

impl Default for EdpgnnConfig {
    fn default() -> Self {
        EdpgnnConfig {
            channels: 2,
            steps: 3,
            node_dim: 16,
            node_hidden: 32,
            edge_hidden: 32,
            readout_hidden: 32,
            activation: Activation::Elu,
            epsilon: EpsilonMode::LearnablePerStep,
        }
    }
}

impl EdpgnnConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channels", self.channels),
            ("steps", self.steps),
            ("node_dim", self.node_dim),
            ("node_hidden", self.node_hidden),
            ("edge_hidden", self.edge_hidden),
            ("readout_hidden", self.readout_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Node and edge features of every round, `h^0..h^T` and `A^0..A^T`.
///
/// Node features are `[N, d_h]`; edge features are `[P, C]` in upper-triangle
/// pair order. The matrix view of channel `c` mirrors column `c`, so every
/// channel slice is symmetric with zero diagonal.
pub struct Rounds<'t> {
    pub nodes: Vec<Var<'t>>,
    pub edges: Vec<Var<'t>>,
    /// Per round, one `[N, d_h]` message block per channel.
    pub messages: Vec<Vec<Var<'t>>>,
}

struct Step {
    node_in: Dense,
    node_out: Dense,
    edge_in: PairDense,
    edge_out: Dense,
    epsilon: Option<String>,
}

/// Message-passing backbone shared by the energy network and the critic.
///
/// Each round computes, per channel `c`, messages `m_[c,v] = Σ_w A_[c,v,w] h_w`;
/// updates `h_v ← MLP_node(CAT_c[m_[c,v]] ‖ (1+ε) h_v)`; and updates
/// `A_[·,u,v] ← MLP_edge(A_[·,u,v], h_u + h_v, h_u ⊙ h_v)` on pairs `u < v`
/// before mirroring. The initial features are `A^0_[c] = A` for every channel
/// and `h^0_v = affine(Σ_w A_vw)`.
///
/// Both MLPs end in `tanh`. Sum aggregation multiplies feature scale by
/// roughly the degree each round and the `h_u ⊙ h_v` input squares it, so
/// without a bounded output three rounds on a 20-node graph overflow any
/// useful range.
pub(crate) struct Backbone {
    pub config: EdpgnnConfig,
    embed: Dense,
    steps: Vec<Step>,
}

impl Backbone {
    pub fn new(config: &EdpgnnConfig, modulation: Option<Modulation>) -> Self {
        let c = config.channels;
        let d = config.node_dim;
        let steps = (0..config.steps)
            .map(|t| Step {
                node_in: Dense::new(format!("step{t}.node_in"), c * d + d, config.node_hidden)
                    .modulated(modulation),
                node_out: Dense::new(format!("step{t}.node_out"), config.node_hidden, d)
                    .modulated(modulation),
                edge_in: PairDense {
                    name: format!("step{t}.edge_in"),
                    edge_in: c,
                    node_in: d,
                    fan_out: config.edge_hidden,
                    modulation,
                },
                edge_out: Dense::new(format!("step{t}.edge_out"), config.edge_hidden, c)
                    .modulated(modulation),
                epsilon: matches!(config.epsilon, EpsilonMode::LearnablePerStep)
                    .then(|| format!("step{t}.epsilon")),
            })
            .collect();
        Backbone {
            config: config.clone(),
            embed: Dense::new("embed", 1, d).modulated(modulation),
            steps,
        }
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut impl Rng) {
        self.embed.init(params, rng);
        for s in &self.steps {
            s.node_in.init(params, rng);
            s.node_out.init(params, rng);
            s.edge_in.init(params, rng);
            s.edge_out.init(params, rng);
            if let Some(name) = &s.epsilon {
                params.insert(name.clone(), Tensor::zeros(&[1]));
            }
        }
    }

    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        x: Var<'t>,
        pairs: &PairIndex,
        level: Option<usize>,
    ) -> Result<Rounds<'t>> {
        let tape = x.tape();
        let n = pairs.n;
        let np = pairs.len();
        let c = self.config.channels;
        let act = self.config.activation;
        if x.shape() != [np] {
            return Err(Error::Shape {
                op: "edpgnn",
                lhs: x.shape(),
                rhs: vec![np],
            });
        }

        let column = x.reshape(&[np, 1])?;
        let a0 = column.matmul(tape.constant(Tensor::ones(&[1, c])))?;
        let degree = pairs
            .to_matrix(x)?
            .matmul(tape.constant(Tensor::ones(&[n, 1])))?;
        let h0 = self.embed.forward(p, degree, level)?;

        let mut messages = Vec::with_capacity(self.steps.len());
        let mut nodes = vec![h0];
        let mut edges = vec![a0];
        for step in &self.steps {
            let h = *nodes.last().expect("h0");
            let a = *edges.last().expect("A0");

            let mut cat = Vec::with_capacity(c + 1);
            for ch in 0..c {
                let channel = a.slice(1, ch, 1)?.reshape(&[np])?;
                cat.push(pairs.to_matrix(channel)?.matmul(h)?);
            }
            let self_term = match (&step.epsilon, self.config.epsilon) {
                (Some(name), _) => {
                    let eps = p.get(name)?.expand_scalar(&h.shape())?;
                    h.add(h.mul(eps)?)?
                }
                (None, EpsilonMode::Fixed(e)) => h.scale(1.0 + e)?,
                (None, EpsilonMode::LearnablePerStep) => unreachable!("epsilon name set"),
            };
            cat.push(self_term);
            let hidden = step
                .node_in
                .forward(p, Var::concat(&cat, 1)?, level)?
                .activation(act)?;
            let h_next = step
                .node_out
                .forward(p, hidden, level)?
                .activation(Activation::Tanh)?;

            let edge_hidden = step
                .edge_in
                .forward(p, a, h_next, pairs, level)?
                .activation(act)?;
            let a_next = step
                .edge_out
                .forward(p, edge_hidden, level)?
                .activation(Activation::Tanh)?;

            messages.push(cat[..c].to_vec());
            nodes.push(h_next);
            edges.push(a_next);
        }
        Ok(Rounds {
            nodes,
            edges,
            messages,
        })
    }
}

/// Concrete features of every round for one input matrix.
#[derive(Clone, Debug)]
pub struct EdpgnnFeatures {
    /// `h^0..=h^T`, each `[N, d_h]`.
    pub nodes: Vec<Tensor>,
    /// `A^0..=A^T`, each a list of `C` symmetric `N × N` channel matrices.
    pub edges: Vec<Vec<Tensor>>,
    /// Messages of rounds `1..=T`, one `[N, d_h]` block per channel.
    pub messages: Vec<Vec<Tensor>>,
}

impl Backbone {
    pub fn features(
        &self,
        params: &ParamSet,
        adjacency: &Tensor,
        level: Option<usize>,
    ) -> Result<EdpgnnFeatures> {
        let coords = super::matrix_input(adjacency)?;
        let n = coords.node_count();
        let tape = crate::autodiff::Tape::new();
        let p = params.bind(&tape);
        let x = tape.constant(coords.to_tensor());
        let pairs = PairIndex::new(n);
        let rounds = self.forward(&p, x, &pairs, level)?;
        let nodes = rounds.nodes.iter().map(|h| (*h.value()).clone()).collect();
        let mut edges = Vec::with_capacity(rounds.edges.len());
        for a in &rounds.edges {
            let a = a.value();
            let c = self.config.channels;
            let channels = (0..c)
                .map(|ch| {
                    let col = a.data().iter().skip(ch).step_by(c).copied().collect();
                    Ok(crate::graph::UpperTriCoords::new(n, col)?.to_matrix())
                })
                .collect::<Result<Vec<_>>>()?;
            edges.push(channels);
        }
        let messages = rounds
            .messages
            .iter()
            .map(|round| round.iter().map(|m| (*m.value()).clone()).collect())
            .collect();
        Ok(EdpgnnFeatures {
            nodes,
            edges,
            messages,
        })
    }
}
