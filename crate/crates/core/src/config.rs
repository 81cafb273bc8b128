//! Flat run configuration read from TOML.
//!
//! Every key is optional; missing keys take the built-in defaults. Command
//! line flags are applied on top by the caller.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{Activation, TraceMode};
use crate::data::{CitationConfig, CommunityConfig, EgoConfig};
use crate::error::{Error, Result};
use crate::gnn::{EdpgnnConfig, EpsilonMode};
use crate::metrics::EvalConfig;
use crate::params::OptimizerKind;
use crate::sampling::LangevinConfig;
use crate::stein::{NoiseLadder, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    CommunitySmall,
    EgoSmall,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::CommunitySmall => "community-small",
            DatasetKind::EgoSmall => "ego-small",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Exact,
    Hutchinson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every other seed is derived from it.
    pub seed: u64,

    pub dataset: DatasetKind,
    /// Number of graphs; 100 for community-small and 200 for ego-small when
    /// absent.
    pub graph_count: Option<usize>,
    pub train_fraction: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub p_intra: f64,
    pub inter_rate: f64,
    /// Edge list to extract ego networks from; the synthetic stand-in is used
    /// when absent.
    pub edge_list: Option<PathBuf>,
    pub ego_radius: usize,
    pub ego_min_nodes: usize,
    pub ego_max_nodes: usize,
    pub citation_nodes: usize,

    /// Training graphs, a graph container file.
    pub train_data: Option<PathBuf>,

    pub channels: usize,
    pub steps: usize,
    pub node_dim: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub learnable_epsilon: bool,

    pub noise_levels: Vec<f64>,

    pub lambda_kde: f64,
    pub lambda_l2: f64,
    pub lambda_field: f64,
    pub critic_iters: usize,
    pub iterations: u64,
    pub batch_size: usize,
    pub critic_lr: f64,
    pub generator_lr: f64,
    pub optimizer: OptimizerKind,
    pub trace: TraceKind,
    pub probes: usize,
    /// Write `latest.ckpt` every this many iterations.
    pub checkpoint_every: u64,

    pub langevin_steps: usize,
    pub step_init: f64,
    pub step_final: f64,
    pub threshold: f64,

    pub unbiased_mmd: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let community = CommunityConfig::default();
        let ego = EgoConfig::default();
        let model = EdpgnnConfig::default();
        let train = TrainConfig::default();
        let langevin = LangevinConfig::default();
        RunConfig {
            seed: 0,
            dataset: DatasetKind::CommunitySmall,
            graph_count: None,
            train_fraction: 0.8,
            min_nodes: community.min_nodes,
            max_nodes: community.max_nodes,
            p_intra: community.p_intra,
            inter_rate: community.inter_rate,
            edge_list: None,
            ego_radius: ego.radius,
            ego_min_nodes: ego.min_nodes,
            ego_max_nodes: ego.max_nodes,
            citation_nodes: CitationConfig::default().nodes,
            train_data: None,
            channels: model.channels,
            steps: model.steps,
            node_dim: model.node_dim,
            hidden: model.node_hidden,
            activation: model.activation,
            learnable_epsilon: true,
            noise_levels: NoiseLadder::default().sigmas().to_vec(),
            lambda_kde: train.lambda_kde,
            lambda_l2: train.lambda_l2,
            lambda_field: train.lambda_field,
            critic_iters: train.critic_iters,
            iterations: train.iterations,
            batch_size: train.batch_size,
            critic_lr: train.critic_lr,
            generator_lr: train.generator_lr,
            optimizer: train.optimizer,
            trace: TraceKind::Hutchinson,
            probes: 1,
            checkpoint_every: 50,
            langevin_steps: langevin.steps,
            step_init: langevin.step_init,
            step_final: langevin.step_final,
            threshold: langevin.threshold,
            unbiased_mmd: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// Checks every derived config and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.ladder()?;
        self.train().validate()?;
        self.langevin().validate()?;
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(Error::InvalidArgument(format!(
                "train_fraction must lie in [0, 1], got {}",
                self.train_fraction
            )));
        }
        for p in [&self.edge_list, &self.train_data].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::InvalidArgument(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> EdpgnnConfig {
        EdpgnnConfig {
            channels: self.channels,
            steps: self.steps,
            node_dim: self.node_dim,
            node_hidden: self.hidden,
            edge_hidden: self.hidden,
            readout_hidden: self.hidden,
            activation: self.activation,
            epsilon: if self.learnable_epsilon {
                EpsilonMode::LearnablePerStep
            } else {
                EpsilonMode::Fixed(0.0)
            },
        }
    }

    pub fn ladder(&self) -> Result<NoiseLadder> {
        NoiseLadder::new(self.noise_levels.clone())
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            lambda_kde: self.lambda_kde,
            lambda_l2: self.lambda_l2,
            lambda_field: self.lambda_field,
            critic_iters: self.critic_iters,
            iterations: self.iterations,
            batch_size: self.batch_size,
            critic_lr: self.critic_lr,
            generator_lr: self.generator_lr,
            optimizer: self.optimizer,
            trace: match self.trace {
                TraceKind::Exact => TraceMode::Exact,
                TraceKind::Hutchinson => TraceMode::Hutchinson {
                    probes: self.probes,
                },
            },
            seed: derive_seed(self.seed, "train"),
        }
    }

    pub fn langevin(&self) -> LangevinConfig {
        LangevinConfig {
            steps: self.langevin_steps,
            step_init: self.step_init,
            step_final: self.step_final,
            threshold: self.threshold,
        }
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            unbiased: self.unbiased_mmd,
            ..EvalConfig::default()
        }
    }

    pub fn community(&self) -> CommunityConfig {
        CommunityConfig {
            count: self.graph_count.unwrap_or(CommunityConfig::default().count),
            min_nodes: self.min_nodes,
            max_nodes: self.max_nodes,
            p_intra: self.p_intra,
            inter_rate: self.inter_rate,
        }
    }

    pub fn ego(&self) -> EgoConfig {
        EgoConfig {
            count: self.graph_count.unwrap_or(EgoConfig::default().count),
            radius: self.ego_radius,
            min_nodes: self.ego_min_nodes,
            max_nodes: self.ego_max_nodes,
        }
    }

    pub fn citation(&self) -> CitationConfig {
        CitationConfig {
            nodes: self.citation_nodes,
            ..CitationConfig::default()
        }
    }
}

/// Independent 64-bit seed for a named purpose.
pub fn derive_seed(master: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
