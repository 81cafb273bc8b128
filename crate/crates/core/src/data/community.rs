use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::GraphSample;

/// Two-community random graphs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommunityConfig {
    pub count: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Edge probability inside a community.
    pub p_intra: f64,
    /// `⌈inter_rate · N⌉` cross-community edges per graph.
    pub inter_rate: f64,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig {
            count: 100,
            min_nodes: 12,
            max_nodes: 20,
            p_intra: 0.7,
            inter_rate: 0.05,
        }
    }
}

/// Each graph draws `N` uniformly from `[min_nodes, max_nodes]`, puts nodes
/// `0..⌈N/2⌉` in one community and the rest in the other, adds intra edges
/// independently with probability `p_intra`, and adds `⌈inter_rate · N⌉`
/// distinct cross edges chosen uniformly.
pub fn gen_community_small(config: &CommunityConfig, seed: u64) -> Result<Dataset> {
    if config.count == 0 {
        return Err(Error::InvalidArgument("community dataset needs count ≥ 1".into()));
    }
    if config.min_nodes < 2 || config.min_nodes > config.max_nodes {
        return Err(Error::InvalidArgument(format!(
            "node range [{}, {}] is invalid",
            config.min_nodes, config.max_nodes
        )));
    }
    if !(0.0..=1.0).contains(&config.p_intra) || !(config.inter_rate >= 0.0) {
        return Err(Error::InvalidArgument("edge rates out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs = (0..config.count)
        .map(|_| community_graph(config, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new("community-small", graphs)
        .with_meta("generator", "community-small")
        .with_meta("seed", seed)
        .with_meta("params", serde_json::to_value(config)?))
}

fn community_graph(config: &CommunityConfig, rng: &mut ChaCha8Rng) -> Result<GraphSample> {
    let n = rng.random_range(config.min_nodes..=config.max_nodes);
    let first = n.div_ceil(2);
    let mut edges = Vec::new();
    for (lo, hi) in [(0, first), (first, n)] {
        for i in lo..hi {
            for j in (i + 1)..hi {
                if rng.random::<f64>() < config.p_intra {
                    edges.push((i, j));
                }
            }
        }
    }
    let second = n - first;
    let cross = first * second;
    let wanted = ((config.inter_rate * n as f64).ceil() as usize).min(cross);
    for k in sample(rng, cross, wanted).into_vec() {
        edges.push((k / second, first + k % second));
    }
    GraphSample::from_edges(n, &edges)
}
