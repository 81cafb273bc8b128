//! Datasets: procedural generators, edge-list ingestion, ego extraction,
//! splitting, and the JSON graph container.

mod baseline;
mod community;
mod ego;
mod format;

pub use baseline::erdos_renyi_baseline;
pub use community::{gen_community_small, CommunityConfig};
pub use ego::{
    extract_ego_small, ingest_edge_list, parse_edge_list, synthetic_citation, write_edge_list,
    CitationConfig, EgoConfig, FullGraph,
};
pub use format::{load_graphs, save_graphs, GRAPH_FORMAT_VERSION};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::GraphSample;

/// Named collection of graphs with provenance metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<GraphSample>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graphs: Vec<GraphSample>) -> Self {
        Dataset {
            name: name.into(),
            graphs,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Node count of every graph, the empirical size distribution.
    pub fn sizes(&self) -> Vec<usize> {
        self.graphs.iter().map(GraphSample::node_count).collect()
    }
}

/// Seeded shuffle, then the first `round(fraction · len)` graphs are train
/// and the rest test.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in [0, 1], got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (train_fraction * dataset.len() as f64).round() as usize;
    let pick = |idx: &[usize], tag: &str| {
        let mut d = Dataset::new(
            dataset.name.clone(),
            idx.iter().map(|&i| dataset.graphs[i].clone()).collect(),
        );
        d.metadata = dataset.metadata.clone();
        d.with_meta("split", tag)
            .with_meta("split_seed", seed)
            .with_meta("train_fraction", train_fraction)
    };
    Ok((pick(&order[..cut], "train"), pick(&order[cut..], "test")))
}
