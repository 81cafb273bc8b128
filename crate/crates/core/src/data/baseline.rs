use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::GraphSample;
use crate::sampling::sample_node_count;

/// Erdős–Rényi graphs matched to `train` per node count.
///
/// Each graph draws `N` from the empirical size distribution and connects
/// every pair independently with the mean density of the training graphs of
/// that size.
pub fn erdos_renyi_baseline(train: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("baseline needs training graphs".into()));
    }
    let mut by_size: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for g in &train.graphs {
        let e = by_size.entry(g.node_count()).or_default();
        e.0 += g.density();
        e.1 += 1;
    }
    let sizes = train.sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(count);
    for _ in 0..count {
        let n = sample_node_count(&sizes, &mut rng)?;
        let (total, k) = by_size[&n];
        let p = total / k as f64;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        graphs.push(GraphSample::from_edges(n, &edges)?);
    }
    Ok(Dataset::new(train.name.clone(), graphs)
        .with_meta("generator", "erdos-renyi")
        .with_meta("seed", seed))
}
