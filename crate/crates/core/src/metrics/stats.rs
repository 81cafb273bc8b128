use serde::{Deserialize, Serialize};

use crate::graph::GraphSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatKind {
    Degree,
    Clustering,
    Orbit,
}

/// Per-graph statistic. For degree and clustering `values` is a normalized
/// histogram; for orbits it is the node-mean orbit-count vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StatHistogram {
    pub kind: StatKind,
    pub values: Vec<f64>,
}

pub const CLUSTERING_BINS: usize = 100;
pub const ORBITS: usize = 15;

/// Normalized degree histogram with bins `0..=max(max_degree, N − 1)`.
/// A graph without nodes puts all mass on degree 0.
pub fn degree_stat(g: &GraphSample, max_degree: usize) -> StatHistogram {
    let n = g.node_count();
    let bins = max_degree.max(n.saturating_sub(1)) + 1;
    let mut values = vec![0.0; bins];
    if n == 0 {
        values[0] = 1.0;
    } else {
        for d in g.degrees() {
            values[d] += 1.0;
        }
        values.iter_mut().for_each(|v| *v /= n as f64);
    }
    StatHistogram {
        kind: StatKind::Degree,
        values,
    }
}

/// Local clustering coefficient of every node; 0 for degree below 2.
pub fn clustering_coefficients(g: &GraphSample) -> Vec<f64> {
    (0..g.node_count())
        .map(|v| {
            let nbrs: Vec<usize> = g.neighbors(v).collect();
            let d = nbrs.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    if g.has_edge(a, b) {
                        links += 1;
                    }
                }
            }
            links as f64 / (d * (d - 1) / 2) as f64
        })
        .collect()
}

/// Normalized histogram of clustering coefficients over 100 equal bins on
/// `[0, 1]`; a coefficient of exactly 1 falls in the last bin.
pub fn clustering_stat(g: &GraphSample) -> StatHistogram {
    let mut values = vec![0.0; CLUSTERING_BINS];
    let coeffs = clustering_coefficients(g);
    if coeffs.is_empty() {
        values[0] = 1.0;
    } else {
        for c in &coeffs {
            let bin = ((c * CLUSTERING_BINS as f64) as usize).min(CLUSTERING_BINS - 1);
            values[bin] += 1.0;
        }
        values.iter_mut().for_each(|v| *v /= coeffs.len() as f64);
    }
    StatHistogram {
        kind: StatKind::Clustering,
        values,
    }
}

/// Counts, for every node, its appearances in each of the 15 orbits of
/// connected graphlets on 2 to 4 nodes, by enumerating every node subset of
/// size 2, 3 and 4 and classifying the induced subgraph.
///
/// Orbit numbering: 0 edge; 1 path-3 end, 2 path-3 centre; 3 triangle;
/// 4 path-4 end, 5 path-4 inner; 6 star leaf, 7 star centre; 8 4-cycle;
/// 9 paw pendant, 10 paw triangle node of degree 2, 11 paw hub;
/// 12 diamond degree-2 node, 13 diamond degree-3 node; 14 K4.
pub fn orbit_counts(g: &GraphSample) -> Vec<[u64; ORBITS]> {
    let n = g.node_count();
    let mut counts = vec![[0u64; ORBITS]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            if g.has_edge(a, b) {
                counts[a][0] += 1;
                counts[b][0] += 1;
            }
            for c in (b + 1)..n {
                classify(g, &[a, b, c], &mut counts);
                for d in (c + 1)..n {
                    classify(g, &[a, b, c, d], &mut counts);
                }
            }
        }
    }
    counts
}

fn classify(g: &GraphSample, nodes: &[usize], counts: &mut [[u64; ORBITS]]) {
    let k = nodes.len();
    let mut deg = [0usize; 4];
    let mut edges = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            if g.has_edge(nodes[i], nodes[j]) {
                deg[i] += 1;
                deg[j] += 1;
                edges += 1;
            }
        }
    }
    let deg = &deg[..k];
    let orbit_of = |d: usize| -> Option<usize> {
        match (k, edges) {
            (3, 2) => Some(if d == 2 { 2 } else { 1 }),
            (3, 3) => Some(3),
            // Three edges on four nodes: a path or a star (a triangle plus an
            // isolated node has a degree-0 node and is disconnected).
            (4, 3) if deg.contains(&3) => Some(if d == 3 { 7 } else { 6 }),
            (4, 3) if !deg.contains(&0) => Some(if d == 2 { 5 } else { 4 }),
            (4, 4) if deg.contains(&3) => Some(match d {
                1 => 9,
                2 => 10,
                _ => 11,
            }),
            (4, 4) => Some(8),
            (4, 5) => Some(if d == 3 { 13 } else { 12 }),
            (4, 6) => Some(14),
            _ => None,
        }
    };
    // Four edges on four nodes are either the 4-cycle or the paw; both are
    // connected. Fewer than k − 1 edges is always disconnected.
    for (i, &v) in nodes.iter().enumerate() {
        if let Some(o) = orbit_of(deg[i]) {
            counts[v][o] += 1;
        }
    }
}

/// Node-mean orbit-count vector.
pub fn orbit_stat(g: &GraphSample) -> StatHistogram {
    let counts = orbit_counts(g);
    let mut values = vec![0.0; ORBITS];
    for c in &counts {
        for (v, &x) in values.iter_mut().zip(c) {
            *v += x as f64;
        }
    }
    if !counts.is_empty() {
        values.iter_mut().for_each(|v| *v /= counts.len() as f64);
    }
    StatHistogram {
        kind: StatKind::Orbit,
        values,
    }
}
