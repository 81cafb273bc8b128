use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::GraphSample;

/// Large undirected simple graph with the original node identifiers.
///
/// Node `i` carries `ids[i]`; ids are sorted (numerically when every id is an
/// integer, lexicographically otherwise) so the indexing does not depend on
/// line order in the source file.
#[derive(Clone, Debug, PartialEq)]
pub struct FullGraph {
    pub ids: Vec<String>,
    adj: Vec<Vec<usize>>,
    /// Hex SHA-256 of the source bytes, when read from a file.
    pub source_hash: Option<String>,
}

impl FullGraph {
    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Nodes within `radius` hops of `center`, ascending.
    pub fn ball(&self, center: usize, radius: usize) -> Vec<usize> {
        let mut dist = HashMap::from([(center, 0usize)]);
        let mut queue = VecDeque::from([center]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            if d == radius {
                continue;
            }
            for &v in &self.adj[u] {
                if !dist.contains_key(&v) {
                    dist.insert(v, d + 1);
                    queue.push_back(v);
                }
            }
        }
        let mut nodes: Vec<usize> = dist.into_keys().collect();
        nodes.sort_unstable();
        nodes
    }

    /// Induced subgraph on sorted `nodes`, relabelled in that order.
    pub fn induced(&self, nodes: &[usize]) -> GraphSample {
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut edges = Vec::new();
        for (i, &u) in nodes.iter().enumerate() {
            for v in &self.adj[u] {
                if let Some(&j) = local.get(v) {
                    if i < j {
                        edges.push((i, j));
                    }
                }
            }
        }
        GraphSample::from_edges(nodes.len(), &edges).expect("local indices in range")
    }

    fn from_id_edges(pairs: BTreeSet<(String, String)>, isolated: BTreeSet<String>) -> Self {
        let mut ids: Vec<String> = isolated
            .into_iter()
            .chain(pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if ids.iter().all(|s| s.parse::<u64>().is_ok()) {
            ids.sort_by_key(|s| s.parse::<u64>().expect("checked"));
        }
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for (a, b) in &pairs {
            let (u, v) = (index[a.as_str()], index[b.as_str()]);
            adj[u].push(v);
            adj[v].push(u);
        }
        for ns in &mut adj {
            ns.sort_unstable();
            ns.dedup();
        }
        FullGraph {
            ids,
            adj,
            source_hash: None,
        }
    }
}

/// Parses a whitespace-separated edge list, one `u v` pair per line.
///
/// Blank lines and lines starting with `#` or `%` are skipped. Direction is
/// ignored, duplicate edges are merged and self-loops dropped (the node
/// itself is kept). `origin` only labels errors.
pub fn parse_edge_list(text: &str, origin: &Path) -> Result<FullGraph> {
    let mut pairs = BTreeSet::new();
    let mut isolated = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = tokens[..] else {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected 2 node ids, found {}", tokens.len()),
            });
        };
        if a == b {
            isolated.insert(a.to_string());
        } else if a < b {
            pairs.insert((a.to_string(), b.to_string()));
        } else {
            pairs.insert((b.to_string(), a.to_string()));
        }
    }
    if pairs.is_empty() && isolated.is_empty() {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "no edges".into(),
        });
    }
    Ok(FullGraph::from_id_edges(pairs, isolated))
}

pub fn ingest_edge_list(path: &Path) -> Result<FullGraph> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let mut g = parse_edge_list(text, path)?;
    g.source_hash = Some(hex(&Sha256::digest(&bytes)));
    Ok(g)
}

pub fn write_edge_list(graph: &FullGraph, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (u, v) in graph.edges() {
        writeln!(out, "{} {}", graph.ids[u], graph.ids[v]).expect("string write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EgoConfig {
    pub count: usize,
    pub radius: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
}

impl Default for EgoConfig {
    fn default() -> Self {
        EgoConfig {
            count: 200,
            radius: 1,
            min_nodes: 4,
            max_nodes: 18,
        }
    }
}

/// Ego networks around uniformly drawn centers.
///
/// Centers are visited in a seeded random order without repetition; an ego
/// network is kept when its node count lies in `[min_nodes, max_nodes]`.
/// Fails with [`Error::NotEnoughEgos`] when the graph runs out of centers.
pub fn extract_ego_small(graph: &FullGraph, config: &EgoConfig, seed: u64) -> Result<Dataset> {
    if config.min_nodes > config.max_nodes {
        return Err(Error::InvalidArgument("ego size range is empty".into()));
    }
    let mut centers: Vec<usize> = (0..graph.node_count()).collect();
    centers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut graphs = Vec::with_capacity(config.count);
    let mut picked = Vec::with_capacity(config.count);
    for c in centers {
        if graphs.len() == config.count {
            break;
        }
        let nodes = graph.ball(c, config.radius);
        if (config.min_nodes..=config.max_nodes).contains(&nodes.len()) {
            graphs.push(graph.induced(&nodes));
            picked.push(graph.ids[c].clone());
        }
    }
    if graphs.len() < config.count {
        return Err(Error::NotEnoughEgos {
            found: graphs.len(),
            requested: config.count,
        });
    }
    let mut d = Dataset::new("ego-small", graphs)
        .with_meta("generator", "ego-small")
        .with_meta("seed", seed)
        .with_meta("params", serde_json::to_value(config)?)
        .with_meta("centers", picked);
    if let Some(h) = &graph.source_hash {
        d = d.with_meta("source_sha256", h.clone());
    }
    Ok(d)
}

/// Sparse growth model standing in for a citation network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CitationConfig {
    pub nodes: usize,
    /// Each new node links to between 1 and `max_links` earlier nodes.
    pub max_links: usize,
    /// Probability that a further link goes to a neighbor of the first target.
    pub closure: f64,
}

impl Default for CitationConfig {
    fn default() -> Self {
        CitationConfig {
            nodes: 3000,
            max_links: 3,
            closure: 0.5,
        }
    }
}

/// Nodes arrive one at a time and cite earlier nodes: the first target is
/// chosen proportionally to degree, later ones close a triangle through the
/// first target's neighborhood with probability `closure`.
pub fn synthetic_citation(config: &CitationConfig, seed: u64) -> Result<FullGraph> {
    if config.nodes < 2 || config.max_links == 0 || !(0.0..=1.0).contains(&config.closure) {
        return Err(Error::InvalidArgument(format!("invalid citation config {config:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); config.nodes];
    // Every edge endpoint once; a uniform draw is a degree-proportional node.
    let mut ends: Vec<usize> = Vec::new();
    let link = |adj: &mut Vec<BTreeSet<usize>>, ends: &mut Vec<usize>, u: usize, v: usize| {
        if u != v && adj[u].insert(v) {
            adj[v].insert(u);
            ends.extend([u, v]);
        }
    };
    link(&mut adj, &mut ends, 0, 1);
    for v in 2..config.nodes {
        let links = rng.random_range(1..=config.max_links).min(v);
        let first = ends[rng.random_range(0..ends.len())];
        link(&mut adj, &mut ends, v, first);
        for _ in 1..links {
            let cand: Vec<usize> = adj[first].iter().copied().filter(|&w| w != v).collect();
            let target = if !cand.is_empty() && rng.random::<f64>() < config.closure {
                cand[rng.random_range(0..cand.len())]
            } else {
                rng.random_range(0..v)
            };
            link(&mut adj, &mut ends, v, target);
        }
    }
    Ok(FullGraph {
        ids: (0..config.nodes).map(|i| i.to_string()).collect(),
        adj: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        source_hash: None,
    })
}
