use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::GraphSample;

pub const GRAPH_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    n: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    format_version: u64,
    name: String,
    graphs: Vec<GraphRecord>,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
}

pub fn save_graphs(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = GraphFile {
        format_version: GRAPH_FORMAT_VERSION,
        name: dataset.name.clone(),
        graphs: dataset
            .graphs
            .iter()
            .map(|g| GraphRecord {
                n: g.node_count(),
                edges: g.edges(),
            })
            .collect(),
        metadata: dataset.metadata.clone(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a graph file. Edges must be listed once each with `u < v < n`.
pub fn load_graphs(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Format(format!("{}: missing format_version", path.display())))?;
    if found != GRAPH_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found,
            expected: GRAPH_FORMAT_VERSION,
        });
    }
    let file: GraphFile = serde_json::from_value(raw)?;
    let mut graphs = Vec::with_capacity(file.graphs.len());
    for (i, rec) in file.graphs.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &rec.edges {
            if u >= v || v >= rec.n || !seen.insert((u, v)) {
                return Err(Error::Format(format!(
                    "{}: graph {i}: bad or repeated edge ({u}, {v}) for n = {}",
                    path.display(),
                    rec.n
                )));
            }
        }
        graphs.push(GraphSample::from_edges(rec.n, &rec.edges)?);
    }
    Ok(Dataset {
        name: file.name,
        graphs,
        metadata: file.metadata,
    })
}
