//! Binary graphs and the strict-upper-triangle coordinate system.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Undirected simple graph stored as a dense binary adjacency matrix.
///
/// Construction always validates symmetry, the zero diagonal and `{0,1}`
/// entries; a `GraphSample` in hand is known to be valid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GraphSample {
    n: usize,
    adj: Vec<u8>,
}

impl GraphSample {
    pub fn empty(n: usize) -> Self {
        GraphSample {
            n,
            adj: vec![0; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = GraphSample::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.set_edge(i, j, true);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = GraphSample::empty(n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at node {u}")));
            }
            g.set_edge(u, v, true);
        }
        Ok(g)
    }

    /// Validates an `n × n` matrix of `0.0`/`1.0` entries.
    pub fn from_matrix(m: &Tensor) -> Result<Self> {
        if m.rank() != 2 || m.rows() != m.cols() {
            return Err(Error::Precondition(format!(
                "adjacency must be square, got {:?}",
                m.shape()
            )));
        }
        let n = m.rows();
        let mut g = GraphSample::empty(n);
        for i in 0..n {
            for j in 0..n {
                let x = m.get2(i, j);
                if x != 0.0 && x != 1.0 {
                    return Err(Error::Precondition(format!(
                        "adjacency entry ({i}, {j}) = {x} is not binary"
                    )));
                }
                if x != m.get2(j, i) {
                    return Err(Error::Precondition("adjacency is not symmetric".into()));
                }
                if i == j && x != 0.0 {
                    return Err(Error::Precondition(format!("self-loop at node {i}")));
                }
                g.adj[i * n + j] = x as u8;
            }
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v] == 1
    }

    fn set_edge(&mut self, u: usize, v: usize, present: bool) {
        let x = u8::from(present);
        self.adj[u * self.n + v] = x;
        self.adj[v * self.n + u] = x;
    }

    /// Edges as `(u, v)` with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut out = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|&x| x as usize).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v * self.n..(v + 1) * self.n]
            .iter()
            .map(|&x| x as usize)
            .sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&w| self.has_edge(v, w))
    }

    /// Fraction of node pairs joined by an edge (0 for fewer than 2 nodes).
    pub fn density(&self) -> f64 {
        let pairs = pair_count(self.n);
        if pairs == 0 {
            0.0
        } else {
            self.edge_count() as f64 / pairs as f64
        }
    }

    pub fn to_matrix(&self) -> Tensor {
        Tensor::from_parts(
            vec![self.n, self.n],
            self.adj.iter().map(|&x| f64::from(x)).collect(),
        )
    }

    pub fn upper(&self) -> UpperTriCoords {
        UpperTriCoords::from_fn(self.n, |i, j| f64::from(self.adj[i * self.n + j]))
    }

    /// Relabels nodes so that node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> GraphSample {
        let n = self.n;
        let mut g = GraphSample::empty(n);
        for (u, v) in self.edges() {
            g.set_edge(perm[u], perm[v], true);
        }
        g
    }

    /// Subgraph induced by `nodes`, relabelled `0..nodes.len()` in that order.
    pub fn induced(&self, nodes: &[usize]) -> GraphSample {
        let k = nodes.len();
        let mut g = GraphSample::empty(k);
        for a in 0..k {
            for b in (a + 1)..k {
                if self.has_edge(nodes[a], nodes[b]) {
                    g.set_edge(a, b, true);
                }
            }
        }
        g
    }
}

/// Number of strict-upper-triangle entries of an `n × n` matrix.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Row and column indices of the strict upper triangle, row-major.
pub fn upper_pairs(n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rows = Vec::with_capacity(pair_count(n));
    let mut cols = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in (i + 1)..n {
            rows.push(i);
            cols.push(j);
        }
    }
    (rows, cols)
}

/// Flat `i * n + j` positions of the strict upper triangle, row-major.
pub fn upper_flat_index(n: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in (i + 1)..n {
            idx.push(i * n + j);
        }
    }
    idx
}

/// Position of pair `(i, j)`, `i < j`, in the row-major strict upper triangle.
pub fn pair_position(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// The `N(N−1)/2` free coordinates of a symmetric zero-diagonal matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperTriCoords {
    n: usize,
    values: Vec<f64>,
}

impl UpperTriCoords {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != pair_count(n) {
            return Err(Error::Shape {
                op: "upper-tri",
                lhs: vec![pair_count(n)],
                rhs: vec![values.len()],
            });
        }
        Ok(UpperTriCoords { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        UpperTriCoords {
            n,
            values: vec![0.0; pair_count(n)],
        }
    }

    fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(f(i, j));
            }
        }
        UpperTriCoords { n, values }
    }

    /// Reads the strict upper triangle of a square matrix.
    pub fn from_matrix(m: &Tensor) -> Result<Self> {
        if m.rank() != 2 || m.rows() != m.cols() {
            return Err(Error::Precondition(format!(
                "expected a square matrix, got {:?}",
                m.shape()
            )));
        }
        Ok(UpperTriCoords::from_fn(m.rows(), |i, j| m.get2(i, j)))
    }

    /// Like [`from_matrix`](Self::from_matrix) but rejects matrices that are
    /// not symmetric with zero diagonal (tolerance `tol`).
    pub fn from_symmetric(m: &Tensor, tol: f64) -> Result<Self> {
        let u = UpperTriCoords::from_matrix(m)?;
        let n = u.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            worst = worst.max(m.get2(i, i).abs());
            for j in (i + 1)..n {
                worst = worst.max((m.get2(i, j) - m.get2(j, i)).abs());
            }
        }
        if !m.is_finite() {
            return Err(Error::Precondition("adjacency has non-finite entries".into()));
        }
        if worst > tol {
            return Err(Error::Precondition(format!(
                "adjacency is not symmetric with zero diagonal (max deviation {worst:.3e})"
            )));
        }
        Ok(u)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mirrored full matrix with zero diagonal.
    pub fn to_matrix(&self) -> Tensor {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                data[i * n + j] = self.values[k];
                data[j * n + i] = self.values[k];
                k += 1;
            }
        }
        Tensor::from_parts(vec![n, n], data)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::vector(self.values.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pair_positions_are_row_major() {
        let n = 6;
        let (rows, cols) = upper_pairs(n);
        for (k, (&i, &j)) in rows.iter().zip(&cols).enumerate() {
            assert_eq!(pair_position(n, i, j), k);
        }
        assert_eq!(rows.len(), 15);
    }

    #[test]
    fn from_matrix_rejects_invalid() {
        let m = Tensor::matrix(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(GraphSample::from_matrix(&m).is_err());
        let m = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(GraphSample::from_matrix(&m).is_err());
        let m = Tensor::matrix(2, 2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        assert!(GraphSample::from_matrix(&m).is_err());
        assert!(GraphSample::from_edges(3, &[(1, 1)]).is_err());
        assert!(GraphSample::from_edges(3, &[(1, 3)]).is_err());
    }

    #[test]
    fn star_degrees() {
        let g = GraphSample::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(g.degrees(), vec![3, 1, 1, 1]);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.density(), 0.5);
    }

    proptest! {
        #[test]
        fn upper_round_trip(n in 0usize..9, seed in any::<u64>()) {
            let mut state = seed;
            let values: Vec<f64> = (0..pair_count(n)).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            }).collect();
            let u = UpperTriCoords::new(n, values).unwrap();
            let back = UpperTriCoords::from_symmetric(&u.to_matrix(), 0.0).unwrap();
            prop_assert_eq!(back, u);
        }

        #[test]
        fn graph_matrix_round_trip(n in 1usize..10, bits in proptest::collection::vec(any::<bool>(), 45)) {
            let (rows, cols) = upper_pairs(n);
            let edges: Vec<_> = rows.iter().zip(&cols).zip(&bits)
                .filter(|(_, &b)| b).map(|((&i, &j), _)| (i, j)).collect();
            let g = GraphSample::from_edges(n, &edges).unwrap();
            prop_assert_eq!(GraphSample::from_matrix(&g.to_matrix()).unwrap(), g.clone());
            prop_assert_eq!(g.edges(), edges);
        }
    }
}
