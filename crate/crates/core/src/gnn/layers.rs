use rand::Rng;

use crate::autodiff::{Tensor, Var};
use crate::error::Result;
use crate::params::{glorot_uniform, Bound, ParamSet};

/// Per-noise-level affine modulation `(·)α_i + β_i`, present on critic layers.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Modulation {
    pub levels: usize,
}

/// Affine layer `x W + b`, optionally followed by noise-level modulation.
#[derive(Clone, Debug)]
pub(crate) struct Dense {
    pub name: String,
    pub fan_in: usize,
    pub fan_out: usize,
    pub modulation: Option<Modulation>,
}

impl Dense {
    pub fn new(name: impl Into<String>, fan_in: usize, fan_out: usize) -> Self {
        Dense {
            name: name.into(),
            fan_in,
            fan_out,
            modulation: None,
        }
    }

    pub fn modulated(mut self, modulation: Option<Modulation>) -> Self {
        self.modulation = modulation;
        self
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut impl Rng) {
        params.insert(
            format!("{}.w", self.name),
            glorot_uniform(self.fan_in, self.fan_out, rng),
        );
        params.insert(format!("{}.b", self.name), Tensor::zeros(&[self.fan_out]));
        init_modulation(&self.name, self.fan_out, self.modulation, params);
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>, level: Option<usize>) -> Result<Var<'t>> {
        let w = p.get(&format!("{}.w", self.name))?;
        let b = p.get(&format!("{}.b", self.name))?;
        let y = x.matmul(w)?.add_row(b)?;
        modulate(&self.name, self.fan_out, self.modulation, p, y, level)
    }
}

/// First edge-MLP layer on node pairs.
///
/// Computes `a_p W_a + (h_u + h_v) W_s + (h_u ⊙ h_v) W_m + b` for every pair
/// `p = (u, v)`; every term is symmetric in `u ↔ v`. The `W_s` product is
/// taken on nodes before gathering, which is the same value as applying it to
/// the gathered sum.
#[derive(Clone, Debug)]
pub(crate) struct PairDense {
    pub name: String,
    pub edge_in: usize,
    pub node_in: usize,
    pub fan_out: usize,
    pub modulation: Option<Modulation>,
}

impl PairDense {
    pub fn init(&self, params: &mut ParamSet, rng: &mut impl Rng) {
        let fan_in = self.edge_in + 2 * self.node_in;
        let full = glorot_uniform(fan_in, self.fan_out, rng);
        let (a, rest) = full.data().split_at(self.edge_in * self.fan_out);
        let (s, m) = rest.split_at(self.node_in * self.fan_out);
        let t = |rows: usize, d: &[f64]| Tensor::from_parts(vec![rows, self.fan_out], d.to_vec());
        params.insert(format!("{}.w_edge", self.name), t(self.edge_in, a));
        params.insert(format!("{}.w_sum", self.name), t(self.node_in, s));
        params.insert(format!("{}.w_prod", self.name), t(self.node_in, m));
        params.insert(format!("{}.b", self.name), Tensor::zeros(&[self.fan_out]));
        init_modulation(&self.name, self.fan_out, self.modulation, params);
    }

    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        edges: Var<'t>,
        nodes: Var<'t>,
        pairs: &PairIndex,
        level: Option<usize>,
    ) -> Result<Var<'t>> {
        let w_edge = p.get(&format!("{}.w_edge", self.name))?;
        let w_sum = p.get(&format!("{}.w_sum", self.name))?;
        let w_prod = p.get(&format!("{}.w_prod", self.name))?;
        let b = p.get(&format!("{}.b", self.name))?;
        let projected = nodes.matmul(w_sum)?;
        let sum_term = projected
            .gather_rows(&pairs.rows)?
            .add(projected.gather_rows(&pairs.cols)?)?;
        let prod = nodes
            .gather_rows(&pairs.rows)?
            .mul(nodes.gather_rows(&pairs.cols)?)?;
        let y = edges
            .matmul(w_edge)?
            .add(sum_term)?
            .add(prod.matmul(w_prod)?)?
            .add_row(b)?;
        modulate(&self.name, self.fan_out, self.modulation, p, y, level)
    }
}

fn init_modulation(name: &str, width: usize, m: Option<Modulation>, params: &mut ParamSet) {
    if let Some(m) = m {
        params.insert(format!("{name}.alpha"), Tensor::ones(&[m.levels, width]));
        params.insert(format!("{name}.beta"), Tensor::zeros(&[m.levels, width]));
    }
}

fn modulate<'t>(
    name: &str,
    width: usize,
    m: Option<Modulation>,
    p: &Bound<'t>,
    y: Var<'t>,
    level: Option<usize>,
) -> Result<Var<'t>> {
    let (Some(_), Some(level)) = (m, level) else {
        return Ok(y);
    };
    let alpha = p
        .get(&format!("{name}.alpha"))?
        .slice(0, level, 1)?
        .reshape(&[width])?;
    let beta = p
        .get(&format!("{name}.beta"))?
        .slice(0, level, 1)?
        .reshape(&[width])?;
    y.mul_row(alpha)?.add_row(beta)
}

/// Index lists for the strict upper triangle of an `n`-node graph.
#[derive(Clone, Debug)]
pub(crate) struct PairIndex {
    pub n: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub flat: Vec<usize>,
}

impl PairIndex {
    pub fn new(n: usize) -> Self {
        let (rows, cols) = crate::graph::upper_pairs(n);
        let flat = crate::graph::upper_flat_index(n);
        PairIndex { n, rows, cols, flat }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Symmetric `n × n` matrix with zero diagonal from a `[P]` vector.
    pub fn to_matrix<'t>(&self, u: Var<'t>) -> Result<Var<'t>> {
        let upper = u.scatter_add(self.flat.clone(), &[self.n, self.n])?;
        upper.add(upper.transpose()?)
    }
}
