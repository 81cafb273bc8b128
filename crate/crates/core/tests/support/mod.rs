//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod criteria;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steingraph::autodiff::{Tape, Tensor, Var};
use steingraph::params::ParamSet;
use steingraph::{GraphSample, Result};

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Uniform entries with magnitude in `[0.1, 1.5]` and random sign, which keeps
/// kinks of ELU, ReLU and |x| out of the finite-difference stencil.
pub fn away_from_zero(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.5);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Worst relative error between reverse-mode and central-difference gradients
/// of `⟨w, f(inputs)⟩` for a fixed random `w`, over every input entry.
///
/// Errors are measured against the largest gradient magnitude of the input,
/// so entries with a vanishing derivative do not blow up the ratio.
pub fn op_gradient_error(
    inputs: &[Tensor],
    f: &dyn for<'t> Fn(&[Var<'t>]) -> Result<Var<'t>>,
    seed: u64,
) -> f64 {
    let weights = {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let shape = f(&vars).unwrap().shape();
        uniform(&shape, -1.0, 1.0, &mut rng(seed))
    };
    let scalar = |xs: &[Tensor]| -> f64 {
        let tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        f(&vars).unwrap().value().dot(&weights)
    };
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.var(t.clone())).collect();
    let out = f(&vars).unwrap().mul_const(weights.clone()).unwrap().sum().unwrap();
    let grads = tape.gradient(out, &vars).unwrap();

    let mut worst: f64 = 0.0;
    for (i, g) in grads.iter().enumerate() {
        let g = g.value();
        let mut fd = Vec::with_capacity(g.numel());
        for j in 0..g.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            fd.push((scalar(&plus) - scalar(&minus)) / (2.0 * FD_STEP));
        }
        let scale = fd
            .iter()
            .chain(g.data())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if scale < 1e-12 {
            continue;
        }
        for (a, b) in g.data().iter().zip(&fd) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    worst
}

/// Random direction with the names and shapes of `like`, unit norm.
pub fn random_direction(like: &ParamSet, rng: &mut impl Rng) -> ParamSet {
    let mut d = ParamSet::new();
    for (name, t) in like.iter() {
        d.insert(name.clone(), uniform(t.shape(), -1.0, 1.0, rng));
    }
    let norm = d.norm();
    d.scaled(1.0 / norm)
}

/// Central difference of `f` along `dir` at `p`.
pub fn directional_fd(f: &dyn Fn(&ParamSet) -> f64, p: &ParamSet, dir: &ParamSet) -> f64 {
    let mut plus = p.clone();
    plus.add_scaled(dir, FD_STEP);
    let mut minus = p.clone();
    minus.add_scaled(dir, -FD_STEP);
    (f(&plus) - f(&minus)) / (2.0 * FD_STEP)
}

pub fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> GraphSample {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    GraphSample::from_edges(n, &edges).unwrap()
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    perm
}

/// Symmetric matrix with zero diagonal and entries in `(0, 1)`.
pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> Tensor {
    let mut m = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in (i + 1)..n {
            let x = rng.random_range(0.0..1.0);
            m.data_mut()[i * n + j] = x;
            m.data_mut()[j * n + i] = x;
        }
    }
    m
}

/// `P M Pᵀ` where node `v` moves to `perm[v]`.
pub fn permute_matrix(m: &Tensor, perm: &[usize]) -> Tensor {
    let n = perm.len();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            out.data_mut()[perm[i] * n + perm[j]] = m.data()[i * n + j];
        }
    }
    out
}

/// Connected graphlets on 2 to 4 nodes as edge lists over template positions,
/// with the orbit of every position.
const TEMPLATES: &[(usize, &[(usize, usize)], &[usize])] = &[
    (2, &[(0, 1)], &[0, 0]),
    (3, &[(0, 1), (1, 2)], &[1, 2, 1]),
    (3, &[(0, 1), (1, 2), (0, 2)], &[3, 3, 3]),
    (4, &[(0, 1), (1, 2), (2, 3)], &[4, 5, 5, 4]),
    (4, &[(0, 1), (0, 2), (0, 3)], &[7, 6, 6, 6]),
    (4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[8, 8, 8, 8]),
    (4, &[(0, 1), (0, 2), (1, 2), (2, 3)], &[10, 10, 11, 9]),
    (4, &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)], &[12, 13, 13, 12]),
    (
        4,
        &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        &[14, 14, 14, 14],
    ),
];

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Per-node orbit counts by matching every 2-, 3- and 4-node subset against
/// the graphlet templates under all position assignments.
pub fn orbit_oracle(g: &GraphSample) -> Vec<[u64; 15]> {
    let n = g.node_count();
    let mut counts = vec![[0u64; 15]; n];
    for k in 2..=4 {
        let perms = permutations(k);
        for s in subsets(n, k) {
            'templates: for &(size, edges, orbits) in TEMPLATES {
                if size != k {
                    continue;
                }
                for p in &perms {
                    // Template position i sits on node s[p[i]].
                    let mut matches = true;
                    for a in 0..k {
                        for b in (a + 1)..k {
                            let want = edges.contains(&(a, b)) || edges.contains(&(b, a));
                            if g.has_edge(s[p[a]], s[p[b]]) != want {
                                matches = false;
                            }
                        }
                    }
                    if matches {
                        for i in 0..k {
                            counts[s[p[i]]][orbits[i]] += 1;
                        }
                        break 'templates;
                    }
                }
            }
        }
    }
    counts
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
