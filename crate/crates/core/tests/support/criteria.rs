//! One check per acceptance criterion. Each returns a one-line summary of
//! what was measured, or a description of the first violation.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use steingraph::autodiff::{jacobian_trace, Activation, Tape, Tensor, TraceMode, Var};
use steingraph::gnn::{CriticNet, EdpgnnConfig, EnergyNet};
use steingraph::metrics::{
    clustering_stat, degree_stat, features, mmd, orbit_counts, orbit_stat, Distance, EvalConfig,
    KernelConfig, StatKind,
};
use steingraph::model::{CriticModel, EnergyModel};
use steingraph::params::ParamSet;
use steingraph::sampling::{langevin_sample, LangevinConfig, QuadraticEnergy};
use steingraph::stein::{energy_score, kde_score, stein_term};
use steingraph::{Result, UpperTriCoords};

use super::*;

pub type Verdict = std::result::Result<String, String>;

pub const OP_TOL: f64 = 1e-6;
pub const NET_TOL: f64 = 1e-5;
pub const NESTED_TOL: f64 = 1e-4;
pub const INSTANCES: u64 = 20;
pub const PERM_TOL: f64 = 1e-9;

fn within(limit: Duration, start: Instant, summary: String) -> Verdict {
    let took = start.elapsed();
    if took > limit {
        Err(format!("{summary}, but took {took:.1?} (limit {limit:?})"))
    } else {
        Ok(format!("{summary} in {took:.1?}"))
    }
}

/// Tracks the worst error seen and the first failure.
struct Worst {
    max: f64,
    failure: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Worst { max: 0.0, failure: None }
    }

    fn record(&mut self, err: f64, tol: f64, what: impl FnOnce() -> String) {
        if err.is_nan() || err >= tol {
            self.failure.get_or_insert_with(|| format!("{}: error {err:e} ≥ {tol:e}", what()));
        }
        if err > self.max {
            self.max = err;
        }
    }
}

type OpFn<'a> = &'a dyn for<'t> Fn(&[Var<'t>]) -> Result<Var<'t>>;

/// Every differentiable op on random shapes, checked against central
/// differences.
pub fn op_gradients() -> (f64, Option<String>) {
    let mut worst = Worst::new();
    let mut check = |name: &str, inputs: Vec<Tensor>, f: OpFn, s: u64| {
        let err = op_gradient_error(&inputs, f, s);
        worst.record(err, OP_TOL, || format!("{name} (instance {s})"));
    };
    for s in 0..INSTANCES {
        let mut r = rng(s);
        let (m, k, n) = (r.random_range(1..5), r.random_range(1..5), r.random_range(1..5));
        let a = away_from_zero(&[m, k], &mut r);
        let b = away_from_zero(&[m, k], &mut r);
        let pos = uniform(&[m, k], 0.2, 2.0, &mut r);
        check("add", vec![a.clone(), b.clone()], &|v| v[0].add(v[1]), s);
        check("sub", vec![a.clone(), b.clone()], &|v| v[0].sub(v[1]), s);
        check("mul", vec![a.clone(), b.clone()], &|v| v[0].mul(v[1]), s);
        check("scale", vec![a.clone()], &|v| v[0].scale(-1.7), s);
        check("sum", vec![a.clone()], &|v| v[0].sum(), s);
        check("mean", vec![a.clone()], &|v| v[0].mean(), s);
        check("dot", vec![a.clone(), b.clone()], &|v| v[0].dot(v[1]), s);
        check("square", vec![a.clone()], &|v| v[0].square(), s);
        check("exp", vec![a.clone()], &|v| v[0].exp(), s);
        check("ln", vec![pos.clone()], &|v| v[0].ln(), s);
        check("recip", vec![pos], &|v| v[0].recip(), s);
        check("logsumexp", vec![a.clone()], &|v| v[0].logsumexp(), s);
        check("abs", vec![a.clone()], &|v| v[0].abs(), s);
        check("elu", vec![a.clone()], &|v| v[0].activation(Activation::Elu), s);
        check("tanh", vec![a.clone()], &|v| v[0].activation(Activation::Tanh), s);
        check("relu", vec![a.clone()], &|v| v[0].activation(Activation::Relu), s);
        let c = b.clone();
        check("mul_const", vec![a.clone()], &move |v| v[0].mul_const(c.clone()), s);
        let c = b.clone();
        check("add_const", vec![a.clone()], &move |v| v[0].add_const(c.clone()), s);
        let one = away_from_zero(&[1], &mut r);
        check("expand_scalar", vec![one], &move |v| v[0].expand_scalar(&[m, k]), s);

        let bm = away_from_zero(&[k, n], &mut r);
        let bt = away_from_zero(&[n, k], &mut r);
        let at = away_from_zero(&[k, m], &mut r);
        let row = away_from_zero(&[k], &mut r);
        let sq = away_from_zero(&[m, m], &mut r);
        check("matmul", vec![a.clone(), bm.clone()], &|v| v[0].matmul(v[1]), s);
        check("matmul_tb", vec![a.clone(), bt], &|v| v[0].matmul_t(v[1], false, true), s);
        check("matmul_ta", vec![at, bm], &|v| v[0].matmul_t(v[1], true, false), s);
        check("transpose", vec![a.clone()], &|v| v[0].transpose(), s);
        check("reshape", vec![a.clone()], &move |v| v[0].reshape(&[k * m]), s);
        check("sum_rows", vec![a.clone()], &|v| v[0].sum_rows(), s);
        check("expand_rows", vec![row.clone()], &move |v| v[0].expand_rows(m), s);
        check("add_row", vec![a.clone(), row.clone()], &|v| v[0].add_row(v[1]), s);
        check("mul_row", vec![a.clone(), row], &|v| v[0].mul_row(v[1]), s);
        check("symmetrize", vec![sq], &|v| v[0].symmetrize(), s);
        let c = away_from_zero(&[m, n], &mut r);
        check("concat0", vec![a.clone(), away_from_zero(&[2, k], &mut r)], &|v| Var::concat(v, 0), s);
        check("concat1", vec![a.clone(), c], &|v| Var::concat(v, 1), s);
        let start = r.random_range(0..k);
        let len = r.random_range(1..=k - start);
        check("slice", vec![a.clone()], &move |v| v[0].slice(1, start, len), s);
        check("pad", vec![a.clone()], &move |v| v[0].pad(0, 1, m + 2), s);
        let idx: Vec<usize> = (0..7).map(|_| r.random_range(0..m * k)).collect();
        let i2 = idx.clone();
        check("gather", vec![a.clone()], &move |v| v[0].gather(i2.clone(), &[7]), s);
        let src = away_from_zero(&[7], &mut r);
        check("scatter_add", vec![src], &move |v| v[0].scatter_add(idx.clone(), &[m, k]), s);
        let rows: Vec<usize> = (0..4).map(|_| r.random_range(0..m)).collect();
        let r2 = rows.clone();
        check("gather_rows", vec![a.clone()], &move |v| v[0].gather_rows(&r2), s);
        let src = away_from_zero(&[4, k], &mut r);
        check("scatter_rows", vec![src], &move |v| v[0].scatter_rows(&rows, m), s);

        // Tr ∂(tanh(W z))/∂z as a function of W and z.
        let d = r.random_range(1..5);
        let w = away_from_zero(&[d, d], &mut r);
        let z = away_from_zero(&[d, 1], &mut r);
        let trace: OpFn = &|v| {
            let f = v[0].matmul(v[1])?.activation(Activation::Tanh)?;
            jacobian_trace(f, v[1], TraceMode::Exact, &mut rng(0))
        };
        check("trace", vec![w, z], trace, s);
    }
    (worst.max, worst.failure)
}

pub fn small_config() -> EdpgnnConfig {
    EdpgnnConfig {
        node_dim: 6,
        node_hidden: 8,
        edge_hidden: 8,
        readout_hidden: 8,
        ..EdpgnnConfig::default()
    }
}

/// Perturbs parameters away from their zero or one initial values so every
/// branch of the networks carries a nonzero gradient.
pub fn jitter(p: &ParamSet, rng: &mut impl Rng) -> ParamSet {
    let mut out = p.clone();
    out.add_scaled(&random_direction(p, rng), 0.5);
    out
}

fn energy_value(net: &EnergyNet, theta: &ParamSet, x: &[f64], n: usize) -> f64 {
    let tape = Tape::new();
    let p = theta.bind(&tape);
    let x = tape.constant(Tensor::vector(x.to_vec()));
    net.energy(&p, x, n).unwrap().item()
}

fn critic_projection(net: &CriticNet, psi: &ParamSet, x: &[f64], n: usize, level: usize, w: &Tensor) -> f64 {
    let tape = Tape::new();
    let p = psi.bind(&tape);
    let x = tape.constant(Tensor::vector(x.to_vec()));
    net.field(&p, x, n, level).unwrap().value().dot(w)
}

/// Input gradients over every coordinate and parameter gradients along three
/// random directions, for a scalar function of `(params, x)`.
#[allow(clippy::too_many_arguments)]
fn network_errors(
    worst: &mut Worst,
    label: &str,
    value: &dyn Fn(&ParamSet, &[f64]) -> f64,
    gx: &Tensor,
    gp: &ParamSet,
    params: &ParamSet,
    x: &[f64],
    r: &mut impl Rng,
) {
    for j in 0..x.len() {
        let mut plus = x.to_vec();
        plus[j] += FD_STEP;
        let mut minus = x.to_vec();
        minus[j] -= FD_STEP;
        let fd = (value(params, &plus) - value(params, &minus)) / (2.0 * FD_STEP);
        let a = gx.data()[j];
        // A coordinate with a vanishing derivative is compared absolutely.
        let err = if (a - fd).abs() < 1e-9 { 0.0 } else { relative_error(a, fd) };
        worst.record(err, NET_TOL, || format!("{label} x[{j}]"));
    }
    for _ in 0..3 {
        let dir = random_direction(params, r);
        let fd = directional_fd(&|t| value(t, x), params, &dir);
        worst.record(relative_error(gp.dot(&dir), fd), NET_TOL, || format!("{label} parameter direction"));
    }
}

/// Energy and critic networks against central differences.
pub fn network_gradients() -> (f64, Option<String>) {
    let mut worst = Worst::new();
    let energy = EnergyNet::new(&small_config()).unwrap();
    let critic = CriticNet::new(&small_config(), 4).unwrap();
    for s in 0..INSTANCES {
        let mut r = rng(300 + s);
        let n = r.random_range(3..8);
        let theta = jitter(&energy.init_params(s), &mut r);
        let x = UpperTriCoords::from_matrix(&random_symmetric(n, &mut r)).unwrap();
        let tape = Tape::new();
        let p = theta.bind(&tape);
        let xv = tape.var(x.to_tensor());
        let e = energy.energy(&p, xv, n).unwrap();
        let gx = (*tape.gradient(e, &[xv]).unwrap()[0].value()).clone();
        let gtheta = p.gradient(e).unwrap();
        let value = |t: &ParamSet, x: &[f64]| energy_value(&energy, t, x, n);
        let label = format!("energy (instance {s})");
        network_errors(&mut worst, &label, &value, &gx, &gtheta, &theta, x.values(), &mut r);
    }
    for s in 0..INSTANCES {
        let mut r = rng(400 + s);
        let n = r.random_range(3..8);
        let level = r.random_range(0..4);
        let psi = jitter(&critic.init_params(s), &mut r);
        let x = UpperTriCoords::from_matrix(&random_symmetric(n, &mut r)).unwrap();
        let w = uniform(&[x.len()], -1.0, 1.0, &mut r);
        let tape = Tape::new();
        let p = psi.bind(&tape);
        let xv = tape.var(x.to_tensor());
        let field = critic.field(&p, xv, n, level).unwrap();
        let out = field.mul_const(w.clone()).unwrap().sum().unwrap();
        let gx = (*tape.gradient(out, &[xv]).unwrap()[0].value()).clone();
        let gpsi = p.gradient(out).unwrap();
        let value = |t: &ParamSet, x: &[f64]| critic_projection(&critic, t, x, n, level, &w);
        let label = format!("critic (instance {s})");
        network_errors(&mut worst, &label, &value, &gx, &gpsi, &psi, x.values(), &mut r);
    }
    (worst.max, worst.failure)
}

/// Criterion 1: ops and both networks against central differences.
pub fn gradient_oracles() -> Verdict {
    let start = Instant::now();
    let (ops, op_fail) = op_gradients();
    let (nets, net_fail) = network_gradients();
    if let Some(f) = op_fail.or(net_fail) {
        return Err(f);
    }
    let summary = format!(
        "max relative error {ops:.1e} over ops (< {OP_TOL:e}), {nets:.1e} over networks (< {NET_TOL:e}), {INSTANCES} instances each"
    );
    within(Duration::from_secs(60), start, summary)
}

/// `⟨∂_z E_θ(z), v⟩` and its gradient in θ.
pub fn inner_product(net: &EnergyNet, theta: &ParamSet, z: &Tensor, v: &Tensor, n: usize) -> (f64, ParamSet) {
    let tape = Tape::new();
    let p = theta.bind(&tape);
    let zv = tape.var(z.clone());
    let e = net.energy(&p, zv, n).unwrap();
    let gz = tape.gradient(e, &[zv]).unwrap()[0];
    let inner = gz.mul_const(v.clone()).unwrap().sum().unwrap();
    (inner.item(), p.gradient(inner).unwrap())
}

/// Criterion 2: the θ-gradient of an input gradient.
pub fn nested_derivative() -> Verdict {
    let start = Instant::now();
    let net = EnergyNet::new(&small_config()).unwrap();
    let mut worst = Worst::new();
    for s in 0..10 {
        let mut r = rng(500 + s);
        let n = r.random_range(3..8);
        let theta = jitter(&net.init_params(s), &mut r);
        let z = UpperTriCoords::from_matrix(&random_symmetric(n, &mut r)).unwrap().to_tensor();
        let v = uniform(z.shape(), -1.0, 1.0, &mut r);
        let (_, grad) = inner_product(&net, &theta, &z, &v, n);
        let dir = random_direction(&theta, &mut r);
        let fd = directional_fd(&|t| inner_product(&net, t, &z, &v, n).0, &theta, &dir);
        worst.record(relative_error(grad.dot(&dir), fd), NESTED_TOL, || format!("instance {s}"));
    }
    if let Some(f) = worst.failure {
        return Err(f);
    }
    let summary = format!("max relative error {:.1e} (< {NESTED_TOL:e}) over 10 instances", worst.max);
    within(Duration::from_secs(60), start, summary)
}

pub const STEIN_DIM: usize = 10;
pub const STEIN_SAMPLES: usize = 100_000;

/// Stein terms of a fixed affine field `A z + b` at standard normal draws,
/// with the score evaluated at `z − shift`.
/// Also returns `Σ b`, so that `E[term] = shift · Σ b`.
pub fn stein_terms(shift: f64) -> (Vec<f64>, f64) {
    let mut r = rng(17);
    let a = uniform(&[STEIN_DIM, STEIN_DIM], -1.0, 1.0, &mut r);
    let b = uniform(&[STEIN_DIM, 1], -1.0, 1.0, &mut r);
    let terms = (0..STEIN_SAMPLES)
        .map(|_| {
            let z: Vec<f64> = (0..STEIN_DIM).map(|_| StandardNormal.sample(&mut r)).collect();
            let tape = Tape::new();
            let zv = tape.var(Tensor::new(vec![STEIN_DIM, 1], z.clone()).unwrap());
            let score = tape.constant(
                Tensor::new(vec![STEIN_DIM, 1], z.iter().map(|x| -(x - shift)).collect()).unwrap(),
            );
            let field = tape
                .constant(a.clone())
                .matmul(zv)
                .unwrap()
                .add(tape.constant(b.clone()))
                .unwrap();
            stein_term(zv, score, field, TraceMode::Exact, &mut rng(0))
                .unwrap()
                .item()
        })
        .collect();
    (terms, b.sum())
}

/// Criterion 3: the Stein identity for a standard Gaussian.
pub fn stein_identity() -> Verdict {
    let start = Instant::now();
    let (mean, se) = mean_and_se(&stein_terms(0.0).0);
    if mean.abs() > 4.0 * se {
        return Err(format!("|mean| {:.2e} > 4 SE = {:.2e}", mean.abs(), 4.0 * se));
    }
    let summary = format!(
        "|mean| {:.2e} ≤ 4 SE = {:.2e} (d = {STEIN_DIM}, n = {STEIN_SAMPLES})",
        mean.abs(),
        4.0 * se
    );
    within(Duration::from_secs(60), start, summary)
}

/// Criterion 4: invariance and equivariance under node relabeling.
pub fn permutation_suite() -> Verdict {
    let config = EdpgnnConfig::default();
    let energy = EnergyNet::new(&config).unwrap();
    let critic = CriticNet::new(&config, 4).unwrap();
    let theta = energy.init_params(1);
    let psi = critic.init_params(2);
    let mut r = rng(3);
    let mut worst = Worst::new();
    let mut checked = 0;
    for n in [1, 2, 5, 9, 14] {
        let m = random_symmetric(n, &mut r);
        let x = UpperTriCoords::from_matrix(&m).unwrap();
        let e = energy.energy_of(&theta, &m).unwrap();
        let score = energy_score(&energy, &theta, &x).unwrap().to_matrix();
        let field = critic.field_of(&psi, &m, 2).unwrap();
        for _ in 0..20 {
            let perm = random_permutation(n, &mut r);
            let pm = permute_matrix(&m, &perm);
            let px = UpperTriCoords::from_matrix(&pm).unwrap();
            let de = (energy.energy_of(&theta, &pm).unwrap() - e).abs();
            worst.record(de, PERM_TOL, || format!("energy at N = {n}"));
            let ps = energy_score(&energy, &theta, &px).unwrap().to_matrix();
            worst.record(ps.max_abs_diff(&permute_matrix(&score, &perm)), PERM_TOL, || {
                format!("score at N = {n}")
            });
            let pf = critic.field_of(&psi, &pm, 2).unwrap();
            worst.record(pf.max_abs_diff(&permute_matrix(&field, &perm)), PERM_TOL, || {
                format!("critic at N = {n}")
            });
            checked += 1;
        }
    }

    let n = 7;
    let refs: Vec<UpperTriCoords> = (0..5)
        .map(|_| UpperTriCoords::from_matrix(&random_symmetric(n, &mut r)).unwrap())
        .collect();
    let m = random_symmetric(n, &mut r);
    let s = kde_score(&UpperTriCoords::from_matrix(&m).unwrap(), &refs, 0.5)
        .unwrap()
        .to_matrix();
    for _ in 0..20 {
        let perm = random_permutation(n, &mut r);
        let prefs: Vec<UpperTriCoords> = refs
            .iter()
            .map(|x| UpperTriCoords::from_matrix(&permute_matrix(&x.to_matrix(), &perm)).unwrap())
            .collect();
        let px = UpperTriCoords::from_matrix(&permute_matrix(&m, &perm)).unwrap();
        let ps = kde_score(&px, &prefs, 0.5).unwrap().to_matrix();
        worst.record(ps.max_abs_diff(&permute_matrix(&s, &perm)), PERM_TOL, || "KDE score".into());
    }

    for n in [1, 4, 8, 13] {
        let g = random_graph(n, 0.4, &mut r);
        for _ in 0..20 {
            let h = g.permuted(&random_permutation(n, &mut r));
            if degree_stat(&g, 20) != degree_stat(&h, 20)
                || clustering_stat(&g) != clustering_stat(&h)
                || orbit_stat(&g) != orbit_stat(&h)
            {
                return Err(format!("a statistic changed under relabeling at N = {n}"));
            }
        }
    }
    if let Some(f) = worst.failure {
        return Err(f);
    }
    Ok(format!(
        "max deviation {:.1e} (< {PERM_TOL:e}) over {checked} relabeled graphs; statistics exactly invariant",
        worst.max
    ))
}

/// Criterion 5: orbit counts against template enumeration.
pub fn orbit_suite() -> Verdict {
    let start = Instant::now();
    let mut r = rng(8);
    for i in 0..50 {
        let n = 1 + i % 12;
        let p = [0.2, 0.4, 0.6, 0.8][i % 4];
        let g = random_graph(n, p, &mut r);
        if orbit_counts(&g) != orbit_oracle(&g) {
            return Err(format!("graph {i} ({n} nodes): {:?}", g.edges()));
        }
    }
    within(Duration::from_secs(30), start, "50 random graphs with N ≤ 12 match exactly".into())
}

/// Criterion 6: closed forms and symmetry of the MMD.
pub fn mmd_sanity() -> Verdict {
    let mut r = rng(6);
    let x: Vec<_> = (0..8).map(|_| random_graph(r.random_range(4..12), 0.4, &mut r)).collect();
    let y: Vec<_> = (0..6).map(|_| random_graph(r.random_range(4..12), 0.3, &mut r)).collect();
    let config = EvalConfig::default();
    let mut self_max: f64 = 0.0;
    let mut asym_max: f64 = 0.0;
    for (kind, kernel) in [
        (StatKind::Degree, &config.degree),
        (StatKind::Clustering, &config.clustering),
        (StatKind::Orbit, &config.orbit),
    ] {
        let fx = features(&x, kind);
        let fy = features(&y, kind);
        self_max = self_max.max(mmd(&fx, &fx, kernel, false).unwrap());
        let ab = mmd(&fx, &fy, kernel, false).unwrap();
        let ba = mmd(&fy, &fx, kernel, false).unwrap();
        asym_max = asym_max.max((ab - ba).abs());
    }
    let mut closed_max: f64 = 0.0;
    for _ in 0..20 {
        let a = histogram(5, &mut r);
        let b = histogram(7, &mut r);
        for distance in [Distance::Euclidean, Distance::Wasserstein { bin_width: 1.0 }] {
            let k = KernelConfig { sigma: 0.7, distance };
            let d = match distance {
                Distance::Euclidean => {
                    let pad = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
                    (0..7).map(|i| (pad(&a, i) - pad(&b, i)).powi(2)).sum::<f64>().sqrt()
                }
                Distance::Wasserstein { .. } => wasserstein_oracle(&a, &b),
            };
            let kxy = (-d * d / (2.0 * 0.7 * 0.7)).exp();
            let expect = (2.0 - 2.0 * kxy).sqrt();
            let got = mmd(&[a.clone()], &[b.clone()], &k, false).unwrap();
            closed_max = closed_max.max((got - expect).abs());
        }
    }
    let tol = 1e-12;
    if self_max > tol || asym_max > tol || closed_max > tol {
        return Err(format!(
            "mmd(X,X) {self_max:e}, asymmetry {asym_max:e}, closed form error {closed_max:e} (limit {tol:e})"
        ));
    }
    Ok(format!(
        "mmd(X,X) ≤ {self_max:.1e}, singleton error {closed_max:.1e}, asymmetry {asym_max:.1e} (all ≤ 1e-12)"
    ))
}

fn histogram(bins: usize, r: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..bins).map(|_| r.random_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// W1 between unit-mass histograms on unit-spaced bins as the transport cost
/// of moving mass greedily left to right.
fn wasserstein_oracle(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    let mut supply: Vec<f64> = (0..len).map(|i| a.get(i).copied().unwrap_or(0.0)).collect();
    let demand: Vec<f64> = (0..len).map(|i| b.get(i).copied().unwrap_or(0.0)).collect();
    let mut cost = 0.0;
    for (j, &need) in demand.iter().enumerate() {
        let mut need = need;
        for (i, have) in supply.iter_mut().enumerate() {
            if need <= 0.0 {
                break;
            }
            let moved = have.min(need);
            *have -= moved;
            need -= moved;
            cost += moved * (i as f64 - j as f64).abs();
        }
    }
    cost
}

pub const LANGEVIN_TARGET: [f64; 6] = [0.5, 0.35, 0.65, 0.45, 0.55, 0.6];
pub const LANGEVIN_TAU: f64 = 0.01;
pub const LANGEVIN_CHAINS: u64 = 500;

/// Criterion 7: Langevin dynamics on an exact Gaussian.
pub fn langevin_calibration() -> Verdict {
    let start = Instant::now();
    // N = 4, so six coordinates, each N(target, τ) well inside [0, 1].
    let model = QuadraticEnergy {
        target: LANGEVIN_TARGET.to_vec(),
        tau: LANGEVIN_TAU,
    };
    let config = LangevinConfig::default();
    let samples: Vec<Vec<f64>> = (0..LANGEVIN_CHAINS)
        .map(|k| {
            langevin_sample(&model, &ParamSet::new(), 4, &config, &mut rng(1000 + k))
                .unwrap()
                .into_values()
        })
        .collect();
    let mut worst_z: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    for (j, &mu) in LANGEVIN_TARGET.iter().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let (mean, se) = mean_and_se(&xs);
        let z = (mean - mu).abs() / se;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (LANGEVIN_CHAINS as f64 - 1.0);
        let rel = (var / LANGEVIN_TAU - 1.0).abs();
        if z > 3.0 {
            return Err(format!("coordinate {j}: mean {mean:.4} is {z:.2} SE from {mu}"));
        }
        if rel > 0.15 {
            return Err(format!("coordinate {j}: variance {var:.5} is off by {:.1}%", 100.0 * rel));
        }
        worst_z = worst_z.max(z);
        worst_var = worst_var.max(rel);
    }
    let summary = format!(
        "means within {worst_z:.2} SE (≤ 3), variances within {:.1}% (≤ 15%), {LANGEVIN_CHAINS} chains",
        100.0 * worst_var
    );
    within(Duration::from_secs(120), start, summary)
}
