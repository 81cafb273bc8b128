use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::noise::{add_noise, NoiseLadder, NoisyAdjacency};
use super::score::{energy_score_values, kde_score_values};
use crate::autodiff::{jacobian_trace, Tape, Tensor, TraceMode, Var};
use crate::error::{Error, Result};
use crate::graph::{GraphSample, UpperTriCoords};
use crate::model::{CriticModel, EnergyModel};
use crate::params::ParamSet;

/// One clean training example: `n` nodes and its coordinates.
///
/// For graphs the coordinates are the strict upper triangle. Non-graph models
/// (the harness) use arbitrary vectors; `n` then only groups the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub n: usize,
    pub values: Vec<f64>,
}

impl From<&GraphSample> for Point {
    fn from(g: &GraphSample) -> Self {
        Point {
            n: g.node_count(),
            values: g.upper().into_values(),
        }
    }
}

/// `scoreᵀ f(z) + Tr(∂f/∂z)`, differentiable through both `score` and `f`.
pub fn stein_term<'t>(
    z: Var<'t>,
    score: Var<'t>,
    field: Var<'t>,
    mode: TraceMode,
    rng: &mut impl rand::Rng,
) -> Result<Var<'t>> {
    if score.shape() != z.shape() || field.shape() != z.shape() {
        return Err(Error::Shape {
            op: "stein-term",
            lhs: score.shape(),
            rhs: field.shape(),
        });
    }
    let trace = jacobian_trace(field, z, mode, rng)?;
    score.dot(field)?.add(trace)
}

/// Where the score in a Stein term comes from.
pub enum ScoreSource<'a, E: ?Sized> {
    Energy { model: &'a E, params: &'a ParamSet },
    /// Gaussian KDE over `refs` with bandwidth `bandwidth`.
    Kde { refs: &'a [UpperTriCoords], bandwidth: f64 },
}

/// Mean Stein term over `batch` with the critic at the batch's noise level.
/// Returns the value and its gradient with respect to `psi`.
pub fn discrepancy<E, C>(
    batch: &[NoisyAdjacency],
    source: ScoreSource<'_, E>,
    critic: &C,
    psi: &ParamSet,
    mode: TraceMode,
    seed: u64,
) -> Result<(f64, ParamSet)>
where
    E: EnergyModel + ?Sized,
    C: CriticModel + ?Sized,
{
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidArgument("discrepancy of an empty batch".into()))?;
    if batch.iter().any(|z| z.level != first.level) {
        return Err(Error::InvalidArgument("batch mixes noise levels".into()));
    }
    let refs: Vec<&[f64]> = match &source {
        ScoreSource::Kde { refs, .. } => refs.iter().map(UpperTriCoords::values).collect(),
        ScoreSource::Energy { .. } => Vec::new(),
    };
    let results = batch
        .par_iter()
        .enumerate()
        .map(|(k, z)| {
            let x = z.coords.values();
            let n = z.coords.node_count();
            let score = match &source {
                ScoreSource::Energy { model, params } => energy_score_values(*model, params, x, n)?,
                ScoreSource::Kde { bandwidth, .. } => kde_score_values(x, &refs, *bandwidth)?,
            };
            let mut rng = task_rng(seed, k as u64);
            let mut out = critic_terms(critic, psi, x, n, z.level, &[&score], mode, &mut rng)?;
            Ok(out.remove(0))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = psi.zeros_like();
    let mut value = 0.0;
    for (v, g) in &results {
        value += v * scale;
        grad.add_scaled(g, scale);
    }
    Ok((value, grad))
}

/// Knobs of the adversarial objective shared by both players.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteinSettings {
    pub trace: TraceMode,
    pub lambda_kde: f64,
    pub lambda_l2: f64,
    /// Weight of the critic field penalty `E‖f‖²`.
    pub lambda_field: f64,
}

/// Critic objective `Σ_i (S_E,i − λ_K |S_K,i| − λ_F E‖f_i‖²) − λ_L2 ‖ψ‖²`
/// on one batch.
#[derive(Clone, Debug)]
pub struct CriticEval {
    pub objective: f64,
    /// `S(q_i, E_θ, C_ψ,σ_i)` per level, summed over node-count buckets.
    pub stein: Vec<f64>,
    /// `S(q_i, p^KDE_σ_i, C_ψ,σ_i)` per level (signed), summed over buckets.
    pub kde: Vec<f64>,
    /// Gradient of `objective` with respect to ψ.
    pub grad: ParamSet,
}

/// Generator objective `Σ_i S(q_i, E_θ, C_ψ,σ_i)` on one batch.
#[derive(Clone, Debug)]
pub struct GeneratorEval {
    pub objective: f64,
    pub stein: Vec<f64>,
    /// Gradient of `objective` with respect to θ.
    pub grad: ParamSet,
}

/// Evaluates the critic objective. Every batch graph is perturbed once per
/// noise level; the expectation is a mean within each node-count bucket,
/// summed over buckets. KDE references are the batch's clean graphs with the
/// same node count.
#[allow(clippy::too_many_arguments)]
pub fn critic_eval<E, C>(
    energy: &E,
    critic: &C,
    theta: &ParamSet,
    psi: &ParamSet,
    batch: &[&Point],
    ladder: &NoiseLadder,
    settings: &SteinSettings,
    seed: u64,
) -> Result<CriticEval>
where
    E: EnergyModel + ?Sized,
    C: CriticModel + ?Sized,
{
    check_levels(critic, ladder)?;
    let buckets = bucket(batch)?;
    let levels = ladder.len();
    let use_kde = settings.lambda_kde > 0.0;
    let use_field = settings.lambda_field > 0.0;
    let tasks: Vec<(usize, usize)> = (0..batch.len())
        .flat_map(|g| (0..levels).map(move |i| (g, i)))
        .collect();

    let outputs = tasks
        .par_iter()
        .enumerate()
        .map(|(k, &(g, level))| {
            let point = batch[g];
            let mut rng = task_rng(seed, k as u64);
            let x = add_noise(&point.values, ladder.sigma(level), &mut rng)?;
            let s_e = energy_score_values(energy, theta, &x, point.n)?;
            let mut scores = vec![s_e];
            if use_kde {
                let refs: Vec<&[f64]> = buckets[&point.n]
                    .iter()
                    .map(|&r| batch[r].values.as_slice())
                    .collect();
                scores.push(kde_score_values(&x, &refs, ladder.sigma(level))?);
            }
            let scores: Vec<&[f64]> = scores.iter().map(Vec::as_slice).collect();
            let mut out = critic_terms(critic, psi, &x, point.n, level, &scores, settings.trace, &mut rng)?;
            if use_field {
                out.push(field_penalty(critic, psi, &x, point.n, level)?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut stein = vec![0.0; levels];
    let mut kde = vec![0.0; levels];
    let mut grad = psi.scaled(-2.0 * settings.lambda_l2);
    let mut objective = -settings.lambda_l2 * psi.squared_norm();
    let index = |g: usize, i: usize| g * levels + i;
    for i in 0..levels {
        for members in buckets.values() {
            let w = 1.0 / members.len() as f64;
            let mean_e: f64 = members.iter().map(|&g| outputs[index(g, i)][0].0 * w).sum();
            stein[i] += mean_e;
            objective += mean_e;
            for &g in members {
                grad.add_scaled(&outputs[index(g, i)][0].1, w);
            }
            if use_kde {
                let mean_k: f64 = members.iter().map(|&g| outputs[index(g, i)][1].0 * w).sum();
                kde[i] += mean_k;
                objective -= settings.lambda_kde * mean_k.abs();
                let sign = sign(mean_k);
                if sign != 0.0 {
                    for &g in members {
                        grad.add_scaled(&outputs[index(g, i)][1].1, -settings.lambda_kde * sign * w);
                    }
                }
            }
            if use_field {
                for &g in members {
                    let (pen, pen_grad) = outputs[index(g, i)].last().expect("penalty term");
                    objective -= settings.lambda_field * w * pen;
                    grad.add_scaled(pen_grad, -settings.lambda_field * w);
                }
            }
        }
    }
    Ok(CriticEval {
        objective,
        stein,
        kde,
        grad,
    })
}

/// Evaluates the generator objective and its θ-gradient. The trace term is
/// computed for the reported value; it does not depend on θ.
#[allow(clippy::too_many_arguments)]
pub fn generator_eval<E, C>(
    energy: &E,
    critic: &C,
    theta: &ParamSet,
    psi: &ParamSet,
    batch: &[&Point],
    ladder: &NoiseLadder,
    settings: &SteinSettings,
    seed: u64,
) -> Result<GeneratorEval>
where
    E: EnergyModel + ?Sized,
    C: CriticModel + ?Sized,
{
    check_levels(critic, ladder)?;
    let buckets = bucket(batch)?;
    let levels = ladder.len();
    let tasks: Vec<(usize, usize)> = (0..batch.len())
        .flat_map(|g| (0..levels).map(move |i| (g, i)))
        .collect();

    let outputs = tasks
        .par_iter()
        .enumerate()
        .map(|(k, &(g, level))| {
            let point = batch[g];
            let mut rng = task_rng(seed, k as u64);
            let x = add_noise(&point.values, ladder.sigma(level), &mut rng)?;
            let (field, trace) = {
                let tape = Tape::new();
                let p = psi.bind(&tape);
                let z = tape.var(Tensor::vector(x.clone()));
                let f = critic.field(&p, z, point.n, level)?;
                let tr = jacobian_trace(f, z, settings.trace, &mut rng)?;
                ((*f.value()).clone(), tr.item())
            };
            let tape = Tape::new();
            let t = theta.bind(&tape);
            let z = tape.var(Tensor::vector(x));
            let e = energy.energy(&t, z, point.n)?;
            let score = tape.gradient(e, &[z])?[0];
            let inner = score.dot(tape.constant(field))?;
            let grad = t.gradient(inner)?;
            Ok((inner.item() + trace, grad))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut stein = vec![0.0; levels];
    let mut grad = theta.zeros_like();
    for i in 0..levels {
        for members in buckets.values() {
            let w = 1.0 / members.len() as f64;
            for &g in members {
                let (v, gr) = &outputs[g * levels + i];
                stein[i] += v * w;
                grad.add_scaled(gr, w);
            }
        }
    }
    Ok(GeneratorEval {
        objective: stein.iter().sum(),
        stein,
        grad,
    })
}

/// Per-task generator: stream `task` of a ChaCha8 generator seeded by `seed`.
pub(crate) fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_levels<C: CriticModel + ?Sized>(critic: &C, ladder: &NoiseLadder) -> Result<()> {
    if critic.levels() != ladder.len() {
        return Err(Error::InvalidArgument(format!(
            "critic has {} noise levels but the ladder has {}",
            critic.levels(),
            ladder.len()
        )));
    }
    Ok(())
}

fn bucket(batch: &[&Point]) -> Result<BTreeMap<usize, Vec<usize>>> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (g, p) in batch.iter().enumerate() {
        buckets.entry(p.n).or_default().push(g);
    }
    Ok(buckets)
}

/// `‖f‖²` of the critic field at `x` and its ψ-gradient.
fn field_penalty<C: CriticModel + ?Sized>(
    critic: &C,
    psi: &ParamSet,
    x: &[f64],
    n: usize,
    level: usize,
) -> Result<(f64, ParamSet)> {
    let tape = Tape::new();
    let p = psi.bind(&tape);
    let z = tape.constant(Tensor::vector(x.to_vec()));
    let pen = critic.field(&p, z, n, level)?.square()?.sum()?;
    Ok((pen.item(), p.gradient(pen)?))
}

/// Values and ψ-gradients of `sᵀf + Tr ∂f` for several score vectors `s`
/// at the same point, sharing one critic evaluation and one trace estimate.
#[allow(clippy::too_many_arguments)]
fn critic_terms<C: CriticModel + ?Sized>(
    critic: &C,
    psi: &ParamSet,
    x: &[f64],
    n: usize,
    level: usize,
    scores: &[&[f64]],
    mode: TraceMode,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, ParamSet)>> {
    let tape = Tape::new();
    let p = psi.bind(&tape);
    let z = tape.var(Tensor::vector(x.to_vec()));
    let f = critic.field(&p, z, n, level)?;
    let first = tape.constant(Tensor::vector(scores[0].to_vec()));
    let term = stein_term(z, first, f, mode, rng)?;
    let value = term.item();
    let grad = p.gradient(term)?;
    let mut out = Vec::with_capacity(scores.len());
    for s in &scores[1..] {
        // Only the sᵀf part differs, so the extra gradient avoids the trace.
        let delta: Vec<f64> = s.iter().zip(scores[0]).map(|(a, b)| a - b).collect();
        let d = tape.constant(Tensor::vector(delta)).dot(f)?;
        let mut g = p.gradient(d)?;
        g.add_scaled(&grad, 1.0);
        out.push((value + d.item(), g));
    }
    out.insert(0, (value, grad));
    Ok(out)
}
