use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::Var;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// How `Tr(∂f/∂z)` is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceMode {
    /// One reverse pass per coordinate.
    Exact,
    /// Averaged `vᵀ(∂f/∂z)v` over Rademacher probes `v`.
    Hutchinson { probes: usize },
}

impl Default for TraceMode {
    fn default() -> Self {
        TraceMode::Hutchinson { probes: 1 }
    }
}

/// Divergence of the field value `f` (already evaluated at `z`) with respect
/// to `z`. The result stays on the tape and is differentiable with respect to
/// whatever `f` was computed from.
pub fn jacobian_trace<'t>(
    f: Var<'t>,
    z: Var<'t>,
    mode: TraceMode,
    rng: &mut impl Rng,
) -> Result<Var<'t>> {
    check_field(f, z)?;
    match mode {
        TraceMode::Exact => exact_trace(f, z),
        TraceMode::Hutchinson { probes } => {
            if probes == 0 {
                return Err(Error::InvalidArgument(
                    "hutchinson trace needs at least one probe".into(),
                ));
            }
            let estimates = hutchinson_probes(f, z, probes, rng)?;
            let mut acc = estimates[0];
            for e in &estimates[1..] {
                acc = acc.add(*e)?;
            }
            acc.scale(1.0 / probes as f64)
        }
    }
}

fn check_field(f: Var<'_>, z: Var<'_>) -> Result<()> {
    let (fs, zs) = (f.shape(), z.shape());
    if fs != zs {
        return Err(Error::Shape {
            op: "jacobian-trace",
            lhs: fs,
            rhs: zs,
        });
    }
    Ok(())
}

fn exact_trace<'t>(f: Var<'t>, z: Var<'t>) -> Result<Var<'t>> {
    let tape = f.tape();
    let d = z.numel();
    let mut acc = tape.scalar(0.0);
    for j in 0..d {
        let fj = f.gather(vec![j], &[])?;
        let gz = tape.gradient(fj, &[z])?[0];
        acc = acc.add(gz.gather(vec![j], &[])?)?;
    }
    Ok(acc)
}

/// Individual Hutchinson estimates `vᵀ(∂f/∂z)v`, one per Rademacher probe.
pub fn hutchinson_probes<'t>(
    f: Var<'t>,
    z: Var<'t>,
    probes: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Var<'t>>> {
    check_field(f, z)?;
    let tape = f.tape();
    let shape = z.shape();
    let d = z.numel();
    (0..probes)
        .map(|_| {
            let v: Vec<f64> = (0..d)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let v = tape.constant(Tensor::new(shape.clone(), v)?);
            let projected = f.dot(v)?;
            let gz = tape.gradient(projected, &[z])?[0];
            gz.dot(v)
        })
        .collect()
}
