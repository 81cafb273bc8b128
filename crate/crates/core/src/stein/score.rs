use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::graph::UpperTriCoords;
use crate::model::EnergyModel;
use crate::params::ParamSet;

/// `∂E_θ/∂u` at `x` in upper-triangle coordinates.
pub fn energy_score<E: EnergyModel + ?Sized>(
    model: &E,
    params: &ParamSet,
    x: &UpperTriCoords,
) -> Result<UpperTriCoords> {
    let values = energy_score_values(model, params, x.values(), x.node_count())?;
    UpperTriCoords::new(x.node_count(), values)
}

pub(crate) fn energy_score_values<E: EnergyModel + ?Sized>(
    model: &E,
    params: &ParamSet,
    x: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let p = params.bind(&tape);
    let z = tape.var(Tensor::vector(x.to_vec()));
    let e = model.energy(&p, z, n)?;
    let g = tape.gradient_values(e, &[z])?;
    Ok(g[0].data().to_vec())
}

/// Score of the Gaussian kernel density estimate with bandwidth `h` centred on
/// `refs`: `Σ_n w_n (u_n − x) / h²`, `w = softmax(−‖x − u_n‖² / (2h²))`.
pub fn kde_score(x: &UpperTriCoords, refs: &[UpperTriCoords], h: f64) -> Result<UpperTriCoords> {
    if let Some(r) = refs.iter().find(|r| r.node_count() != x.node_count()) {
        return Err(Error::InvalidArgument(format!(
            "reference graph has {} nodes, expected {}",
            r.node_count(),
            x.node_count()
        )));
    }
    let refs: Vec<&[f64]> = refs.iter().map(UpperTriCoords::values).collect();
    let values = kde_score_values(x.values(), &refs, h)?;
    UpperTriCoords::new(x.node_count(), values)
}

pub(crate) fn kde_score_values(x: &[f64], refs: &[&[f64]], h: f64) -> Result<Vec<f64>> {
    if refs.is_empty() {
        return Err(Error::InvalidArgument("kde score needs at least one reference".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("kde bandwidth must be positive, got {h}")));
    }
    let h2 = h * h;
    let logits: Vec<f64> = refs
        .iter()
        .map(|r| {
            let d2: f64 = r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            -d2 / (2.0 * h2)
        })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; x.len()];
    for (w, r) in weights.iter().zip(refs) {
        let w = w / total;
        for ((o, a), b) in out.iter_mut().zip(r.iter()).zip(x) {
            *o += w * (a - b) / h2;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_kde(x: &[f64], refs: &[&[f64]], h: f64) -> f64 {
        let terms: Vec<f64> = refs
            .iter()
            .map(|r| {
                let d2: f64 = r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                -d2 / (2.0 * h * h)
            })
            .collect();
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    #[test]
    fn single_reference_is_linear() {
        let x = [0.2, 0.9, -0.4];
        let r = [1.0, 0.0, 1.0];
        let s = kde_score_values(&x, &[&r], 0.5).unwrap();
        for i in 0..3 {
            assert_eq!(s[i], (r[i] - x[i]) / 0.25);
        }
    }

    #[test]
    fn midpoint_has_no_pull_along_the_separation() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let x = [0.5, 0.5];
        let s = kde_score_values(&x, &[&a, &b], 0.3).unwrap();
        assert!((s[0] - s[1]).abs() < 1e-12);
    }

    #[test]
    fn matches_finite_differences() {
        let refs: Vec<Vec<f64>> = vec![vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let refs: Vec<&[f64]> = refs.iter().map(Vec::as_slice).collect();
        let x = [0.3, 0.6, 0.1];
        let h = 0.4;
        let s = kde_score_values(&x, &refs, h).unwrap();
        let eps = 1e-6;
        for i in 0..3 {
            let mut hi = x;
            let mut lo = x;
            hi[i] += eps;
            lo[i] -= eps;
            let fd = (log_kde(&hi, &refs, h) - log_kde(&lo, &refs, h)) / (2.0 * eps);
            assert!((fd - s[i]).abs() <= 1e-6 * s[i].abs().max(1.0), "{fd} vs {}", s[i]);
        }
    }

    #[test]
    fn far_references_stay_finite() {
        let r = [1e3, -1e3];
        let s = kde_score_values(&[0.0, 0.0], &[&r, &[0.0, 1e3]], 0.1).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_references_are_an_error() {
        assert!(kde_score_values(&[0.0], &[], 1.0).is_err());
    }
}
