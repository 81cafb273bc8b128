//! Interfaces shared by the training loop and the sampler.
//!
//! Inputs are points in upper-triangle coordinates: a `[P]` variable with
//! `P = N(N−1)/2` together with the node count `N`. Models that are not graph
//! models (the Gaussian harness, test doubles) simply ignore `N`.

use crate::autodiff::Var;
use crate::error::Result;
use crate::params::{Bound, ParamSet};

/// Unnormalized log-density `E(x)`; the density is `∝ exp(+E(x))`.
pub trait EnergyModel: Sync {
    fn energy<'t>(&self, params: &Bound<'t>, x: Var<'t>, n: usize) -> Result<Var<'t>>;
}

/// Noise-conditioned vector field `C_{ψ,σ_i}(x)` with the shape of `x`.
pub trait CriticModel: Sync {
    /// Number of noise levels the critic is conditioned on.
    fn levels(&self) -> usize;

    fn field<'t>(&self, params: &Bound<'t>, x: Var<'t>, n: usize, level: usize)
        -> Result<Var<'t>>;

    /// Parameters that define the final readout. Zeroing them makes the
    /// field identically zero.
    fn readout_names(&self) -> Vec<String>;

    /// Copy of `params` with the readout zeroed.
    fn zero_readout(&self, params: &ParamSet) -> Result<ParamSet> {
        let mut out = params.clone();
        for name in self.readout_names() {
            let t = out.get_mut(&name)?;
            t.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(out)
    }
}
