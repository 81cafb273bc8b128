//! Edgewise dense prediction graph networks: the energy model and the critic.

mod critic;
mod edpgnn;
mod energy;
pub(crate) mod layers;

pub use critic::CriticNet;
pub use edpgnn::{EdpgnnConfig, EdpgnnFeatures, EpsilonMode};
pub use energy::EnergyNet;

use crate::autodiff::Tensor;
use crate::error::Result;
use crate::graph::UpperTriCoords;

/// Symmetry tolerance for matrix inputs to the networks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

fn matrix_input(adjacency: &Tensor) -> Result<UpperTriCoords> {
    UpperTriCoords::from_symmetric(adjacency, SYMMETRY_TOLERANCE)
}
