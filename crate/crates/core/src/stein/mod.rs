//! Adversarial Stein training of the energy model against a noise-conditioned
//! critic.
//!
//! Coordinates are the strict upper triangle throughout: noise, scores,
//! critic fields and the Jacobian trace all live in `R^{N(N−1)/2}`.

pub mod harness;
mod noise;
mod objective;
mod score;
mod train;

pub use noise::{perturb, NoiseLadder, NoisyAdjacency};
pub use objective::{
    critic_eval, discrepancy, generator_eval, stein_term, CriticEval, GeneratorEval, Point,
    ScoreSource, SteinSettings,
};
pub use score::{energy_score, kde_score};
pub(crate) use score::energy_score_values as score_values;
pub use train::{train, LogRecord, TrainConfig, TrainState, Trainer};
