use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::NoiseLadder;
use super::objective::{critic_eval, generator_eval, Point, SteinSettings};
use crate::autodiff::TraceMode;
use crate::error::{Error, Result};
use crate::model::{CriticModel, EnergyModel};
use crate::params::{Direction, Optimizer, OptimizerKind, ParamSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda_kde: f64,
    pub lambda_l2: f64,
    pub lambda_field: f64,
    pub critic_iters: usize,
    pub iterations: u64,
    pub batch_size: usize,
    pub critic_lr: f64,
    pub generator_lr: f64,
    pub optimizer: OptimizerKind,
    pub trace: TraceMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_kde: 0.1,
            lambda_l2: 1e-3,
            lambda_field: 0.5,
            critic_iters: 5,
            iterations: 2000,
            batch_size: 16,
            critic_lr: 1e-3,
            generator_lr: 1e-4,
            optimizer: OptimizerKind::Adam,
            trace: TraceMode::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda_kde", self.lambda_kde),
            ("lambda_l2", self.lambda_l2),
            ("lambda_field", self.lambda_field),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        let positive = [("critic_lr", self.critic_lr), ("generator_lr", self.generator_lr)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if let TraceMode::Hutchinson { probes: 0 } = self.trace {
            return Err(Error::InvalidArgument("hutchinson trace needs at least one probe".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> SteinSettings {
        SteinSettings {
            trace: self.trace,
            lambda_kde: self.lambda_kde,
            lambda_l2: self.lambda_l2,
            lambda_field: self.lambda_field,
        }
    }
}

/// Everything needed to continue training bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    /// Completed outer iterations.
    pub iteration: u64,
    pub theta: ParamSet,
    pub psi: ParamSet,
    pub generator_opt: Optimizer,
    pub critic_opt: Optimizer,
}

impl TrainState {
    pub fn new(theta: ParamSet, psi: ParamSet, config: &TrainConfig) -> Self {
        TrainState {
            iteration: 0,
            generator_opt: Optimizer::new(config.optimizer, config.generator_lr, &theta),
            critic_opt: Optimizer::new(config.optimizer, config.critic_lr, &psi),
            theta,
            psi,
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iteration: u64,
    /// Generator-batch Stein discrepancy per noise level.
    pub discrepancy: Vec<f64>,
    /// Critic objective of the last critic step (absent when `critic_iters = 0`).
    pub critic_objective: Option<f64>,
    /// KDE-score discrepancy per level from the last critic step.
    pub kde_discrepancy: Option<Vec<f64>>,
    pub theta_norm: f64,
    pub psi_norm: f64,
}

/// The adversarial training loop.
pub struct Trainer<'a, E: ?Sized, C: ?Sized> {
    pub energy: &'a E,
    pub critic: &'a C,
    pub data: &'a [Point],
    pub ladder: &'a NoiseLadder,
    pub config: &'a TrainConfig,
}

impl<E, C> Trainer<'_, E, C>
where
    E: EnergyModel + ?Sized,
    C: CriticModel + ?Sized,
{
    /// Runs outer iteration `state.iteration + 1`. On error `state` is left
    /// untouched.
    ///
    /// All randomness of an iteration comes from stream `iteration` of the
    /// master seed, so a resumed run continues exactly where it stopped.
    pub fn iterate(&self, state: &mut TrainState) -> Result<LogRecord> {
        if self.data.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        let iteration = state.iteration + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(iteration);
        let settings = self.config.settings();

        let generator_batch = self.draw_batch(&mut rng);
        let generator_seed: u64 = rng.random();
        let mut psi = state.psi.clone();
        let mut critic_opt = state.critic_opt.clone();
        let mut last = None;
        for _ in 0..self.config.critic_iters {
            let batch = self.draw_batch(&mut rng);
            let seed: u64 = rng.random();
            let eval = critic_eval(
                self.energy,
                self.critic,
                &state.theta,
                &psi,
                &batch,
                self.ladder,
                &settings,
                seed,
            )
            .map_err(|e| diverged(iteration, e))?;
            critic_opt.update(&mut psi, &eval.grad, Direction::Ascent);
            check_finite(&psi, iteration, "critic-update")?;
            last = Some(eval);
        }

        let eval = generator_eval(
            self.energy,
            self.critic,
            &state.theta,
            &psi,
            &generator_batch,
            self.ladder,
            &settings,
            generator_seed,
        )
        .map_err(|e| diverged(iteration, e))?;
        let mut theta = state.theta.clone();
        let mut generator_opt = state.generator_opt.clone();
        generator_opt.update(&mut theta, &eval.grad, Direction::Descent);
        check_finite(&theta, iteration, "generator-update")?;

        let record = LogRecord {
            iteration,
            discrepancy: eval.stein,
            critic_objective: last.as_ref().map(|e| e.objective),
            kde_discrepancy: last.filter(|_| settings.lambda_kde > 0.0).map(|e| e.kde),
            theta_norm: theta.norm(),
            psi_norm: psi.norm(),
        };
        *state = TrainState {
            iteration,
            theta,
            psi,
            generator_opt,
            critic_opt,
        };
        Ok(record)
    }

    /// Iterates until `state.iteration == config.iterations`, calling
    /// `on_record` after each iteration.
    pub fn run(
        &self,
        state: &mut TrainState,
        mut on_record: impl FnMut(&TrainState, &LogRecord) -> Result<()>,
    ) -> Result<()> {
        while state.iteration < self.config.iterations {
            let record = self.iterate(state)?;
            on_record(state, &record)?;
        }
        Ok(())
    }

    fn draw_batch(&self, rng: &mut ChaCha8Rng) -> Vec<&Point> {
        let k = self.config.batch_size.min(self.data.len());
        sample(rng, self.data.len(), k)
            .into_iter()
            .map(|i| &self.data[i])
            .collect()
    }
}

/// Trains from the given initial parameters and returns the final θ with
/// the log.
pub fn train<E, C>(
    energy: &E,
    critic: &C,
    data: &[Point],
    ladder: &NoiseLadder,
    config: &TrainConfig,
    theta: ParamSet,
    psi: ParamSet,
) -> Result<(ParamSet, Vec<LogRecord>)>
where
    E: EnergyModel + ?Sized,
    C: CriticModel + ?Sized,
{
    config.validate()?;
    let trainer = Trainer {
        energy,
        critic,
        data,
        ladder,
        config,
    };
    let mut state = TrainState::new(theta, psi, config);
    let mut log = Vec::new();
    trainer.run(&mut state, |_, r| {
        log.push(r.clone());
        Ok(())
    })?;
    Ok((state.theta, log))
}

fn diverged(iteration: u64, e: Error) -> Error {
    match e {
        Error::NonFinite { .. } => Error::Diverged {
            iteration,
            source: Box::new(e),
        },
        other => other,
    }
}

fn check_finite(p: &ParamSet, iteration: u64, op: &'static str) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            iteration,
            source: Box::new(Error::NonFinite { op }),
        })
    }
}
