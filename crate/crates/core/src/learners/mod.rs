//! Per-client PPO machinery: rollouts, GAE, critic regression, actor update.

mod actor;
mod critic;
mod gae;
mod rollout;
mod sgd;

pub use actor::{train_actor, ActorUpdate};
pub use critic::{critic_loss, train_critic};
pub use gae::compute_gae;
pub(crate) use gae::gae_from_values;
pub use rollout::{collect_rollout, fill_values, make_policy, TrajectoryBatch};
pub use sgd::{Correction, LocalUpdate};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorMode {
    /// Regress `log π_θ` onto `β_t⁻¹ Q̂ + log π_old`.
    MseRegression,
    /// Advantage surrogate with an adaptive KL penalty.
    KlPenalty,
}

/// Local optimizer and estimator settings shared by every client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub lr: f64,
    /// Multiplicative decay per round.
    pub lr_decay: f64,
    pub minibatch: usize,
    pub epochs: usize,
    /// Timesteps collected per round (`B`).
    pub batch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub kl_target: f64,
    /// Starting KL penalty for `kl_penalty` mode.
    pub beta_init: f64,
    pub actor_mode: ActorMode,
    pub fedprox_mu: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            lr_decay: 0.98,
            minibatch: 128,
            epochs: 10,
            batch_size: 2048,
            gamma: 0.99,
            gae_lambda: 0.95,
            kl_target: 0.001,
            beta_init: 1.0,
            actor_mode: ActorMode::KlPenalty,
            fedprox_mu: 0.01,
        }
    }
}

pub const BETA_MIN: f64 = 1e-4;
pub const BETA_MAX: f64 = 1e4;

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::invalid(field, reason.to_string()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be finite and nonnegative");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay", "must be in (0, 1]");
        }
        if self.minibatch == 0 || self.batch_size == 0 {
            return bad("minibatch", "minibatch and batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must be in [0, 1)");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda", "must be in (0, 1]");
        }
        if !(self.kl_target > 0.0) {
            return bad("kl_target", "must be positive");
        }
        if !(BETA_MIN..=BETA_MAX).contains(&self.beta_init) {
            return bad("beta_init", "must be in [1e-4, 1e4]");
        }
        if !(self.fedprox_mu >= 0.0) {
            return bad("fedprox_mu", "must be nonnegative");
        }
        Ok(())
    }

    /// Learning rate used in round `t`.
    pub fn lr_at(&self, t: usize) -> f64 {
        self.lr * self.lr_decay.powi(t as i32)
    }
}
