//! Softmax and Gaussian policies over network energies.

mod divergence;
mod gaussian;
mod schedule;
mod softmax;

pub use divergence::{
    gaussian_taylor_sides, kl_divergence, l1_distance, logsumexp, stepwise_logratio_supnorm,
    ActionDist,
};
pub use gaussian::{gaussian_log_density, GaussianPolicy};
pub use schedule::ScheduleSet;
pub use softmax::{softmax_log_probs, SoftmaxPolicy};

use crate::error::Result;
use crate::numerics::Network;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(f64),
}

impl Action {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Action::Discrete(a) => a as f64,
            Action::Continuous(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Softmax(SoftmaxPolicy),
    Gaussian(GaussianPolicy),
}

impl Policy {
    pub fn net(&self) -> &Network {
        match self {
            Policy::Softmax(p) => &p.net,
            Policy::Gaussian(p) => &p.net,
        }
    }

    /// Same policy family and hyperparameters over different weights.
    pub fn with_net(&self, net: Network) -> Policy {
        match self {
            Policy::Softmax(p) => Policy::Softmax(SoftmaxPolicy { net, ..p.clone() }),
            Policy::Gaussian(p) => Policy::Gaussian(GaussianPolicy { net, ..*p }),
        }
    }

    pub fn dist(&self, state: &[f64]) -> Result<ActionDist> {
        match self {
            Policy::Softmax(p) => Ok(ActionDist::Categorical(p.probs(state)?)),
            Policy::Gaussian(p) => Ok(ActionDist::Normal {
                mean: p.mean(state)?,
                std: p.stddev,
            }),
        }
    }

    pub fn log_prob(&self, state: &[f64], action: Action) -> Result<f64> {
        match (self, action) {
            (Policy::Softmax(p), Action::Discrete(a)) => {
                let lp = p.log_probs(state)?;
                lp.get(a).copied().ok_or_else(|| {
                    crate::Error::invalid("action", format!("index {a} outside action set"))
                })
            }
            (Policy::Gaussian(p), Action::Continuous(a)) => p.log_prob(state, a),
            _ => Err(crate::Error::invalid("action", "action kind does not match policy")),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<Action> {
        match self {
            Policy::Softmax(p) => p.sample(state, rng).map(Action::Discrete),
            Policy::Gaussian(p) => p.sample(state, rng).map(Action::Continuous),
        }
    }

    /// `out += scale * ∇_θ log π_θ(a|s)`.
    pub(crate) fn accumulate_grad_log_prob(
        &self,
        state: &[f64],
        action: Action,
        scale: f64,
        out: &mut [f64],
    ) {
        match (self, action) {
            (Policy::Softmax(p), Action::Discrete(a)) => {
                p.accumulate_grad_log_prob(state, a, scale, out)
            }
            (Policy::Gaussian(p), Action::Continuous(a)) => {
                p.accumulate_grad_log_prob(state, a, scale, out)
            }
            _ => debug_assert!(false, "action kind does not match policy"),
        }
    }

    /// `out += scale * ∇_θ KL(π_θ(·|s) ‖ reference)`; returns the KL value.
    pub(crate) fn accumulate_grad_kl(
        &self,
        state: &[f64],
        reference: &ActionDist,
        scale: f64,
        out: &mut [f64],
    ) -> f64 {
        match (self, reference) {
            (Policy::Softmax(p), ActionDist::Categorical(q)) => {
                p.accumulate_grad_kl(state, q, scale, out)
            }
            (Policy::Gaussian(p), ActionDist::Normal { mean, std }) => {
                p.accumulate_grad_kl(state, *mean, *std, scale, out)
            }
            _ => {
                debug_assert!(false, "reference distribution does not match policy");
                0.0
            }
        }
    }
}
