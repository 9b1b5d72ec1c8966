//! Heterogeneous client environments behind one stepping interface.

mod car;
mod chain;
mod network;

pub use car::{CarDynamics, ShiftedCarEnv};
pub use chain::{PerturbedChainMdp, TabularMdp};
pub use network::{build_network, ClientMeta, EnvFamily, FederatedNetwork, HeterogeneityNetworkSpec};

use crate::error::{Error, Result};
use crate::policies::Action;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Box { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: State,
    pub reward: f64,
    pub terminal: bool,
}

/// Map `v ∈ [lo, hi]` to `[−1/√d, 1/√d]`.
pub(crate) fn scale_coordinate(v: f64, lo: f64, hi: f64, d: usize) -> Result<f64> {
    let slack = 1e-12 * (hi - lo);
    if !(v >= lo - slack && v <= hi + slack) {
        return Err(Error::invalid("input", format!("{v} outside [{lo}, {hi}]")));
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    Ok(((v - mid) / half).clamp(-1.0, 1.0) / (d as f64).sqrt())
}

/// One client's environment.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientEnv {
    Car(ShiftedCarEnv),
    Chain(PerturbedChainMdp),
}

impl ClientEnv {
    pub fn gamma(&self) -> f64 {
        match self {
            ClientEnv::Car(e) => e.gamma,
            ClientEnv::Chain(e) => e.mdp.gamma,
        }
    }

    /// Steps per episode before a reset.
    pub fn horizon(&self) -> usize {
        match self {
            ClientEnv::Car(e) => e.horizon,
            ClientEnv::Chain(e) => e.horizon,
        }
    }

    /// Whether hitting the horizon counts as terminal (no bootstrap).
    pub fn time_limit_is_terminal(&self) -> bool {
        matches!(self, ClientEnv::Car(_))
    }

    pub fn reward_bound(&self) -> f64 {
        match self {
            ClientEnv::Car(e) => e.reward_bound(),
            ClientEnv::Chain(e) => e.mdp.reward_bound(),
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        match self {
            ClientEnv::Car(_) => ActionSpace::Box { low: -1.0, high: 1.0 },
            ClientEnv::Chain(e) => ActionSpace::Discrete(e.mdp.n_actions),
        }
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        match self {
            ClientEnv::Car(e) => e.reset(rng),
            ClientEnv::Chain(e) => State::Discrete(e.mdp.sample_initial(rng)),
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &State, action: Action, rng: &mut R) -> Result<Step> {
        match (self, state, action) {
            (ClientEnv::Car(e), State::Continuous(s), Action::Continuous(a)) => e.step(s, a),
            (ClientEnv::Chain(e), State::Discrete(s), Action::Discrete(a)) => e.mdp.step(*s, a, rng),
            _ => Err(Error::invalid("state", "state or action kind does not match environment")),
        }
    }

    /// Critic input: the encoded state.
    pub fn critic_input(&self, state: &State) -> Result<Vec<f64>> {
        match (self, state) {
            (ClientEnv::Car(e), State::Continuous(s)) => e.encode_state(s),
            (ClientEnv::Chain(e), State::Discrete(s)) => e.encode_state(*s),
            _ => Err(Error::invalid("state", "state kind does not match environment")),
        }
    }

    /// State part of the actor input.
    pub fn policy_input(&self, state: &State) -> Result<Vec<f64>> {
        match (self, state) {
            (ClientEnv::Car(e), State::Continuous(s)) => e.encode_state(s),
            (ClientEnv::Chain(e), State::Discrete(s)) => e.encode_policy_state(*s),
            _ => Err(Error::invalid("state", "state kind does not match environment")),
        }
    }

    /// Per-action codes appended to the policy input (discrete actions only).
    pub fn action_codes(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            ClientEnv::Car(_) => None,
            ClientEnv::Chain(e) => Some(e.action_codes()),
        }
    }

    /// Joint `(s, a)` feature vector with `‖(s, a)‖₂ ≤ 1`.
    pub fn encode(&self, state: &State, action: Action) -> Result<Vec<f64>> {
        match (self, state, action) {
            (ClientEnv::Car(e), State::Continuous(s), Action::Continuous(a)) => e.encode(s, a),
            (ClientEnv::Chain(e), State::Discrete(s), Action::Discrete(a)) => e.encode(*s, a),
            _ => Err(Error::invalid("state", "state or action kind does not match environment")),
        }
    }

    pub fn critic_dim(&self) -> usize {
        match self {
            ClientEnv::Car(_) => 2,
            ClientEnv::Chain(e) => e.mdp.n_states,
        }
    }

    pub fn actor_dim(&self) -> usize {
        match self {
            ClientEnv::Car(_) => 2,
            ClientEnv::Chain(e) => e.mdp.n_states + e.mdp.n_actions,
        }
    }

    pub fn tabular(&self) -> Option<&TabularMdp> {
        match self {
            ClientEnv::Car(_) => None,
            ClientEnv::Chain(e) => Some(&e.mdp),
        }
    }
}
