use super::{scale_coordinate, State, Step};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Car in a quadratic valley; the engine alone cannot climb to the goal, so
/// the agent has to build momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarDynamics {
    pub min_position: f64,
    pub max_position: f64,
    pub max_speed: f64,
    pub goal_position: f64,
    pub valley_bottom: f64,
    pub hill_stiffness: f64,
    pub power: f64,
    pub goal_reward: f64,
    pub action_cost: f64,
}

impl Default for CarDynamics {
    fn default() -> Self {
        Self {
            min_position: -1.2,
            max_position: 0.6,
            max_speed: 0.07,
            goal_position: 0.45,
            valley_bottom: -0.5,
            hill_stiffness: 0.005,
            power: 0.0015,
            goal_reward: 1.0,
            action_cost: 0.001,
        }
    }
}

impl CarDynamics {
    pub fn validate(&self) -> Result<()> {
        let d = self;
        let finite = [
            d.min_position, d.max_position, d.max_speed, d.goal_position, d.valley_bottom,
            d.hill_stiffness, d.power, d.goal_reward, d.action_cost,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("dynamics", "all constants must be finite"));
        }
        if !(d.min_position < d.goal_position && d.goal_position <= d.max_position) {
            return Err(Error::invalid("dynamics", "need min_position < goal_position <= max_position"));
        }
        if !(d.max_speed > 0.0 && d.power > 0.0) {
            return Err(Error::invalid("dynamics", "max_speed and power must be positive"));
        }
        Ok(())
    }
}

/// Car whose actions are shifted by a client constant `ω` before reaching
/// the engine.
///
/// The agent's action is clipped to `[−1, 1]`, shifted by `ω`, and clipped to
/// the actuator range again.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedCarEnv {
    pub dynamics: CarDynamics,
    pub action_shift: f64,
    pub horizon: usize,
    pub gamma: f64,
}

impl ShiftedCarEnv {
    pub fn new(action_shift: f64) -> Self {
        Self {
            dynamics: CarDynamics::default(),
            action_shift,
            horizon: 200,
            gamma: 0.99,
        }
    }

    pub fn reward_bound(&self) -> f64 {
        self.dynamics.goal_reward + self.dynamics.action_cost
    }

    pub fn effective_action(&self, action: f64) -> f64 {
        (action.clamp(-1.0, 1.0) + self.action_shift).clamp(-1.0, 1.0)
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        State::Continuous(vec![rng.random_range(-0.6..-0.4), 0.0])
    }

    pub fn step(&self, state: &[f64], action: f64) -> Result<Step> {
        let d = &self.dynamics;
        if state.len() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: state.len(),
            });
        }
        if !action.is_finite() {
            return Err(Error::invalid("action", "not finite"));
        }
        let (x, v) = (state[0], state[1]);
        let force = self.effective_action(action);
        let mut v = v + d.power * force - d.hill_stiffness * (x - d.valley_bottom);
        v = v.clamp(-d.max_speed, d.max_speed);
        let mut x = (x + v).clamp(d.min_position, d.max_position);
        if x <= d.min_position && v < 0.0 {
            v = 0.0;
            x = d.min_position;
        }
        let terminal = x >= d.goal_position;
        let mut reward = -d.action_cost * force * force;
        if terminal {
            reward += d.goal_reward;
        }
        Ok(Step {
            next: State::Continuous(vec![x, v]),
            reward,
            terminal,
        })
    }

    pub fn encode_state(&self, s: &[f64]) -> Result<Vec<f64>> {
        let d = &self.dynamics;
        Ok(vec![
            scale_coordinate(s[0], d.min_position, d.max_position, 2)?,
            scale_coordinate(s[1], -d.max_speed, d.max_speed, 2)?,
        ])
    }

    pub fn encode(&self, s: &[f64], a: f64) -> Result<Vec<f64>> {
        let d = &self.dynamics;
        Ok(vec![
            scale_coordinate(s[0], d.min_position, d.max_position, 3)?,
            scale_coordinate(s[1], -d.max_speed, d.max_speed, 3)?,
            scale_coordinate(a, -1.0, 1.0, 3)?,
        ])
    }
}
