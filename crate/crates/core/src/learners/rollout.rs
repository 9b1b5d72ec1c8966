use crate::environments::{ClientEnv, State};
use crate::error::{Error, Result};
use crate::numerics::Network;
use crate::policies::{Action, GaussianPolicy, Policy, ScheduleSet, SoftmaxPolicy};
use rand::Rng;
use std::hash::{DefaultHasher, Hash, Hasher};

/// `B` consecutive transitions from one client.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryBatch {
    pub states: Vec<State>,
    pub critic_inputs: Vec<Vec<f64>>,
    pub next_critic_inputs: Vec<Vec<f64>>,
    pub policy_inputs: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// True terminal: no bootstrap from the next state.
    pub terminals: Vec<bool>,
    /// GAE recursion stops here (terminal, time limit, or end of batch).
    pub episode_ends: Vec<bool>,
    pub old_log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub advantages: Vec<f64>,
    /// `Ĝ = Â + V`, also used as the `Q̂` target.
    pub returns: Vec<f64>,
    /// The critic that produced `values` and `next_values`.
    pub value_source: Option<Network>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn q_targets(&self) -> &[f64] {
        &self.returns
    }

    /// Hash of everything the environment and the collecting policy produced.
    pub fn rollout_digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for i in 0..self.len() {
            for x in self.policy_inputs[i].iter().chain(&self.critic_inputs[i]) {
                x.to_bits().hash(&mut h);
            }
            self.actions[i].as_f64().to_bits().hash(&mut h);
            self.rewards[i].to_bits().hash(&mut h);
            self.old_log_probs[i].to_bits().hash(&mut h);
            (self.terminals[i], self.episode_ends[i]).hash(&mut h);
        }
        h.finish()
    }
}

/// Policy over `net` for this environment's action space at round `t`.
pub fn make_policy(net: Network, env: &ClientEnv, schedule: &ScheduleSet, t: usize) -> Result<Policy> {
    match env.action_codes() {
        Some(codes) => SoftmaxPolicy::new(net, codes, schedule.tau(t)).map(Policy::Softmax),
        None => GaussianPolicy::new(net, schedule.sigma(t)).map(Policy::Gaussian),
    }
}

/// Run `policy` for exactly `b` steps, resetting at episode ends.
pub fn collect_rollout<R: Rng + ?Sized>(
    env: &ClientEnv,
    policy: &Policy,
    b: usize,
    rng: &mut R,
) -> Result<TrajectoryBatch> {
    if b == 0 {
        return Err(Error::invalid("batch_size", "must be at least 1"));
    }
    let mut batch = TrajectoryBatch::default();
    let mut state = env.reset(rng);
    let mut t = 0;
    for i in 0..b {
        let x = env.policy_input(&state)?;
        let action = policy.sample(&x, rng)?;
        let log_prob = policy.log_prob(&x, action)?;
        let step = env.step(&state, action, rng)?;
        t += 1;
        let truncated = t >= env.horizon();
        let terminal = step.terminal || (truncated && env.time_limit_is_terminal());
        batch.critic_inputs.push(env.critic_input(&state)?);
        batch.next_critic_inputs.push(env.critic_input(&step.next)?);
        batch.policy_inputs.push(x);
        batch.actions.push(action);
        batch.rewards.push(step.reward);
        batch.terminals.push(terminal);
        batch.episode_ends.push(step.terminal || truncated || i + 1 == b);
        batch.old_log_probs.push(log_prob);
        batch.states.push(state);
        if step.terminal || truncated {
            state = env.reset(rng);
            t = 0;
        } else {
            state = step.next;
        }
    }
    let n = batch.len();
    batch.values = vec![0.0; n];
    batch.next_values = vec![0.0; n];
    batch.advantages = vec![0.0; n];
    batch.returns = vec![0.0; n];
    Ok(batch)
}

/// Fill `V(s_t)` and `V(s_{t+1})` from `critic`.
pub fn fill_values(batch: &mut TrajectoryBatch, critic: &Network) -> Result<()> {
    if let Some(x) = batch.critic_inputs.first() {
        critic.forward(x)?;
    }
    batch.values = batch.critic_inputs.iter().map(|x| critic.eval(x)).collect();
    batch.next_values = batch.next_critic_inputs.iter().map(|x| critic.eval(x)).collect();
    batch.value_source = Some(critic.clone());
    Ok(())
}
