use super::{State, Step};
use crate::error::{Error, Result};
use rand::Rng;

/// Explicit finite MDP: `P[s][a][s′]`, `r[s][a]`, initial distribution μ.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    pub initial: Vec<f64>,
    pub gamma: f64,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("mdp", "needs at least one state and one action"));
        }
        if transitions.len() != n_states * n_actions * n_states {
            return Err(Error::Dimension {
                expected: n_states * n_actions * n_states,
                got: transitions.len(),
            });
        }
        if rewards.len() != n_states * n_actions || initial.len() != n_states {
            return Err(Error::invalid("mdp", "reward table or initial distribution has wrong size"));
        }
        for row in transitions.chunks(n_states).chain(std::iter::once(initial.as_slice())) {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("mdp", "rows must be stochastic"));
            }
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid("gamma", format!("must be in [0, 1), got {gamma}")));
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            initial,
            gamma,
        })
    }

    /// `P(·|s, a)`.
    pub fn next_dist(&self, s: usize, a: usize) -> &[f64] {
        let off = (s * self.n_actions + a) * self.n_states;
        &self.transitions[off..off + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward_bound(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    fn sample_from<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (i, p) in dist.iter().enumerate() {
            cum += p;
            if u < cum {
                return i;
            }
        }
        // rounding: fall back to the last state with positive mass
        dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        Self::sample_from(&self.initial, rng)
    }

    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<Step> {
        if s >= self.n_states {
            return Err(Error::invalid("state", format!("index {s} out of range")));
        }
        if a >= self.n_actions {
            return Err(Error::invalid("action", format!("index {a} out of range")));
        }
        let next = Self::sample_from(self.next_dist(s, a), rng);
        Ok(Step {
            next: State::Discrete(next),
            reward: self.reward(s, a),
            terminal: false,
        })
    }
}

/// Shared base chain mixed with a client-specific random stochastic tensor:
/// `P_n = (1 − ε)·P_base + ε·D_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedChainMdp {
    pub mdp: TabularMdp,
    pub perturbation: f64,
    pub horizon: usize,
}

impl PerturbedChainMdp {
    /// Left / stay / right chain; extra actions behave like "stay".
    ///
    /// Reward 1 in the right-most state and a 0.2 distractor for staying in
    /// state 0; μ is uniform.
    pub fn base_chain(n_states: usize, n_actions: usize, gamma: f64) -> Result<TabularMdp> {
        if n_states < 2 || n_actions < 1 {
            return Err(Error::invalid("chain", "needs at least 2 states and 1 action"));
        }
        let (ns, na) = (n_states, n_actions);
        let mut p = vec![0.0; ns * na * ns];
        let mut r = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let row = &mut p[(s * na + a) * ns..(s * na + a + 1) * ns];
                match a {
                    0 => {
                        row[s.saturating_sub(1)] += 0.9;
                        row[s] += 0.1;
                    }
                    2 => {
                        row[(s + 1).min(ns - 1)] += 0.8;
                        row[s] += 0.2;
                    }
                    _ => row[s] = 1.0,
                }
                if s == ns - 1 {
                    r[s * na + a] = 1.0;
                } else if s == 0 && a == 1 {
                    r[s * na + a] = 0.2;
                }
            }
        }
        TabularMdp::new(ns, na, p, r, vec![1.0 / ns as f64; ns], gamma)
    }

    /// Random stochastic tensor with uniform-Dirichlet rows.
    pub fn random_tensor<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Vec<f64> {
        let mut d = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let raw: Vec<f64> = (0..n_states)
                .map(|_| -(1.0 - rng.random::<f64>()).ln())
                .collect();
            let total: f64 = raw.iter().sum();
            d.extend(raw.into_iter().map(|x| x / total));
        }
        d
    }

    pub fn new(base: &TabularMdp, perturbation: f64, noise: &[f64], horizon: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&perturbation) {
            return Err(Error::invalid("perturbation", format!("must be in [0, 1], got {perturbation}")));
        }
        if noise.len() != base.transitions.len() {
            return Err(Error::Dimension {
                expected: base.transitions.len(),
                got: noise.len(),
            });
        }
        let mut p: Vec<f64> = base
            .transitions
            .iter()
            .zip(noise)
            .map(|(b, d)| (1.0 - perturbation) * b + perturbation * d)
            .collect();
        // renormalize rounding so rows sum to 1 within 1e-12
        for row in p.chunks_mut(base.n_states) {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= total);
        }
        let mdp = TabularMdp::new(
            base.n_states,
            base.n_actions,
            p,
            base.rewards.clone(),
            base.initial.clone(),
            base.gamma,
        )?;
        Ok(Self {
            mdp,
            perturbation,
            horizon,
        })
    }

    fn policy_scale(&self) -> f64 {
        1.0 / ((self.mdp.n_states + self.mdp.n_actions) as f64).sqrt()
    }

    pub fn encode_state(&self, s: usize) -> Result<Vec<f64>> {
        if s >= self.mdp.n_states {
            return Err(Error::invalid("state", format!("index {s} out of range")));
        }
        let mut v = vec![0.0; self.mdp.n_states];
        v[s] = 1.0 / (self.mdp.n_states as f64).sqrt();
        Ok(v)
    }

    pub fn encode_policy_state(&self, s: usize) -> Result<Vec<f64>> {
        if s >= self.mdp.n_states {
            return Err(Error::invalid("state", format!("index {s} out of range")));
        }
        let mut v = vec![0.0; self.mdp.n_states];
        v[s] = self.policy_scale();
        Ok(v)
    }

    pub fn action_codes(&self) -> Vec<Vec<f64>> {
        let c = self.policy_scale();
        (0..self.mdp.n_actions)
            .map(|a| {
                let mut v = vec![0.0; self.mdp.n_actions];
                v[a] = c;
                v
            })
            .collect()
    }

    pub fn encode(&self, s: usize, a: usize) -> Result<Vec<f64>> {
        if a >= self.mdp.n_actions {
            return Err(Error::invalid("action", format!("index {a} out of range")));
        }
        let mut v = self.encode_policy_state(s)?;
        v.extend_from_slice(&self.action_codes()[a]);
        Ok(v)
    }
}
