use super::{CarDynamics, ClientEnv, PerturbedChainMdp, ShiftedCarEnv};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which environment family a federation is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvFamily {
    /// Cars whose actions are shifted by `ω_n ~ U[−h, h]`.
    Car {
        #[serde(default)]
        half_width: f64,
        #[serde(default = "default_car_horizon")]
        horizon: usize,
        #[serde(default)]
        dynamics: CarDynamics,
    },
    /// Chains with transition perturbation level `ε_P`.
    Chain {
        #[serde(default)]
        perturbation: f64,
        #[serde(default = "default_chain_states")]
        n_states: usize,
        #[serde(default = "default_chain_actions")]
        n_actions: usize,
        #[serde(default = "default_chain_horizon")]
        horizon: usize,
    },
}

fn default_car_horizon() -> usize {
    200
}
fn default_chain_states() -> usize {
    6
}
fn default_chain_actions() -> usize {
    3
}
fn default_chain_horizon() -> usize {
    50
}

impl EnvFamily {
    pub fn car(half_width: f64) -> Self {
        EnvFamily::Car {
            half_width,
            horizon: default_car_horizon(),
            dynamics: CarDynamics::default(),
        }
    }

    pub fn chain(perturbation: f64) -> Self {
        EnvFamily::Chain {
            perturbation,
            n_states: default_chain_states(),
            n_actions: default_chain_actions(),
            horizon: default_chain_horizon(),
        }
    }

    /// Heterogeneity knob: `h` for cars, `ε_P` for chains.
    pub fn level(&self) -> f64 {
        match self {
            EnvFamily::Car { half_width, .. } => *half_width,
            EnvFamily::Chain { perturbation, .. } => *perturbation,
        }
    }

    pub fn with_level(&self, level: f64) -> Self {
        let mut f = self.clone();
        match &mut f {
            EnvFamily::Car { half_width, .. } => *half_width = level,
            EnvFamily::Chain { perturbation, .. } => *perturbation = level,
        }
        f
    }

    pub fn is_tabular(&self) -> bool {
        matches!(self, EnvFamily::Chain { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityNetworkSpec {
    pub n_clients: usize,
    pub family: EnvFamily,
    pub gamma: f64,
    /// Data counts `l_n`; equal weights when absent.
    pub data_counts: Option<Vec<f64>>,
}

/// Per-client metadata recorded in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientMeta {
    pub id: usize,
    pub data_count: f64,
    pub weight: f64,
    pub action_shift: Option<f64>,
    pub perturbation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FederatedNetwork {
    pub envs: Vec<ClientEnv>,
    pub meta: Vec<ClientMeta>,
}

impl FederatedNetwork {
    pub fn weights(&self) -> Vec<f64> {
        self.meta.iter().map(|m| m.weight).collect()
    }
}

impl HeterogeneityNetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::invalid("n_clients", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma", "must be in [0, 1)"));
        }
        match &self.family {
            EnvFamily::Car { half_width, horizon, dynamics } => {
                dynamics.validate()?;
                if !(*half_width >= 0.0) {
                    return Err(Error::invalid("half_width", "must be nonnegative"));
                }
                if *horizon == 0 {
                    return Err(Error::invalid("family", "horizon must be positive"));
                }
            }
            EnvFamily::Chain { perturbation, n_states, n_actions, horizon } => {
                if !(0.0..=1.0).contains(perturbation) {
                    return Err(Error::invalid("perturbation", "must be in [0, 1]"));
                }
                if *n_states < 2 || *n_actions < 1 || *horizon == 0 {
                    return Err(Error::invalid("family", "invalid chain shape"));
                }
            }
        }
        if let Some(l) = &self.data_counts {
            if l.len() != self.n_clients || l.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::invalid("data_counts", "need one positive count per client"));
            }
        }
        Ok(())
    }
}

/// Build `N` client environments that differ only in `ω_n` or `P_n`.
pub fn build_network<R: Rng + ?Sized>(spec: &HeterogeneityNetworkSpec, rng: &mut R) -> Result<FederatedNetwork> {
    spec.validate()?;
    let n = spec.n_clients;
    let counts = spec.data_counts.clone().unwrap_or_else(|| vec![1.0; n]);
    let total: f64 = counts.iter().sum();
    let mut envs = Vec::with_capacity(n);
    let mut meta = Vec::with_capacity(n);
    let base = match &spec.family {
        EnvFamily::Chain { n_states, n_actions, .. } => {
            Some(PerturbedChainMdp::base_chain(*n_states, *n_actions, spec.gamma)?)
        }
        EnvFamily::Car { .. } => None,
    };
    for (id, &l) in counts.iter().enumerate() {
        let (env, shift, eps) = match &spec.family {
            EnvFamily::Car { half_width, horizon, dynamics } => {
                let w = if *half_width > 0.0 {
                    rng.random_range(-half_width..=*half_width)
                } else {
                    0.0
                };
                let mut env = ShiftedCarEnv::new(w);
                env.dynamics = *dynamics;
                env.horizon = *horizon;
                env.gamma = spec.gamma;
                (ClientEnv::Car(env), Some(w), None)
            }
            EnvFamily::Chain { perturbation, n_states, n_actions, horizon, .. } => {
                let base = base.as_ref().expect("chain base");
                // draw noise even at ε = 0 so the stream layout is level-independent
                let noise = PerturbedChainMdp::random_tensor(*n_states, *n_actions, rng);
                let env = PerturbedChainMdp::new(base, *perturbation, &noise, *horizon)?;
                (ClientEnv::Chain(env), None, Some(*perturbation))
            }
        };
        envs.push(env);
        meta.push(ClientMeta {
            id,
            data_count: l,
            weight: l / total,
            action_shift: shift,
            perturbation: eps,
        });
    }
    Ok(FederatedNetwork { envs, meta })
}
