use crate::environments::HeterogeneityNetworkSpec;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::learners::LearnerConfig;
use crate::numerics::Architecture;
use crate::policies::ScheduleSet;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Intra-round update order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Critic first; the actor uses the freshly trained local critic.
    Baseline,
    /// Actor first with the received global critic, then the critic.
    #[serde(rename = "fedrac")]
    FedRac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseAlgo {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedprox")]
    FedProx,
    Scaffold,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Baseline, Variant::FedRac];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::FedRac => "fedrac",
        }
    }
}

impl BaseAlgo {
    pub const ALL: [BaseAlgo; 3] = [BaseAlgo::FedAvg, BaseAlgo::FedProx, BaseAlgo::Scaffold];

    pub fn name(self) -> &'static str {
        match self {
            BaseAlgo::FedAvg => "fedavg",
            BaseAlgo::FedProx => "fedprox",
            BaseAlgo::Scaffold => "scaffold",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for BaseAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One training cell: a network, an algorithm and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub network: HeterogeneityNetworkSpec,
    /// Clients sampled per round (`K`).
    pub participants: usize,
    /// Rounds (`T`).
    pub rounds: usize,
    pub variant: Variant,
    pub base_algo: BaseAlgo,
    pub learner: LearnerConfig,
    pub schedule: ScheduleSet,
    pub actor: Architecture,
    pub critic: Architecture,
    /// Evaluation episodes per client per round.
    pub eval_episodes: usize,
    /// Compute κ, Ω and the other per-round diagnostics.
    pub diagnostics: bool,
    pub seed: u64,
    pub exec: ExecMode,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.learner.validate()?;
        self.schedule
            .validate()
            .map_err(|e| Error::invalid("schedule", e))?;
        if self.participants == 0 || self.participants > self.network.n_clients {
            return Err(Error::invalid(
                "participants",
                format!("need 1 <= K <= N = {}, got {}", self.network.n_clients, self.participants),
            ));
        }
        if self.network.gamma != self.learner.gamma {
            return Err(Error::invalid("gamma", "environment and learner discount differ"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::invalid("eval_episodes", "must be at least 1"));
        }
        Ok(())
    }
}
