use crate::environments::{EnvFamily, HeterogeneityNetworkSpec};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::federation::{BaseAlgo, TrainingConfig, Variant};
use crate::learners::LearnerConfig;
use crate::numerics::Architecture;
use crate::policies::ScheduleSet;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

/// Everything one experiment invocation needs, loaded from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Clients in the network (`N`).
    #[serde(default = "default_clients")]
    pub n_clients: usize,
    /// Clients sampled per round (`K`).
    #[serde(default = "default_participants")]
    pub participants: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Trial seeds; one full run per seed.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_algos")]
    pub base_algos: Vec<BaseAlgo>,
    /// Heterogeneity levels visited by `sweep`; empty means the level in `environment`.
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "default_true")]
    pub diagnostics: bool,
    /// Write per-round wall-clock time. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub record_wall_ms: bool,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_counts: Option<Vec<f64>>,
    pub environment: EnvFamily,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub schedule: ScheduleSet,
    #[serde(default = "default_arch")]
    pub actor: Architecture,
    #[serde(default = "default_arch")]
    pub critic: Architecture,
}

fn default_clients() -> usize {
    12
}
fn default_participants() -> usize {
    4
}
fn default_rounds() -> usize {
    100
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}
fn default_algos() -> Vec<BaseAlgo> {
    vec![BaseAlgo::FedAvg]
}
fn default_eval_episodes() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_out() -> PathBuf {
    PathBuf::from("runs")
}
fn default_arch() -> Architecture {
    Architecture::TwoLayer { width: 64, radius: 10.0 }
}

impl ExperimentConfig {
    /// A config with every default filled in.
    pub fn for_environment(environment: EnvFamily) -> Self {
        Self {
            n_clients: default_clients(),
            participants: default_participants(),
            rounds: default_rounds(),
            seeds: default_seeds(),
            variants: default_variants(),
            base_algos: default_algos(),
            levels: Vec::new(),
            eval_episodes: default_eval_episodes(),
            diagnostics: true,
            record_wall_ms: false,
            out_dir: default_out(),
            data_counts: None,
            environment,
            learner: LearnerConfig::default(),
            schedule: ScheduleSet::default(),
            actor: default_arch(),
            critic: default_arch(),
        }
    }

    /// Parse and validate TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Levels visited by `sweep`.
    pub fn sweep_levels(&self) -> Vec<f64> {
        if self.levels.is_empty() {
            vec![self.environment.level()]
        } else {
            self.levels.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "need at least one seed"));
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return Err(Error::invalid("seeds", "seeds must be distinct"));
        }
        if self.variants.is_empty() || self.variants.iter().collect::<HashSet<_>>().len() != self.variants.len() {
            return Err(Error::invalid("variants", "need at least one, without repeats"));
        }
        if self.base_algos.is_empty() || self.base_algos.iter().collect::<HashSet<_>>().len() != self.base_algos.len() {
            return Err(Error::invalid("base_algos", "need at least one, without repeats"));
        }
        for &level in &self.sweep_levels() {
            self.cell(self.seeds[0], self.variants[0], self.base_algos[0], level, ExecMode::Sequential)
                .validate()?;
        }
        Ok(())
    }

    /// The training config of one (seed, variant, algorithm, level) cell.
    pub fn cell(&self, seed: u64, variant: Variant, base_algo: BaseAlgo, level: f64, exec: ExecMode) -> TrainingConfig {
        TrainingConfig {
            network: HeterogeneityNetworkSpec {
                n_clients: self.n_clients,
                family: self.environment.with_level(level),
                gamma: self.learner.gamma,
                data_counts: self.data_counts.clone(),
            },
            participants: self.participants,
            rounds: self.rounds,
            variant,
            base_algo,
            learner: self.learner.clone(),
            schedule: self.schedule.clone(),
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            eval_episodes: self.eval_episodes,
            diagnostics: self.diagnostics,
            seed,
            exec,
        }
    }
}

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_toml()?)?;
    Ok(())
}
