use super::config::ExperimentConfig;
use crate::environments::{CarDynamics, EnvFamily};
use crate::federation::{BaseAlgo, Variant};
use crate::learners::{ActorMode, LearnerConfig};
use crate::numerics::Architecture;
use crate::policies::ScheduleSet;
use std::path::PathBuf;

/// Six-state chain, six clients, three per round, exact oracles available.
///
/// One-hot inputs scaled by `1/√d` keep the network outputs small, so the
/// learning rate and radii are much larger than on the car.
pub fn chain_preset() -> ExperimentConfig {
    ExperimentConfig {
        n_clients: 6,
        participants: 3,
        rounds: 50,
        seeds: (0..5).collect(),
        variants: Variant::ALL.to_vec(),
        base_algos: vec![BaseAlgo::FedAvg],
        levels: vec![0.0, 0.4],
        eval_episodes: 5,
        diagnostics: true,
        record_wall_ms: false,
        out_dir: PathBuf::from("runs/chain"),
        data_counts: None,
        environment: EnvFamily::chain(0.0),
        learner: LearnerConfig {
            lr: 1.0,
            minibatch: 64,
            batch_size: 512,
            gamma: 0.9,
            gae_lambda: 0.1,
            actor_mode: ActorMode::MseRegression,
            ..LearnerConfig::default()
        },
        schedule: ScheduleSet {
            beta_base: 0.1,
            horizon: 50,
            ..ScheduleSet::default()
        },
        actor: Architecture::TwoLayer { width: 256, radius: 30.0 },
        critic: Architecture::TwoLayer { width: 256, radius: 100.0 },
    }
}

/// Action-shifted car network: twelve clients, four per round, `h = 1.5`.
pub fn car_preset() -> ExperimentConfig {
    ExperimentConfig {
        n_clients: 12,
        participants: 4,
        rounds: 100,
        seeds: (0..5).collect(),
        variants: Variant::ALL.to_vec(),
        base_algos: vec![BaseAlgo::FedAvg],
        levels: vec![1.5, 2.0],
        eval_episodes: 5,
        diagnostics: true,
        record_wall_ms: false,
        out_dir: PathBuf::from("runs/car"),
        data_counts: None,
        environment: EnvFamily::Car {
            half_width: 1.5,
            horizon: 200,
            dynamics: CarDynamics {
                power: 0.004,
                ..CarDynamics::default()
            },
        },
        learner: LearnerConfig {
            lr: 0.1,
            ..LearnerConfig::default()
        },
        schedule: ScheduleSet::default(),
        actor: Architecture::TwoLayer { width: 64, radius: 10.0 },
        critic: Architecture::TwoLayer { width: 64, radius: 10.0 },
    }
}
