//! Server orchestration: client sampling, both update orders, aggregation,
//! and the FedAvg / FedProx / SCAFFOLD base algorithms.

mod aggregate;
mod config;
mod round;
mod train;

pub use aggregate::{
    aggregate, renormalize, scaffold_client_control, scaffold_server_control, ControlPair,
};
pub use config::{BaseAlgo, TrainingConfig, Variant};
pub use round::{client_round, ClientResult, ClientSlot, ClientStats, OrderCheck, Probe, RoundContext};
pub use train::{run_training, sample_clients, Diagnostics, FederationState, RoundReport, Trainer};
