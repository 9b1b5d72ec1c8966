//! Experiment configuration, multi-seed runs and CSV output.

mod config;
mod plot;
mod presets;
mod run;
mod stats;

pub use config::{load_config, save_config, ExperimentConfig};
pub use presets::{car_preset, chain_preset};
pub use plot::{emit_plot_data, write_plot_data};
pub use run::{read_rows, run_experiment, write_rows, CellRecord, ExperimentOutput, MetricsRow, METRICS};
pub use stats::{ci95, mean_sd, mean_stderr};
