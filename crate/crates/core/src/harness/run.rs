use super::config::ExperimentConfig;
use super::stats::mean_stderr;
use crate::environments::ClientMeta;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::federation::{BaseAlgo, RoundReport, Trainer, Variant};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// One CSV line: a single round of a single cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub round: usize,
    pub variant: Variant,
    pub base_algo: BaseAlgo,
    pub mean_return: f64,
    pub return_stderr: f64,
    pub kappa: Option<f64>,
    pub omega: Option<f64>,
    pub stepwise_logdiff: Option<f64>,
    pub linearization_error: Option<f64>,
    pub critic_eval_error: Option<f64>,
    pub wall_ms: Option<f64>,
    pub exact_objective: Option<f64>,
    pub fedrac_target_error: Option<f64>,
}

/// Metric columns that get summaries and plot files.
pub const METRICS: [&str; 9] = [
    "mean_return",
    "exact_objective",
    "kappa",
    "omega",
    "stepwise_logdiff",
    "linearization_error",
    "critic_eval_error",
    "fedrac_target_error",
    "wall_ms",
];

impl MetricsRow {
    pub fn from_report(seed: u64, variant: Variant, base_algo: BaseAlgo, r: &RoundReport, wall: bool) -> Self {
        let d = &r.diagnostics;
        Self {
            seed,
            round: r.round,
            variant,
            base_algo,
            mean_return: r.mean_return,
            return_stderr: r.return_stderr,
            kappa: d.kappa,
            omega: d.omega,
            stepwise_logdiff: d.stepwise_logdiff,
            linearization_error: d.linearization_error,
            critic_eval_error: d.critic_eval_error,
            wall_ms: wall.then_some(r.wall_ms),
            exact_objective: r.exact_objective,
            fedrac_target_error: d.fedrac_target_error,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "mean_return" => Some(self.mean_return),
            "return_stderr" => Some(self.return_stderr),
            "exact_objective" => self.exact_objective,
            "kappa" => self.kappa,
            "omega" => self.omega,
            "stepwise_logdiff" => self.stepwise_logdiff,
            "linearization_error" => self.linearization_error,
            "critic_eval_error" => self.critic_eval_error,
            "fedrac_target_error" => self.fedrac_target_error,
            "wall_ms" => self.wall_ms,
            _ => None,
        }
    }

    fn order_key(&self) -> (u64, usize, Variant, BaseAlgo) {
        (self.seed, self.round, self.variant, self.base_algo)
    }
}

/// Client draws of one cell, kept in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct CellRecord {
    pub seed: u64,
    pub variant: Variant,
    pub base_algo: BaseAlgo,
    pub level: f64,
    pub rounds_completed: usize,
    pub clients: Vec<ClientMeta>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    library: &'static str,
    version: &'static str,
    level: f64,
    config: &'a ExperimentConfig,
    cells: &'a [CellRecord],
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    pub cells: Vec<CellRecord>,
    pub metrics_path: PathBuf,
    pub manifest_path: PathBuf,
    pub summary_path: PathBuf,
}

struct CellRun {
    record: CellRecord,
    rows: Vec<MetricsRow>,
    error: Option<Error>,
}

fn run_cell(cfg: &ExperimentConfig, seed: u64, variant: Variant, algo: BaseAlgo, level: f64, exec: ExecMode) -> CellRun {
    let mut record = CellRecord {
        seed,
        variant,
        base_algo: algo,
        level,
        rounds_completed: 0,
        clients: Vec::new(),
    };
    let mut rows = Vec::new();
    let mut trainer = match Trainer::new(cfg.cell(seed, variant, algo, level, exec)) {
        Ok(t) => t,
        Err(e) => return CellRun { record, rows, error: Some(e) },
    };
    record.clients = trainer.meta().to_vec();
    while !trainer.is_done() {
        match trainer.step() {
            Ok(report) => {
                rows.push(MetricsRow::from_report(seed, variant, algo, &report, cfg.record_wall_ms));
                record.rounds_completed = report.round;
            }
            Err(e) => return CellRun { record, rows, error: Some(e) },
        }
    }
    CellRun { record, rows, error: None }
}

/// Run every seed × variant × algorithm cell at `level` and write
/// `metrics.csv`, `manifest.toml` and `summary.csv` into `out`.
///
/// Rows from cells that finished are written even if another cell fails;
/// the first failure (in cell order) is returned afterwards.
pub fn run_experiment(cfg: &ExperimentConfig, level: f64, out: &Path, exec: ExecMode) -> Result<ExperimentOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        for &variant in &cfg.variants {
            for &algo in &cfg.base_algos {
                cells.push((seed, variant, algo));
            }
        }
    }
    let runs = exec::map(exec, &cells, |&(seed, variant, algo)| run_cell(cfg, seed, variant, algo, level, exec));

    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut records = Vec::new();
    let mut first_error = None;
    for run in runs {
        rows.extend(run.rows);
        records.push(run.record);
        if first_error.is_none() {
            first_error = run.error;
        }
    }
    rows.sort_by_key(MetricsRow::order_key);

    let metrics_path = out.join("metrics.csv");
    write_rows(&metrics_path, &rows)?;
    let manifest_path = out.join("manifest.toml");
    let manifest = Manifest {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        level,
        config: cfg,
        cells: &records,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&manifest_path, text)?;
    let summary_path = out.join("summary.csv");
    write_summary(&summary_path, &rows)?;

    match first_error {
        Some(e) => Err(e),
        None => Ok(ExperimentOutput {
            rows,
            cells: records,
            metrics_path,
            manifest_path,
            summary_path,
        }),
    }
}

pub fn write_rows(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(METRIC_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    for col in METRIC_HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Config(format!("{}: missing column `{col}`", path.display())));
        }
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub(crate) const METRIC_HEADER: [&str; 14] = [
    "seed",
    "round",
    "variant",
    "base_algo",
    "mean_return",
    "return_stderr",
    "kappa",
    "omega",
    "stepwise_logdiff",
    "linearization_error",
    "critic_eval_error",
    "wall_ms",
    "exact_objective",
    "fedrac_target_error",
];

type GroupKey = (Variant, BaseAlgo, usize);

pub(crate) fn group_metric(rows: &[MetricsRow], metric: &str) -> BTreeMap<GroupKey, Vec<f64>> {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for row in rows {
        if let Some(v) = row.metric(metric) {
            groups.entry((row.variant, row.base_algo, row.round)).or_default().push(v);
        }
    }
    groups
}

/// Mean ± standard error across seeds, per round and metric.
fn write_summary(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "base_algo", "round", "metric", "n", "mean", "stderr"])?;
    for metric in METRICS {
        for ((variant, algo, round), values) in group_metric(rows, metric) {
            let (mean, stderr) = mean_stderr(&values);
            w.write_record([
                variant.name().to_string(),
                algo.name().to_string(),
                round.to_string(),
                metric.to_string(),
                values.len().to_string(),
                mean.to_string(),
                stderr.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
