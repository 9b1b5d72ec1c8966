use super::run::{group_metric, read_rows, MetricsRow, METRICS};
use super::stats::ci95;
use crate::error::Result;
use std::path::{Path, PathBuf};

/// Long-format curve file per metric with 95% bands across seeds.
///
/// Writes `plot_<metric>.csv` with columns
/// `round, variant, base_algo, mean, ci_low, ci_high`; metrics with no values
/// (for example diagnostics that were switched off) are skipped.
pub fn emit_plot_data(metrics_csv: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_rows(metrics_csv)?;
    write_plot_data(&rows, out)
}

pub fn write_plot_data(rows: &[MetricsRow], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for metric in METRICS {
        let groups = group_metric(rows, metric);
        if groups.is_empty() {
            continue;
        }
        let mut lines: Vec<_> = groups.into_iter().collect();
        lines.sort_by_key(|((v, a, r), _)| (*r, *v, *a));
        let path = out.join(format!("plot_{metric}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["round", "variant", "base_algo", "mean", "ci_low", "ci_high"])?;
        for ((variant, algo, round), values) in lines {
            let (mean, lo, hi) = ci95(&values);
            w.write_record([
                round.to_string(),
                variant.name().to_string(),
                algo.name().to_string(),
                mean.to_string(),
                lo.to_string(),
                hi.to_string(),
            ])?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}
