use super::{oracle_suite, property_suite, Check};
use crate::analysis::{measure_linearization_error, FedOptimum};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::federation::{BaseAlgo, RoundReport, Trainer, Variant};
use crate::harness::{car_preset, chain_preset, mean_sd, ExperimentConfig};
use crate::numerics::NetworkParams;
use crate::rng::{stream, Purpose};
use rand_distr::{Distribution, StandardNormal};
use std::fmt;
use std::time::{Duration, Instant};

const SUITE_SEED: u64 = 2024;

/// What a criterion concluded, with the numbers behind it.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
    /// Extra lines (individual checks, per-seed numbers).
    pub lines: Vec<String>,
}

impl Outcome {
    fn from_checks(checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        let failed = checks.iter().filter(|c| !c.passed).count();
        Self {
            passed,
            detail: format!("{} checks, {failed} failed", checks.len()),
            lines: checks.iter().map(|c| c.to_string()).collect(),
        }
    }
}

pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub time_limit: Option<Duration>,
    run: fn(ExecMode) -> Result<Outcome>,
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub lines: Vec<String>,
    pub elapsed: Duration,
    pub time_limit: Option<Duration>,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let limit = match self.time_limit {
            Some(l) => format!(" / limit {}s", l.as_secs()),
            None => String::new(),
        };
        write!(
            f,
            "{} criterion {}: {} ({:.1}s{limit}): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Run one criterion; exceeding its time limit counts as a failure.
pub fn run_criterion(c: &Criterion, exec: ExecMode) -> CriterionReport {
    let start = Instant::now();
    let outcome = (c.run)(exec).unwrap_or_else(|e| Outcome {
        passed: false,
        detail: format!("error: {e}"),
        lines: Vec::new(),
    });
    let elapsed = start.elapsed();
    let in_time = c.time_limit.is_none_or(|l| elapsed < l);
    let mut detail = outcome.detail;
    if !in_time {
        detail.push_str("; over the time limit");
    }
    CriterionReport {
        id: c.id,
        title: c.title,
        passed: outcome.passed && in_time,
        detail,
        lines: outcome.lines,
        elapsed,
        time_limit: c.time_limit,
    }
}

pub fn criteria() -> Vec<Criterion> {
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    vec![
        Criterion {
            id: 1,
            title: "property suite",
            time_limit: Some(Duration::from_secs(60)),
            run: |_| Ok(Outcome::from_checks(property_suite(SUITE_SEED))),
        },
        Criterion {
            id: 2,
            title: "tabular oracle consistency",
            time_limit: mins(2),
            run: |_| Ok(Outcome::from_checks(oracle_suite(SUITE_SEED))),
        },
        Criterion {
            id: 3,
            title: "update-order contract",
            time_limit: None,
            run: order_contract,
        },
        Criterion {
            id: 4,
            title: "heterogeneity monotonicity of kappa",
            time_limit: mins(10),
            run: kappa_monotonicity,
        },
        Criterion {
            id: 5,
            title: "directional advantage on the shifted car",
            time_limit: mins(30),
            run: car_advantage,
        },
        Criterion {
            id: 6,
            title: "aggregation-error separation",
            time_limit: mins(15),
            run: omega_separation,
        },
        Criterion {
            id: 7,
            title: "linearization trend in width",
            time_limit: mins(5),
            run: linearization_trend,
        },
        Criterion {
            id: 8,
            title: "homogeneous sanity on the chain",
            time_limit: None,
            run: homogeneous_sanity,
        },
    ]
}

struct CellOutput {
    seed: u64,
    variant: Variant,
    level: f64,
    reports: Vec<RoundReport>,
    optimum: Option<FedOptimum>,
}

type Cell = (u64, Variant, BaseAlgo, f64);

fn run_cells(cfg: &ExperimentConfig, cells: &[Cell], exec: ExecMode) -> Result<Vec<CellOutput>> {
    exec::try_map(exec, cells, |&(seed, variant, algo, level)| {
        let mut trainer = Trainer::new(cfg.cell(seed, variant, algo, level, exec))?;
        let optimum = trainer.optimum().cloned();
        let mut reports = Vec::with_capacity(cfg.rounds);
        while !trainer.is_done() {
            reports.push(trainer.step()?);
        }
        Ok(CellOutput {
            seed,
            variant,
            level,
            reports,
            optimum,
        })
    })
}

fn grid(seeds: &[u64], variants: &[Variant], levels: &[f64]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &level in levels {
        for &variant in variants {
            for &seed in seeds {
                cells.push((seed, variant, BaseAlgo::FedAvg, level));
            }
        }
    }
    cells
}

fn select<'a>(out: &'a [CellOutput], variant: Variant, level: f64) -> impl Iterator<Item = &'a CellOutput> {
    out.iter().filter(move |c| c.variant == variant && c.level == level)
}

fn missing(what: &str) -> Error {
    Error::Config(format!("{what} was not computed; enable diagnostics"))
}

fn order_contract(exec: ExecMode) -> Result<Outcome> {
    let mut cfg = chain_preset();
    cfg.rounds = 10;
    let mut cells = Vec::new();
    for variant in Variant::ALL {
        for algo in BaseAlgo::ALL {
            cells.push((0, variant, algo, 0.4));
        }
    }
    let results = exec::try_map(exec, &cells, |&(seed, variant, algo, level)| {
        let mut trainer = Trainer::new(cfg.cell(seed, variant, algo, level, exec))?;
        let mut checked = 0;
        let mut violations = Vec::new();
        while !trainer.is_done() {
            let r = trainer.step()?;
            for c in &r.clients {
                checked += 1;
                if !(c.order.holds_for(variant) && c.order.critic_moved) {
                    violations.push(format!("{variant}/{algo} round {} client {}: {:?}", r.round, c.client, c.order));
                }
            }
        }
        Ok::<_, Error>((variant, algo, checked, violations))
    })?;
    let mut lines = Vec::new();
    let mut total = 0;
    let mut bad = 0;
    for (variant, algo, checked, violations) in results {
        total += checked;
        bad += violations.len();
        lines.push(format!("{variant}/{algo}: {checked} client rounds, {} violations", violations.len()));
        lines.extend(violations);
    }
    Ok(Outcome {
        passed: bad == 0 && total > 0,
        detail: format!("{total} client rounds over 10 rounds × 2 orders × 3 base algorithms, {bad} violations"),
        lines,
    })
}

fn kappa_monotonicity(exec: ExecMode) -> Result<Outcome> {
    let mut cfg = chain_preset();
    cfg.rounds = 20;
    let seeds: Vec<u64> = (0..5).collect();
    let levels = [0.0, 0.4];
    let out = run_cells(&cfg, &grid(&seeds, &Variant::ALL, &levels), exec)?;
    let mut passed = true;
    let mut parts = Vec::new();
    let mut lines = Vec::new();
    for variant in Variant::ALL {
        let mut stats = Vec::new();
        for level in levels {
            let kappas: Vec<f64> = select(&out, variant, level)
                .map(|c| c.reports[19].diagnostics.kappa.ok_or_else(|| missing("kappa")))
                .collect::<Result<_>>()?;
            lines.push(format!("{variant} eps={level}: kappa at round 20 per seed {kappas:.4?}"));
            stats.push(mean_sd(&kappas));
        }
        let ((m0, s0), (m1, s1)) = (stats[0], stats[1]);
        let ok = m0 + s0 < m1 - s1;
        passed &= ok;
        parts.push(format!("{variant}: {m0:.4}±{s0:.4} -> {m1:.4}±{s1:.4}"));
    }
    Ok(Outcome {
        passed,
        detail: format!("mean±sd over 5 seeds, eps 0 -> 0.4; {}", parts.join("; ")),
        lines,
    })
}

fn car_advantage(exec: ExecMode) -> Result<Outcome> {
    let mut cfg = car_preset();
    cfg.diagnostics = false;
    let seeds: Vec<u64> = (0..5).collect();
    let out = run_cells(&cfg, &grid(&seeds, &Variant::ALL, &[1.5]), exec)?;
    let tail = |c: &CellOutput| {
        let n = c.reports.len();
        let last = &c.reports[n.saturating_sub(10)..];
        last.iter().map(|r| r.mean_return).sum::<f64>() / last.len() as f64
    };
    let base: Vec<f64> = select(&out, Variant::Baseline, 1.5).map(tail).collect();
    let fed: Vec<f64> = select(&out, Variant::FedRac, 1.5).map(tail).collect();
    let wins = fed.iter().zip(&base).filter(|(f, b)| f >= b).count();
    let (mb, mf) = (mean_sd(&base).0, mean_sd(&fed).0);
    let lines = select(&out, Variant::Baseline, 1.5)
        .zip(base.iter().zip(&fed))
        .map(|(c, (b, f))| format!("seed {}: baseline {b:.4}, fedrac {f:.4}", c.seed))
        .collect();
    Ok(Outcome {
        passed: wins >= 4 && mf >= mb,
        detail: format!("final-10-round return: fedrac >= baseline in {wins}/5 seeds, means {mf:.4} vs {mb:.4}"),
        lines,
    })
}

fn omega_separation(exec: ExecMode) -> Result<Outcome> {
    let mut cfg = chain_preset();
    cfg.rounds = 30;
    let seeds: Vec<u64> = (0..5).collect();
    let levels = [0.0, 0.4];
    let out = run_cells(&cfg, &grid(&seeds, &Variant::ALL, &levels), exec)?;
    let window = |c: &CellOutput| -> Result<f64> {
        let w: Vec<f64> = c.reports[9..30]
            .iter()
            .map(|r| r.diagnostics.omega.ok_or_else(|| missing("omega")))
            .collect::<Result<_>>()?;
        Ok(w.iter().sum::<f64>() / w.len() as f64)
    };
    let mut factors = Vec::new();
    let mut lines = Vec::new();
    for variant in Variant::ALL {
        let mut means = Vec::new();
        for level in levels {
            let per_seed: Vec<f64> = select(&out, variant, level).map(window).collect::<Result<_>>()?;
            lines.push(format!("{variant} eps={level}: mean omega over rounds 10-30 per seed {per_seed:.5?}"));
            means.push(mean_sd(&per_seed).0);
        }
        factors.push((variant, means[0], means[1], means[1] / means[0]));
    }
    let (fb, ff) = (factors[0].3, factors[1].3);
    let detail = factors
        .iter()
        .map(|(v, a, b, f)| format!("{v}: {a:.5} -> {b:.5} (x{f:.3})"))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome {
        passed: fb > ff,
        detail,
        lines,
    })
}

fn linearization_trend(_: ExecMode) -> Result<Outcome> {
    const SEEDS: u64 = 30;
    const INPUTS: usize = 256;
    let (radius, d) = (1.0, 4);
    let widths = [16, 256, 4096];
    let mut means = Vec::new();
    for &m in &widths {
        let mut total = 0.0;
        for seed in 0..SEEDS {
            let mut rng = stream(seed, Purpose::Test);
            let net = NetworkParams::init(m, d, radius, &mut rng)?;
            let dir: Vec<f64> = (0..m * d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let w = net
                .init_weights()
                .as_slice()
                .iter()
                .zip(&dir)
                .map(|(w0, z)| w0 + radius * z / norm)
                .collect();
            let net = net.with_weights(w)?.project_to_ball();
            let inputs: Vec<Vec<f64>> = (0..INPUTS)
                .map(|_| {
                    let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let n = x.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
                    x.into_iter().map(|v| v / n).collect()
                })
                .collect();
            total += measure_linearization_error(&net, &inputs)?;
        }
        means.push(total / SEEDS as f64);
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome {
        passed: decreasing,
        detail: format!("R={radius}, mean |f - f_lin| over {SEEDS} seeds for m={widths:?}: {means:.5?}"),
        lines: Vec::new(),
    })
}

fn homogeneous_sanity(exec: ExecMode) -> Result<Outcome> {
    let cfg = chain_preset();
    let seeds: Vec<u64> = (0..3).collect();
    let out = run_cells(&cfg, &grid(&seeds, &Variant::ALL, &[0.0]), exec)?;
    let mut hits = 0;
    let mut lines = Vec::new();
    for c in &out {
        let opt = c.optimum.as_ref().ok_or_else(|| missing("optimum"))?.objective;
        let last = c.reports.last().ok_or_else(|| missing("final round"))?;
        let value = last.exact_objective.ok_or_else(|| missing("exact objective"))?;
        let ok = value >= 0.9 * opt;
        hits += usize::from(ok);
        lines.push(format!(
            "{} seed {}: exact objective after {} rounds {value:.4} vs optimum {opt:.4} ({:.1}%)",
            c.variant,
            c.seed,
            last.round,
            100.0 * value / opt
        ));
    }
    Ok(Outcome {
        passed: hits == out.len(),
        detail: format!("{hits}/{} runs within 10% of the best deterministic policy after 50 rounds", out.len()),
        lines,
    })
}
