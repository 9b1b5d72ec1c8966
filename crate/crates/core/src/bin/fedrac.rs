use clap::{Args, Parser, Subcommand, ValueEnum};
use fedrac::exec::{self, ExecMode};
use fedrac::federation::{BaseAlgo, Variant};
use fedrac::harness::{emit_plot_data, load_config, mean_stderr, run_experiment, ExperimentConfig, ExperimentOutput};
use fedrac::verify::{criteria, run_criterion};
use fedrac::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "fedrac", version, about = "Federated actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one variant with one base algorithm over the configured seeds.
    Train(Common),
    /// Run the variant × base-algorithm grid.
    Compare(Common),
    /// Run the grid at every heterogeneity level listed in the config.
    Sweep(Common),
    /// Run property, oracle and acceptance checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Also run the long experiment criteria.
        #[arg(long)]
        all: bool,
    },
    /// Turn a metrics CSV into per-metric curve files with 95% bands.
    Plotdata {
        #[command(flatten)]
        common: Common,
        /// Metrics file; defaults to `<out>/metrics.csv`.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Added to every configured seed.
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed_offset: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Baseline,
    Fedrac,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Fedavg,
    Fedprox,
    Scaffold,
    All,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Baseline => vec![Variant::Baseline],
            VariantArg::Fedrac => vec![Variant::FedRac],
            VariantArg::Both => Variant::ALL.to_vec(),
        }
    }
}

impl AlgoArg {
    fn algos(self) -> Vec<BaseAlgo> {
        match self {
            AlgoArg::Fedavg => vec![BaseAlgo::FedAvg],
            AlgoArg::Fedprox => vec![BaseAlgo::FedProx],
            AlgoArg::Scaffold => vec![BaseAlgo::Scaffold],
            AlgoArg::All => BaseAlgo::ALL.to_vec(),
        }
    }
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_divergence() {
            EXIT_DIVERGED
        } else if matches!(e, Error::Config(_) | Error::InvalidArgument { .. }) {
            EXIT_CONFIG
        } else {
            1
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn resolve(common: &Common, single_cell: bool) -> Result<ExperimentConfig, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| config_error("--config PATH is required"))?;
    let mut cfg = load_config(path)?;
    if common.seed_offset > 0 {
        cfg.seeds = cfg
            .seeds
            .iter()
            .map(|s| s.checked_add(common.seed_offset))
            .collect::<Option<_>>()
            .ok_or_else(|| config_error("--seed-offset overflows a seed"))?;
    }
    if let Some(v) = common.variant {
        cfg.variants = v.variants();
    }
    if let Some(a) = common.algo {
        cfg.base_algos = a.algos();
    }
    if single_cell {
        if cfg.variants.len() != 1 || cfg.base_algos.len() != 1 {
            if common.variant.is_some_and(|v| matches!(v, VariantArg::Both))
                || common.algo.is_some_and(|a| matches!(a, AlgoArg::All))
            {
                return Err(config_error("train runs one cell; use compare for several"));
            }
            cfg.variants.truncate(1);
            cfg.base_algos.truncate(1);
        }
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(out: &ExperimentOutput) {
    let mut keys: Vec<(Variant, BaseAlgo)> = out.rows.iter().map(|r| (r.variant, r.base_algo)).collect();
    keys.sort();
    keys.dedup();
    for (variant, algo) in keys {
        let last = out
            .rows
            .iter()
            .filter(|r| r.variant == variant && r.base_algo == algo)
            .map(|r| r.round)
            .max()
            .unwrap_or(0);
        let finals: Vec<f64> = out
            .rows
            .iter()
            .filter(|r| r.variant == variant && r.base_algo == algo && r.round == last)
            .map(|r| r.mean_return)
            .collect();
        let (mean, se) = mean_stderr(&finals);
        println!("{variant}/{algo}: round {last} mean return {mean:.4} ± {se:.4} over {} seeds", finals.len());
    }
    println!("wrote {}", out.metrics_path.display());
}

fn experiment(cfg: &ExperimentConfig, levels: &[f64], nested: bool) -> Result<(), Failure> {
    for &level in levels {
        let dir = if nested {
            cfg.out_dir.join(format!("level_{level}"))
        } else {
            cfg.out_dir.clone()
        };
        if nested {
            println!("level {level}:");
        }
        let out = run_experiment(cfg, level, &dir, ExecMode::available())?;
        print_summary(&out);
    }
    Ok(())
}

fn verify(all: bool) -> Result<(), Failure> {
    let quick = [1, 2, 3, 7];
    let mut failed = 0;
    for c in criteria().iter().filter(|c| all || quick.contains(&c.id)) {
        let report = run_criterion(c, ExecMode::available());
        println!("{report}");
        for line in &report.lines {
            println!("    {line}");
        }
        failed += usize::from(!report.passed);
    }
    if failed > 0 {
        return Err(Failure {
            code: EXIT_ACCEPTANCE,
            message: format!("{failed} acceptance criteria failed"),
        });
    }
    Ok(())
}

fn plotdata(common: &Common, metrics: Option<&Path>) -> Result<(), Failure> {
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let metrics = metrics.map(Path::to_path_buf).unwrap_or_else(|| out.join("metrics.csv"));
    for path in emit_plot_data(&metrics, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(c) => {
            let cfg = resolve(&c, true)?;
            exec::with_threads(c.threads, || experiment(&cfg, &[cfg.environment.level()], false))
        }
        Command::Compare(c) => {
            let cfg = resolve(&c, false)?;
            exec::with_threads(c.threads, || experiment(&cfg, &[cfg.environment.level()], false))
        }
        Command::Sweep(c) => {
            let cfg = resolve(&c, false)?;
            exec::with_threads(c.threads, || experiment(&cfg, &cfg.sweep_levels(), true))
        }
        Command::Verify { common, all } => exec::with_threads(common.threads, || verify(all)),
        Command::Plotdata { common, metrics } => plotdata(&common, metrics.as_deref()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
