use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fedrac::environments::EnvFamily;
use fedrac::exec::ExecMode;
use fedrac::federation::{BaseAlgo, Trainer, Variant};
use fedrac::harness::ExperimentConfig;
use fedrac::numerics::Architecture;

fn config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_environment(EnvFamily::chain(0.4));
    cfg.n_clients = 8;
    cfg.participants = 8;
    cfg.learner.batch_size = 256;
    cfg.learner.gamma = 0.9;
    cfg.eval_episodes = 2;
    cfg.actor = Architecture::TwoLayer { width: 64, radius: 10.0 };
    cfg.critic = Architecture::TwoLayer { width: 64, radius: 10.0 };
    cfg
}

/// Two federated rounds with every client participating.
fn rounds(c: &mut Criterion) {
    let cfg = config();
    let mut group = c.benchmark_group("two_rounds");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        for variant in Variant::ALL {
            let cell = cfg.cell(0, variant, BaseAlgo::FedAvg, 0.4, mode);
            group.bench_with_input(BenchmarkId::new(format!("{mode:?}"), variant), &cell, |b, cell| {
                b.iter(|| {
                    let mut t = Trainer::new(cell.clone()).unwrap();
                    t.step().unwrap();
                    t.step().unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, rounds);
criterion_main!(benches);
