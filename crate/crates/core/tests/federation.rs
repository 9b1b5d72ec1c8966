use fedrac::analysis::{exact_policy_eval, policy_table};
use fedrac::environments::{build_network, EnvFamily, HeterogeneityNetworkSpec, State};
use fedrac::exec::ExecMode;
use fedrac::federation::{run_training, sample_clients, BaseAlgo, TrainingConfig, Trainer, Variant};
use fedrac::learners::{collect_rollout, make_policy, train_actor, ActorMode, Correction, LearnerConfig};
use fedrac::numerics::Architecture;
use fedrac::policies::{Action, Policy, ScheduleSet};
use fedrac::rng::{stream, Purpose};

fn chain_cfg(variant: Variant, algo: BaseAlgo, eps: f64) -> TrainingConfig {
    TrainingConfig {
        network: HeterogeneityNetworkSpec {
            n_clients: 5,
            family: EnvFamily::chain(eps),
            gamma: 0.9,
            data_counts: Some(vec![1.0, 2.0, 3.0, 1.0, 2.0]),
        },
        participants: 3,
        rounds: 3,
        variant,
        base_algo: algo,
        learner: LearnerConfig {
            lr: 0.5,
            batch_size: 128,
            minibatch: 32,
            epochs: 3,
            gamma: 0.9,
            ..LearnerConfig::default()
        },
        schedule: ScheduleSet::default(),
        actor: Architecture::TwoLayer { width: 32, radius: 5.0 },
        critic: Architecture::TwoLayer { width: 32, radius: 5.0 },
        eval_episodes: 2,
        diagnostics: true,
        seed: 11,
        exec: ExecMode::Sequential,
    }
}

fn car_cfg(variant: Variant) -> TrainingConfig {
    TrainingConfig {
        network: HeterogeneityNetworkSpec {
            n_clients: 4,
            family: EnvFamily::car(1.0),
            gamma: 0.99,
            data_counts: None,
        },
        participants: 2,
        rounds: 2,
        variant,
        base_algo: BaseAlgo::FedAvg,
        learner: LearnerConfig {
            lr: 0.1,
            batch_size: 256,
            minibatch: 64,
            epochs: 2,
            ..LearnerConfig::default()
        },
        schedule: ScheduleSet::default(),
        actor: Architecture::TwoLayer { width: 16, radius: 5.0 },
        critic: Architecture::Stacked { hidden: vec![16, 16], radius: 5.0 },
        eval_episodes: 1,
        diagnostics: true,
        seed: 3,
        exec: ExecMode::Sequential,
    }
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    for variant in Variant::ALL {
        let mut cfg = chain_cfg(variant, BaseAlgo::FedAvg, 0.3);
        cfg.learner.lr = 0.0;
        let start = Trainer::new(cfg.clone()).unwrap();
        let (actor0, critic0) = (start.state().actor.clone(), start.state().critic.clone());
        let (state, reports) = run_training(cfg, |_| Ok(())).unwrap();
        assert_eq!(reports.len(), 3);
        assert_close(state.actor.params(), actor0.params(), 1e-15);
        assert_close(state.critic.params(), critic0.params(), 1e-15);
    }
}

#[test]
fn zero_rounds_gives_no_reports() {
    let mut cfg = chain_cfg(Variant::FedRac, BaseAlgo::FedAvg, 0.0);
    cfg.rounds = 0;
    let (state, reports) = run_training(cfg, |_| Ok(())).unwrap();
    assert!(reports.is_empty());
    assert_eq!(state.round, 0);
    assert_eq!(state.actor.params(), state.actor.init_params());
}

#[test]
fn order_contract_holds_every_round() {
    for variant in Variant::ALL {
        for algo in BaseAlgo::ALL {
            let (_, reports) = run_training(chain_cfg(variant, algo, 0.3), |_| Ok(())).unwrap();
            for r in &reports {
                assert_eq!(r.clients.len(), 3);
                for c in &r.clients {
                    assert!(c.order.holds_for(variant), "{variant}/{algo} round {}: {:?}", r.round, c.order);
                    assert!(c.order.critic_moved);
                    match variant {
                        Variant::FedRac => assert!(!c.order.actor_values_from_local),
                        Variant::Baseline => assert!(!c.order.actor_values_from_global),
                    }
                }
            }
        }
    }
    let (_, reports) = run_training(car_cfg(Variant::FedRac), |_| Ok(())).unwrap();
    assert!(reports.iter().flat_map(|r| &r.clients).all(|c| c.order.holds_for(Variant::FedRac)));
}

#[test]
fn first_round_rollouts_match_across_variants() {
    let digests = |variant| {
        let mut t = Trainer::new(chain_cfg(variant, BaseAlgo::FedAvg, 0.0)).unwrap();
        let r = t.step().unwrap();
        (r.participants.clone(), r.clients.iter().map(|c| c.rollout_digest).collect::<Vec<_>>())
    };
    assert_eq!(digests(Variant::Baseline), digests(Variant::FedRac));
}

#[test]
fn exec_mode_does_not_change_results() {
    for cfg in [chain_cfg(Variant::Baseline, BaseAlgo::Scaffold, 0.4), car_cfg(Variant::FedRac)] {
        let mut par = cfg.clone();
        par.exec = ExecMode::Parallel;
        let (s1, r1) = run_training(cfg, |_| Ok(())).unwrap();
        let (s2, r2) = fedrac::exec::with_threads(Some(3), || run_training(par, |_| Ok(()))).unwrap();
        assert_eq!(s1.actor.params(), s2.actor.params());
        assert_eq!(s1.critic.params(), s2.critic.params());
        for (a, b) in r1.iter().zip(&r2) {
            assert_eq!(a.mean_return.to_bits(), b.mean_return.to_bits());
            assert_eq!(a.participants, b.participants);
            assert_eq!(a.diagnostics, b.diagnostics);
        }
    }
}

#[test]
fn sample_clients_edge_cases() {
    let mut rng = stream(1, Purpose::Sampling);
    assert_eq!(sample_clients(4, 4, &mut rng).unwrap(), vec![0, 1, 2, 3]);
    assert_eq!(sample_clients(1, 1, &mut rng).unwrap(), vec![0]);
    assert!(sample_clients(3, 4, &mut rng).is_err());
    assert!(sample_clients(3, 0, &mut rng).is_err());
    for _ in 0..100 {
        let ids = sample_clients(10, 4, &mut rng).unwrap();
        assert_eq!(ids.len(), 4);
        assert!(ids.windows(2).all(|w| w[0] < w[1]) && ids[3] < 10);
    }
}

#[test]
fn zero_controls_and_zero_prox_reduce_to_fedavg() {
    let first_round = |algo, mu| {
        let mut cfg = chain_cfg(Variant::FedRac, algo, 0.3);
        cfg.learner.fedprox_mu = mu;
        let mut t = Trainer::new(cfg).unwrap();
        t.step().unwrap();
        (t.state().actor.params().to_vec(), t.state().critic.params().to_vec())
    };
    let avg = first_round(BaseAlgo::FedAvg, 0.01);
    assert_eq!(first_round(BaseAlgo::Scaffold, 0.01), avg);
    assert_eq!(first_round(BaseAlgo::FedProx, 0.0), avg);
    assert_ne!(first_round(BaseAlgo::FedProx, 1.0), avg);
}

#[test]
fn divergence_is_reported() {
    let mut cfg = car_cfg(Variant::Baseline);
    if let EnvFamily::Car { dynamics, .. } = &mut cfg.network.family {
        dynamics.action_cost = f64::MAX;
    }
    let err = run_training(cfg, |_| Ok(())).unwrap_err();
    assert!(err.is_divergence(), "{err}");
}

/// With exact `Q` as the target, the MSE actor approaches
/// `π_old·exp(Q/β)` renormalized on the states it saw.
#[test]
fn mse_actor_tracks_the_closed_form_target() {
    let spec = HeterogeneityNetworkSpec {
        n_clients: 1,
        family: EnvFamily::chain(0.3),
        gamma: 0.9,
        data_counts: None,
    };
    let env = build_network(&spec, &mut stream(5, Purpose::Network)).unwrap().envs.remove(0);
    let mdp = env.tabular().unwrap().clone();
    let net = Architecture::TwoLayer { width: 512, radius: 100.0 }
        .build(env.actor_dim(), &mut stream(5, Purpose::Init))
        .unwrap();
    let schedule = ScheduleSet::default();
    let old = make_policy(net, &env, &schedule, 0).unwrap();
    let (q, _) = exact_policy_eval(&mdp, &policy_table(&old, &env).unwrap()).unwrap();
    let mut batch = collect_rollout(&env, &old, 2048, &mut stream(5, Purpose::Rollout)).unwrap();
    batch.returns = batch
        .states
        .iter()
        .zip(&batch.actions)
        .map(|(s, a)| match (s, a) {
            (State::Discrete(s), Action::Discrete(a)) => q[(*s, *a)],
            _ => unreachable!(),
        })
        .collect();
    let beta = 2.0;
    let cfg = LearnerConfig {
        lr: 2.0,
        epochs: 60,
        minibatch: 64,
        actor_mode: ActorMode::MseRegression,
        ..LearnerConfig::default()
    };
    let up = train_actor(&old, &batch, &cfg, beta, 2.0, &Correction::NONE, &mut stream(5, Purpose::ActorUpdate)).unwrap();
    let new = old.with_net(up.update.net);
    let (before, after) = (policy_table(&old, &env).unwrap(), policy_table(&new, &env).unwrap());
    let Policy::Softmax(_) = &new else { panic!("chain policies are softmax") };
    for s in 0..mdp.n_states {
        let w: Vec<f64> = (0..mdp.n_actions).map(|a| before[(s, a)] * (q[(s, a)] / beta).exp()).collect();
        let z: f64 = w.iter().sum();
        let tv: f64 = (0..mdp.n_actions).map(|a| (after[(s, a)] - w[a] / z).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.05, "state {s}: total variation {tv}");
    }
}
