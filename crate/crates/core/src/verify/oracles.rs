use super::Check;
use crate::analysis::{deterministic_policy, discounted_visitation, exact_policy_eval, value_iteration};
use crate::environments::{build_network, EnvFamily, HeterogeneityNetworkSpec, PerturbedChainMdp, TabularMdp};
use crate::error::Result;
use crate::numerics::Matrix;
use crate::rng::{stream, Purpose, StreamRng};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;

/// Chain clients plus fully random MDPs.
fn instances(seed: u64) -> Result<Vec<TabularMdp>> {
    let mut rng = stream(seed, Purpose::Test);
    let spec = HeterogeneityNetworkSpec {
        n_clients: 4,
        family: EnvFamily::chain(0.4),
        gamma: 0.9,
        data_counts: None,
    };
    let mut out: Vec<TabularMdp> = build_network(&spec, &mut rng)?
        .envs
        .iter()
        .filter_map(|e| e.tabular().cloned())
        .collect();
    for _ in 0..16 {
        let (ns, na) = (rng.random_range(2..9), rng.random_range(1..5));
        let p = PerturbedChainMdp::random_tensor(ns, na, &mut rng);
        let r = (0..ns * na).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mu = PerturbedChainMdp::random_tensor(ns, 1, &mut rng)[..ns].to_vec();
        let gamma = rng.random_range(0.5..0.99);
        out.push(TabularMdp::new(ns, na, p, r, mu, gamma)?);
    }
    Ok(out)
}

fn random_policy(mdp: &TabularMdp, rng: &mut StreamRng) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..mdp.n_states)
        .map(|_| PerturbedChainMdp::random_tensor(mdp.n_actions, 1, rng)[..mdp.n_actions].to_vec())
        .collect();
    Matrix::from_rows(&rows).expect("rectangular")
}

fn bellman_residual(seed: u64) -> Result<Check> {
    let mdps = instances(seed)?;
    let mut rng = stream(seed ^ 0x5eed, Purpose::Test);
    let mut worst: f64 = 0.0;
    for mdp in &mdps {
        for _ in 0..10 {
            let pi = random_policy(mdp, &mut rng);
            let (q, v) = exact_policy_eval(mdp, &pi)?;
            for s in 0..mdp.n_states {
                let mut vs = 0.0;
                for a in 0..mdp.n_actions {
                    let next: f64 = mdp.next_dist(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                    worst = worst.max((q[(s, a)] - mdp.reward(s, a) - mdp.gamma * next).abs());
                    vs += pi[(s, a)] * q[(s, a)];
                }
                worst = worst.max((vs - v[s]).abs());
            }
        }
    }
    Ok(Check::new(
        "exact policy evaluation Bellman residual",
        worst < 1e-10,
        format!("{} MDPs × 10 policies, max residual {worst:.2e}", mdps.len()),
    ))
}

/// `(1 − γ)ρ` is the law of the state at a Geometric(1 − γ) stopping time.
fn visitation_monte_carlo(seed: u64) -> Result<Check> {
    const ROLLOUTS: usize = 100_000;
    let mdps = instances(seed)?;
    let mut rng = stream(seed ^ 0x7157, Purpose::Test);
    let mut worst_z: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    let mut negative = false;
    for mdp in mdps.iter().take(6) {
        let pi = random_policy(mdp, &mut rng);
        let rho = discounted_visitation(mdp, &pi)?;
        negative |= rho.iter().any(|&r| r < 0.0);
        // residual of ρ − γ P_πᵀ ρ = μ
        for sp in 0..mdp.n_states {
            let mut inflow = 0.0;
            for s in 0..mdp.n_states {
                for a in 0..mdp.n_actions {
                    inflow += rho[s] * pi[(s, a)] * mdp.next_dist(s, a)[sp];
                }
            }
            worst_residual = worst_residual.max((rho[sp] - mdp.gamma * inflow - mdp.initial[sp]).abs());
        }
        let actions: Vec<WeightedIndex<f64>> = (0..mdp.n_states)
            .map(|s| WeightedIndex::new(pi.row(s)).expect("stochastic row"))
            .collect();
        let mut counts = vec![0usize; mdp.n_states];
        for _ in 0..ROLLOUTS {
            let mut s = mdp.sample_initial(&mut rng);
            while rng.random::<f64>() < mdp.gamma {
                let a = actions[s].sample(&mut rng);
                s = match mdp.step(s, a, &mut rng)?.next {
                    crate::environments::State::Discrete(n) => n,
                    _ => unreachable!("tabular step"),
                };
            }
            counts[s] += 1;
        }
        for (s, &c) in counts.iter().enumerate() {
            let p = (1.0 - mdp.gamma) * rho[s];
            let sd = (p * (1.0 - p) / ROLLOUTS as f64).sqrt();
            let freq = c as f64 / ROLLOUTS as f64;
            if sd > 0.0 {
                worst_z = worst_z.max((freq - p).abs() / sd);
            } else if c > 0 {
                worst_z = f64::INFINITY;
            }
        }
    }
    Ok(Check::new(
        "discounted visitation vs Monte Carlo",
        worst_z <= 3.0 && worst_residual < 1e-10 && !negative,
        format!("6 MDPs × {ROLLOUTS} rollouts, max |z| = {worst_z:.2}, linear-system residual {worst_residual:.2e}"),
    ))
}

fn greedy_stability(seed: u64) -> Result<Check> {
    let mdps = instances(seed)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for mdp in &mdps {
        let (_, pi) = value_iteration(mdp, 1e-12)?;
        let (q, v) = exact_policy_eval(mdp, &deterministic_policy(&pi, mdp.n_actions))?;
        for s in 0..mdp.n_states {
            let best = q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(best - v[s]);
        }
    }
    Ok(Check::new(
        "value-iteration greedy policy is improvement-stable",
        worst <= 1e-9,
        format!("{} MDPs, max one-step improvement {worst:.2e}", mdps.len()),
    ))
}

/// Exact tabular oracles checked against their defining equations and sampling.
pub fn oracle_suite(seed: u64) -> Vec<Check> {
    vec![
        Check::timed("exact policy evaluation Bellman residual", || bellman_residual(seed)),
        Check::timed("discounted visitation vs Monte Carlo", || visitation_monte_carlo(seed)),
        Check::timed("value-iteration greedy policy is improvement-stable", || greedy_stability(seed)),
    ]
}
