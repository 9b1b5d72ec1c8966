use crate::environments::{ClientEnv, TabularMdp};
use crate::error::{Error, Result};
use crate::numerics::{solve_linear, solve_linear_transposed, Matrix};
use crate::policies::{ActionDist, Policy};

/// Largest deterministic policy space enumerated by the brute-force search.
pub const MAX_ENUMERATION: usize = 1_000_000;

fn check_policy(mdp: &TabularMdp, pi: &Matrix) -> Result<()> {
    if pi.rows() != mdp.n_states || pi.cols() != mdp.n_actions {
        return Err(Error::invalid("policy", "table shape does not match the MDP"));
    }
    for s in 0..mdp.n_states {
        let row = pi.row(s);
        if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("policy", format!("row {s} is not a distribution")));
        }
    }
    Ok(())
}

/// Greedy one-hot table for a deterministic policy.
pub fn deterministic_policy(actions: &[usize], n_actions: usize) -> Matrix {
    let mut pi = Matrix::zeros(actions.len(), n_actions);
    for (s, &a) in actions.iter().enumerate() {
        pi[(s, a)] = 1.0;
    }
    pi
}

pub fn greedy(q: &Matrix) -> Vec<usize> {
    (0..q.rows())
        .map(|s| {
            let row = q.row(s);
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// `r(s,a) + γ Σ_{s′} P(s′|s,a) v(s′)`.
pub fn bellman_q(mdp: &TabularMdp, v: &[f64]) -> Matrix {
    let mut q = Matrix::zeros(mdp.n_states, mdp.n_actions);
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let next: f64 = mdp.next_dist(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
            q[(s, a)] = mdp.reward(s, a) + mdp.gamma * next;
        }
    }
    q
}

/// Optimal `Q*` to sup-norm Bellman residual below `tol`, and its greedy policy.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<(Matrix, Vec<usize>)> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let mut v = vec![0.0; mdp.n_states];
    loop {
        let q = bellman_q(mdp, &v);
        let next: Vec<f64> = (0..mdp.n_states)
            .map(|s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        // residual of the returned Q is at most γ·delta
        if mdp.gamma * delta < tol {
            let q = bellman_q(mdp, &v);
            let pi = greedy(&q);
            return Ok((q, pi));
        }
    }
}

/// `P_π` as a row-major `|S|×|S|` matrix and `r_π`.
fn policy_kernel(mdp: &TabularMdp, pi: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = mdp.n_states;
    let mut p = vec![0.0; n * n];
    let mut r = vec![0.0; n];
    for s in 0..n {
        for a in 0..mdp.n_actions {
            let w = pi[(s, a)];
            if w == 0.0 {
                continue;
            }
            r[s] += w * mdp.reward(s, a);
            for (sp, &pr) in mdp.next_dist(s, a).iter().enumerate() {
                p[s * n + sp] += w * pr;
            }
        }
    }
    (p, r)
}

/// Exact `(Q^π, V^π)` from `(I − γP_π)V = r_π`.
pub fn exact_policy_eval(mdp: &TabularMdp, pi: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    check_policy(mdp, pi)?;
    let n = mdp.n_states;
    let (p, r) = policy_kernel(mdp, pi);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = f64::from(u8::from(i == j)) - mdp.gamma * p[i * n + j];
        }
    }
    let v = solve_linear(&a, n, &r)?;
    Ok((bellman_q(mdp, &v), v))
}

/// Unnormalized discounted occupancy `ρ(s) = Σ_t γᵗ Pr(s_t = s)` from μ.
pub fn discounted_visitation(mdp: &TabularMdp, pi: &Matrix) -> Result<Vec<f64>> {
    check_policy(mdp, pi)?;
    let n = mdp.n_states;
    let (p, _) = policy_kernel(mdp, pi);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = f64::from(u8::from(i == j)) - mdp.gamma * p[i * n + j];
        }
    }
    let rho = solve_linear_transposed(&a, n, &mdp.initial)?;
    Ok(rho.into_iter().map(|x| x.max(0.0)).collect())
}

/// `Σ_n q_n E_{s₀~μ} V^π_n(s₀)`.
pub fn federated_objective(mdps: &[&TabularMdp], q: &[f64], pi: &Matrix) -> Result<f64> {
    let mut total = 0.0;
    for (mdp, &w) in mdps.iter().zip(q) {
        let (_, v) = exact_policy_eval(mdp, pi)?;
        total += w * v.iter().zip(&mdp.initial).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedOptimum {
    pub actions: Vec<usize>,
    pub objective: f64,
}

impl FedOptimum {
    pub fn table(&self, n_actions: usize) -> Matrix {
        deterministic_policy(&self.actions, n_actions)
    }
}

/// Best deterministic policy for the weighted federated objective, by
/// exhaustive enumeration. Ties keep the first policy in lexicographic order.
pub fn brute_force_fed_optimum(mdps: &[&TabularMdp], q: &[f64]) -> Result<FedOptimum> {
    let first = mdps.first().ok_or_else(|| Error::invalid("mdps", "need at least one client"))?;
    if q.len() != mdps.len() {
        return Err(Error::Dimension {
            expected: mdps.len(),
            got: q.len(),
        });
    }
    let (ns, na) = (first.n_states, first.n_actions);
    if mdps.iter().any(|m| m.n_states != ns || m.n_actions != na) {
        return Err(Error::invalid("mdps", "clients must share state and action spaces"));
    }
    let count = (na as f64).powi(ns as i32);
    if count > MAX_ENUMERATION as f64 {
        return Err(Error::invalid("mdps", format!("{count} deterministic policies exceed the enumeration limit")));
    }
    let mut actions = vec![0usize; ns];
    let mut best: Option<FedOptimum> = None;
    loop {
        let value = federated_objective(mdps, q, &deterministic_policy(&actions, na))?;
        if best.as_ref().is_none_or(|b| value > b.objective) {
            best = Some(FedOptimum {
                actions: actions.clone(),
                objective: value,
            });
        }
        // odometer increment, last state fastest
        let mut i = ns;
        loop {
            if i == 0 {
                return Ok(best.expect("at least one policy"));
            }
            i -= 1;
            actions[i] += 1;
            if actions[i] < na {
                break;
            }
            actions[i] = 0;
        }
    }
}

/// Per-state action distribution of a Softmax policy on a tabular client.
pub fn policy_table(policy: &Policy, env: &ClientEnv) -> Result<Matrix> {
    let mdp = env.tabular().ok_or_else(|| Error::invalid("env", "not a tabular environment"))?;
    let mut rows = Vec::with_capacity(mdp.n_states);
    for s in 0..mdp.n_states {
        let x = env.policy_input(&crate::environments::State::Discrete(s))?;
        match policy.dist(&x)? {
            ActionDist::Categorical(p) => rows.push(p),
            ActionDist::Normal { .. } => {
                return Err(Error::invalid("policy", "tabular tables need a Softmax policy"));
            }
        }
    }
    Matrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::PerturbedChainMdp;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn random_mdp(ns: usize, na: usize, gamma: f64, seed: u64) -> TabularMdp {
        let mut rng = stream(seed, Purpose::Test);
        let p = PerturbedChainMdp::random_tensor(ns, na, &mut rng);
        let r: Vec<f64> = (0..ns * na).map(|_| rng.random_range(-1.0..1.0)).collect();
        TabularMdp::new(ns, na, p, r, vec![1.0 / ns as f64; ns], gamma).unwrap()
    }

    fn uniform(ns: usize, na: usize) -> Matrix {
        Matrix::from_vec(ns, na, vec![1.0 / na as f64; ns * na]).unwrap()
    }

    #[test]
    fn single_state_geometric_series() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![1.0], vec![1.0], 0.9).unwrap();
        let (q, pi) = value_iteration(&mdp, 1e-12).unwrap();
        assert!((q[(0, 0)] - 10.0).abs() < 1e-10);
        assert_eq!(pi, vec![0]);
        let (q, v) = exact_policy_eval(&mdp, &uniform(1, 1)).unwrap();
        assert!((q[(0, 0)] - 10.0).abs() < 1e-12 && (v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn two_state_chain_matches_unrolled_sum() {
        // state 0 moves to 1 (reward 0), state 1 absorbs (reward 1)
        let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0], 0.5).unwrap();
        let (q, _) = value_iteration(&mdp, 1e-13).unwrap();
        let (mut v0, mut v1, mut w) = (0.0, 0.0, 1.0);
        let mut s = 0;
        for _ in 0..50 {
            v0 += w * if s == 0 { 0.0 } else { 1.0 };
            s = 1;
            w *= 0.5;
        }
        let mut w = 1.0;
        for _ in 0..50 {
            v1 += w;
            w *= 0.5;
        }
        assert!((q[(0, 0)] - v0).abs() < 1e-9);
        assert!((q[(1, 0)] - v1).abs() < 1e-9);
    }

    #[test]
    fn greedy_policy_is_improvement_stable() {
        for seed in 0..5 {
            let mdp = random_mdp(5, 3, 0.9, seed);
            let (_, pi) = value_iteration(&mdp, 1e-12).unwrap();
            let (q, _) = exact_policy_eval(&mdp, &deterministic_policy(&pi, 3)).unwrap();
            let improved = greedy(&q);
            for s in 0..5 {
                assert!(q[(s, improved[s])] - q[(s, pi[s])] < 1e-9);
            }
        }
    }

    #[test]
    fn zero_reward_gives_zero_values() {
        let mut rng = stream(1, Purpose::Test);
        let p = PerturbedChainMdp::random_tensor(4, 2, &mut rng);
        let mdp = TabularMdp::new(4, 2, p, vec![0.0; 8], vec![0.25; 4], 0.9).unwrap();
        let (q, v) = exact_policy_eval(&mdp, &uniform(4, 2)).unwrap();
        assert!(q.as_slice().iter().all(|&x| x == 0.0));
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn policy_eval_matches_fixed_point_iteration() {
        let mdp = random_mdp(4, 3, 0.9, 2);
        let mut rng = stream(3, Purpose::Test);
        let mut pi = Matrix::zeros(4, 3);
        for s in 0..4 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
            let z: f64 = w.iter().sum();
            for a in 0..3 {
                pi[(s, a)] = w[a] / z;
            }
        }
        let (q, v) = exact_policy_eval(&mdp, &pi).unwrap();
        let (p, r) = policy_kernel(&mdp, &pi);
        let mut it = vec![0.0; 4];
        for _ in 0..1_000 {
            it = (0..4)
                .map(|s| r[s] + 0.9 * (0..4).map(|j| p[s * 4 + j] * it[j]).sum::<f64>())
                .collect();
        }
        for s in 0..4 {
            assert!((v[s] - it[s]).abs() < 1e-8);
        }
        let back = bellman_q(&mdp, &v);
        for (a, b) in back.as_slice().iter().zip(q.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_states_have_equal_values() {
        // two mirror states swapping each other with equal rewards
        let mdp = TabularMdp::new(
            2,
            2,
            vec![0.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.5, 0.5],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.5, 0.5],
            0.8,
        )
        .unwrap();
        let (_, v) = exact_policy_eval(&mdp, &uniform(2, 2)).unwrap();
        assert!((v[0] - v[1]).abs() < 1e-12);
    }

    #[test]
    fn absorbing_state_visitation() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![0.0], vec![1.0], 0.9).unwrap();
        let rho = discounted_visitation(&mdp, &uniform(1, 1)).unwrap();
        assert!((rho[0] - 10.0).abs() < 1e-10);
    }

    #[test]
    fn visitation_normalizes() {
        for seed in 10..15 {
            let mdp = random_mdp(6, 3, 0.95, seed);
            let rho = discounted_visitation(&mdp, &uniform(6, 3)).unwrap();
            let total: f64 = rho.iter().map(|r| (1.0 - 0.95) * r).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(rho.iter().all(|&r| r >= 0.0));
        }
    }

    #[test]
    fn single_client_optimum_matches_value_iteration() {
        let mdp = random_mdp(4, 3, 0.9, 20);
        let best = brute_force_fed_optimum(&[&mdp], &[1.0]).unwrap();
        let (_, pi) = value_iteration(&mdp, 1e-12).unwrap();
        let vi = federated_objective(&[&mdp], &[1.0], &deterministic_policy(&pi, 3)).unwrap();
        assert!((best.objective - vi).abs() < 1e-9);
        let twice = brute_force_fed_optimum(&[&mdp, &mdp], &[0.5, 0.5]).unwrap();
        assert!((twice.objective - best.objective).abs() < 1e-12);
    }

    #[test]
    fn heterogeneous_optimum_beats_every_policy() {
        let a = random_mdp(4, 2, 0.9, 21);
        let b = random_mdp(4, 2, 0.9, 22);
        let q = [0.3, 0.7];
        let best = brute_force_fed_optimum(&[&a, &b], &q).unwrap();
        for code in 0..16usize {
            let acts: Vec<usize> = (0..4).map(|s| (code >> (3 - s)) & 1).collect();
            let v = federated_objective(&[&a, &b], &q, &deterministic_policy(&acts, 2)).unwrap();
            assert!(v <= best.objective + 1e-12);
        }
    }

    #[test]
    fn rejects_oversized_enumeration() {
        let mdp = random_mdp(13, 3, 0.9, 23);
        assert!(brute_force_fed_optimum(&[&mdp], &[1.0]).is_err());
    }
}
