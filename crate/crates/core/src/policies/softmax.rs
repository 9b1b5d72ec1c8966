use super::divergence::logsumexp;
use crate::error::{Error, Result};
use crate::numerics::Network;
use rand::Rng;

/// `π(a|s) ∝ exp(f(s,a)/τ)` over a finite action set.
///
/// The network sees the concatenation of a state code and an action code.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    pub net: Network,
    pub action_codes: Vec<Vec<f64>>,
    pub temperature: f64,
}

/// Max-shifted `e/τ − logsumexp(e/τ)`.
pub fn softmax_log_probs(energies: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = energies.iter().map(|e| e / temperature).collect();
    let lse = logsumexp(&scaled);
    scaled.into_iter().map(|x| x - lse).collect()
}

impl SoftmaxPolicy {
    pub fn new(net: Network, action_codes: Vec<Vec<f64>>, temperature: f64) -> Result<Self> {
        if action_codes.is_empty() {
            return Err(Error::invalid("action_set", "must not be empty"));
        }
        if !(temperature > 0.0) {
            return Err(Error::invalid("temperature", format!("must be positive, got {temperature}")));
        }
        let code_len = action_codes[0].len();
        if action_codes.iter().any(|c| c.len() != code_len) {
            return Err(Error::invalid("action_set", "action codes differ in length"));
        }
        Ok(Self {
            net,
            action_codes,
            temperature,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.action_codes.len()
    }

    fn input(&self, state: &[f64], action: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(state);
        buf.extend_from_slice(&self.action_codes[action]);
    }

    fn check(&self, state: &[f64]) -> Result<()> {
        let expected = self.net.input_dim();
        let got = state.len() + self.action_codes[0].len();
        if expected != got {
            return Err(Error::Dimension { expected, got });
        }
        Ok(())
    }

    /// `f(s, a)` for every action.
    pub fn energies(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check(state)?;
        let mut buf = Vec::with_capacity(self.net.input_dim());
        Ok((0..self.n_actions())
            .map(|a| {
                self.input(state, a, &mut buf);
                self.net.eval(&buf)
            })
            .collect())
    }

    pub fn log_probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax_log_probs(&self.energies(state)?, self.temperature))
    }

    pub fn probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.log_probs(state)?.into_iter().map(f64::exp).collect())
    }

    /// Inverse-CDF categorical draw.
    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<usize> {
        let probs = self.probs(state)?;
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (a, p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return Ok(a);
            }
        }
        Ok(probs.len() - 1)
    }

    /// ∇ log π(a|s) = τ⁻¹(∇f(s,a) − Σ_b π(b|s) ∇f(s,b)).
    pub(crate) fn accumulate_grad_log_prob(&self, state: &[f64], action: usize, scale: f64, out: &mut [f64]) {
        let probs = match self.probs(state) {
            Ok(p) => p,
            Err(_) => return,
        };
        let c = scale / self.temperature;
        let mut buf = Vec::with_capacity(self.net.input_dim());
        for (b, p) in probs.iter().enumerate() {
            let w = if b == action { 1.0 - p } else { -p };
            if w != 0.0 {
                self.input(state, b, &mut buf);
                self.net.accumulate_gradient(&buf, c * w, out);
            }
        }
    }

    /// ∂KL(π‖q)/∂e_b = τ⁻¹ π_b (log π_b − log q_b − KL), chained through ∇f.
    pub(crate) fn accumulate_grad_kl(&self, state: &[f64], q: &[f64], scale: f64, out: &mut [f64]) -> f64 {
        let lp = match self.log_probs(state) {
            Ok(lp) => lp,
            Err(_) => return 0.0,
        };
        let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        let log_ratio: Vec<f64> = lp
            .iter()
            .zip(q)
            .map(|(l, qb)| l - qb.max(f64::MIN_POSITIVE).ln())
            .collect();
        let kl: f64 = probs.iter().zip(&log_ratio).map(|(p, r)| p * r).sum();
        let c = scale / self.temperature;
        let mut buf = Vec::with_capacity(self.net.input_dim());
        for b in 0..self.n_actions() {
            let w = probs[b] * (log_ratio[b] - kl);
            if w != 0.0 {
                self.input(state, b, &mut buf);
                self.net.accumulate_gradient(&buf, c * w, out);
            }
        }
        kl
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::NetworkParams;
    use crate::rng::{stream, Purpose};

    fn policy(seed: u64, tau: f64) -> SoftmaxPolicy {
        let mut rng = stream(seed, Purpose::Test);
        let net = NetworkParams::init(16, 5, 3.0, &mut rng).unwrap();
        let w: Vec<f64> = net.weights().as_slice().iter().map(|w| w + 0.3 * rng.random::<f64>()).collect();
        let net = Network::TwoLayer(net.with_weights(w).unwrap());
        let codes = (0..3)
            .map(|a| (0..3).map(|b| if a == b { 0.4 } else { 0.0 }).collect())
            .collect();
        SoftmaxPolicy::new(net, codes, tau).unwrap()
    }

    #[test]
    fn uniform_when_energies_equal() {
        let lp = softmax_log_probs(&[0.7; 4], 1.3);
        for l in lp {
            assert!((l - (0.25f64).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn analytic_two_action_case() {
        let p: Vec<f64> = softmax_log_probs(&[0.0, 2f64.ln()], 1.0).into_iter().map(f64::exp).collect();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_energies_stay_finite() {
        // exact values: log(1 + e^-2000) rounds to 0 in any precision we can store
        let lp = softmax_log_probs(&[1000.0, -1000.0], 1.0);
        assert!(lp.iter().all(|l| l.is_finite()));
        assert!(lp[0].abs() < 1e-10);
        assert!((lp[1] + 2000.0).abs() < 1e-10);
        let lp = softmax_log_probs(&[1000.0, 999.0], 1.0);
        // log(1/(1+e^-1)) and log(e^-1/(1+e^-1)) computed with mpmath at 50 digits
        assert!((lp[0] - (-0.31326168751822283)).abs() < 1e-10);
        assert!((lp[1] - (-1.3132616875182228)).abs() < 1e-10);
    }

    #[test]
    fn probabilities_normalize_and_shift_invariant() {
        let p = policy(31, 0.7);
        let s = [0.1, -0.2];
        let probs = p.probs(&s).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let e = p.energies(&s).unwrap();
        let shifted: Vec<f64> = e.iter().map(|x| x + 12.5).collect();
        let a: Vec<f64> = softmax_log_probs(&e, 0.7).into_iter().map(f64::exp).collect();
        let b: Vec<f64> = softmax_log_probs(&shifted, 0.7).into_iter().map(f64::exp).collect();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_construction() {
        let p = policy(32, 1.0);
        assert!(SoftmaxPolicy::new(p.net.clone(), vec![], 1.0).is_err());
        assert!(SoftmaxPolicy::new(p.net.clone(), p.action_codes.clone(), 0.0).is_err());
    }

    #[test]
    fn single_action_always_sampled() {
        let mut rng = stream(33, Purpose::Test);
        let net = Network::TwoLayer(NetworkParams::init(4, 3, 1.0, &mut rng).unwrap());
        let p = SoftmaxPolicy::new(net, vec![vec![0.5]], 1.0).unwrap();
        for _ in 0..100 {
            assert_eq!(p.sample(&[0.1, 0.2], &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn weighted_sampling_matches_probabilities() {
        let init = crate::numerics::Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let net = Network::TwoLayer(NetworkParams::from_parts(init, vec![1.0], 1.0).unwrap());
        // empty state code, action codes are the energies (0, ln 2)
        let p = SoftmaxPolicy::new(net, vec![vec![0.0], vec![2f64.ln()]], 1.0).unwrap();
        let probs = p.probs(&[]).unwrap();
        assert!((probs[1] - 2.0 / 3.0).abs() < 1e-15);
        let mut rng = stream(35, Purpose::Test);
        let n = 100_000;
        let hits = (0..n).filter(|_| p.sample(&[], &mut rng).unwrap() == 1).count();
        let sd = (2.0 / 9.0 / n as f64).sqrt();
        assert!(((hits as f64 / n as f64) - 2.0 / 3.0).abs() < 3.0 * sd);
    }

    #[test]
    fn grad_log_prob_matches_finite_differences() {
        let p = policy(36, 0.8);
        let s = [0.2, -0.3];
        let n = p.net.num_params();
        for a in 0..3 {
            let mut g = vec![0.0; n];
            p.accumulate_grad_log_prob(&s, a, 1.0, &mut g);
            let h = 1e-6;
            for k in (0..n).step_by(7) {
                let mut up = p.net.params().to_vec();
                up[k] += h;
                let mut down = p.net.params().to_vec();
                down[k] -= h;
                let lp = |w: Vec<f64>| {
                    let q = SoftmaxPolicy { net: p.net.with_params(w).unwrap(), ..p.clone() };
                    q.log_probs(&s).unwrap()[a]
                };
                let fd = (lp(up) - lp(down)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6, "k={k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn grad_kl_matches_finite_differences() {
        let p = policy(37, 1.2);
        let s = [0.25, 0.1];
        let q = [0.2, 0.5, 0.3];
        let n = p.net.num_params();
        let mut g = vec![0.0; n];
        p.accumulate_grad_kl(&s, &q, 1.0, &mut g);
        let kl = |w: Vec<f64>| {
            let pp = SoftmaxPolicy { net: p.net.with_params(w).unwrap(), ..p.clone() };
            let probs = pp.probs(&s).unwrap();
            probs.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum::<f64>()
        };
        let h = 1e-6;
        for k in (0..n).step_by(5) {
            let mut up = p.net.params().to_vec();
            up[k] += h;
            let mut down = p.net.params().to_vec();
            down[k] -= h;
            let fd = (kl(up) - kl(down)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6);
        }
    }
}
