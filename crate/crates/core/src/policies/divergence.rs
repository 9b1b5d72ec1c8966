use super::gaussian::gaussian_log_density;
use super::Policy;
use crate::error::Result;

/// A policy's action distribution at one state.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionDist {
    Categorical(Vec<f64>),
    Normal { mean: f64, std: f64 },
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// KL(p ‖ q). Categorical mass on q-null actions gives `+∞`.
pub fn kl_divergence(p: &ActionDist, q: &ActionDist) -> Result<f64> {
    match (p, q) {
        (ActionDist::Categorical(p), ActionDist::Categorical(q)) => {
            if p.len() != q.len() {
                return Err(crate::Error::Dimension {
                    expected: p.len(),
                    got: q.len(),
                });
            }
            let mut kl = 0.0;
            for (&pa, &qa) in p.iter().zip(q) {
                if pa == 0.0 {
                    continue;
                }
                if qa == 0.0 {
                    return Ok(f64::INFINITY);
                }
                kl += pa * (pa / qa).ln();
            }
            Ok(kl.max(0.0))
        }
        (ActionDist::Normal { mean: m1, std: s1 }, ActionDist::Normal { mean: m2, std: s2 }) => {
            if !(*s1 > 0.0 && *s2 > 0.0) {
                return Err(crate::Error::invalid("stddev", "must be positive"));
            }
            let d2 = (m1 - m2).powi(2);
            if s1 == s2 {
                Ok(d2 / (2.0 * s1 * s1))
            } else {
                Ok(((s2 / s1).ln() + (s1 * s1 + d2) / (2.0 * s2 * s2) - 0.5).max(0.0))
            }
        }
        _ => Err(crate::Error::invalid("distribution", "mismatched action supports")),
    }
}

/// Mean over `states` of `maxₐ (log π_new(a|s) − log π_old(a|s))²`.
///
/// Exact for Softmax. For Gaussians the sup is taken on a 201-point grid over
/// `[μ_old(s) − 4σ_old, μ_old(s) + 4σ_old]`, since the log-ratio of two
/// Gaussians is unbounded over the whole real line.
pub fn stepwise_logratio_supnorm(new: &Policy, old: &Policy, states: &[Vec<f64>]) -> Result<f64> {
    if states.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in states {
        let worst = match (new.dist(s)?, old.dist(s)?) {
            (ActionDist::Categorical(p), ActionDist::Categorical(q)) => p
                .iter()
                .zip(&q)
                .map(|(a, b)| (a.ln() - b.ln()).powi(2))
                .fold(0.0, f64::max),
            (ActionDist::Normal { mean: m1, std: s1 }, ActionDist::Normal { mean: m0, std: s0 }) => {
                (0..201)
                    .map(|i| {
                        let a = m0 - 4.0 * s0 + 8.0 * s0 * i as f64 / 200.0;
                        (gaussian_log_density(a, m1, s1) - gaussian_log_density(a, m0, s0)).powi(2)
                    })
                    .fold(0.0, f64::max)
            }
            _ => return Err(crate::Error::invalid("policy", "policies differ in action space")),
        };
        total += worst;
    }
    Ok(total / states.len() as f64)
}

/// Both sides of the Gaussian second-order expansion bound for one tuple
/// `(a, f⁰, fᵗ, fᵗ⁺¹, σ_t, σ_{t+1}, X)` with `υ = σ²/(a − f⁰)`.
///
/// Returns `(lhs, rhs)`; the bound asserts `lhs ≤ rhs`.
pub fn gaussian_taylor_sides(
    a: f64,
    f0: f64,
    ft: f64,
    ft1: f64,
    sigma_t: f64,
    sigma_t1: f64,
    x: f64,
) -> (f64, f64) {
    let (vt, vt1) = (sigma_t * sigma_t, sigma_t1 * sigma_t1);
    let lhs = (-(a - ft1).powi(2) / (2.0 * vt1) - sigma_t1.ln() - x + (a - ft).powi(2) / (2.0 * vt)
        + sigma_t.ln())
    .powi(2);
    let upsilon_t = vt / (a - f0);
    let upsilon_t1 = vt1 / (a - f0);
    let first = (ft1 / upsilon_t1 - ft / upsilon_t - x).powi(2);
    let second = ((sigma_t / sigma_t1).ln() + 0.5 * (1.0 / vt1 - 1.0 / vt) * (f0 * f0 - a * a)).powi(2);
    let third = ((ft - f0).powi(2) / (2.0 * vt) - (ft1 - f0).powi(2) / (2.0 * vt1)).powi(2);
    (lhs, 3.0 * (first + second + third))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Network, NetworkParams};
    use crate::policies::{softmax_log_probs, SoftmaxPolicy};
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn kl_basic_values() {
        let p = ActionDist::Categorical(vec![0.3, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let a = ActionDist::Categorical(vec![1.0, 0.0]);
        let b = ActionDist::Categorical(vec![0.5, 0.5]);
        assert!((kl_divergence(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&b, &a).unwrap(), f64::INFINITY);
        let g = ActionDist::Normal { mean: 0.4, std: 0.9 };
        assert_eq!(kl_divergence(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_kl_matches_quadrature() {
        let cases = [(0.0, 1.0, 0.5, 1.0), (0.3, 0.6, -0.2, 1.4), (1.0, 2.0, 0.0, 0.8)];
        for (m1, s1, m2, s2) in cases {
            let closed = kl_divergence(
                &ActionDist::Normal { mean: m1, std: s1 },
                &ActionDist::Normal { mean: m2, std: s2 },
            )
            .unwrap();
            let (lo, hi) = (m1 - 12.0 * s1, m1 + 12.0 * s1);
            let n = 40_000;
            let h = (hi - lo) / n as f64;
            let mut total = 0.0;
            for i in 0..=n {
                let a = lo + i as f64 * h;
                let lp = gaussian_log_density(a, m1, s1);
                let lq = gaussian_log_density(a, m2, s2);
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                total += w * lp.exp() * (lp - lq);
            }
            let numeric = total * h / 3.0;
            assert!((closed - numeric).abs() < 1e-6, "{closed} vs {numeric}");
        }
    }

    #[test]
    fn pinsker_on_random_pairs() {
        let mut rng = stream(51, Purpose::Test);
        for _ in 0..1000 {
            let n = rng.random_range(2..8);
            let p = random_simplex(n, &mut rng);
            let q = random_simplex(n, &mut rng);
            let kl = kl_divergence(&ActionDist::Categorical(p.clone()), &ActionDist::Categorical(q.clone()))
                .unwrap();
            assert!(l1_distance(&p, &q).powi(2) <= 2.0 * kl + 1e-12);
        }
    }

    #[test]
    fn logsumexp_bounds() {
        let mut rng = stream(52, Purpose::Test);
        for _ in 0..1000 {
            let n = rng.random_range(1..10);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let lse = logsumexp(&xs);
            let mean = xs.iter().sum::<f64>() / n as f64;
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_n = (n as f64).ln();
            assert!(mean + log_n <= lse + 1e-9);
            assert!(lse <= max + log_n + 1e-9);
        }
    }

    #[test]
    fn taylor_bound_holds_on_random_tuples() {
        let mut rng = stream(53, Purpose::Test);
        for _ in 0..1000 {
            let mut u = || rng.random_range(-3.0..3.0);
            let (a, f0, ft, ft1, x) = (u(), u(), u(), u(), u());
            let st = rng.random_range(0.2..2.0);
            let st1 = rng.random_range(0.2..2.0);
            let (lhs, rhs) = gaussian_taylor_sides(a, f0, ft, ft1, st, st1, x);
            assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12, "{lhs} > {rhs}");
        }
    }

    fn softmax(seed: u64) -> Policy {
        let mut rng = stream(seed, Purpose::Test);
        let net = NetworkParams::init(8, 4, 5.0, &mut rng).unwrap();
        let w: Vec<f64> = net.weights().as_slice().iter().map(|w| w + rng.random_range(-1.0..1.0)).collect();
        let codes = (0..3).map(|a| (0..2).map(|b| if a == b { 0.5 } else { 0.0 }).collect()).collect();
        Policy::Softmax(
            SoftmaxPolicy::new(Network::TwoLayer(net.with_weights(w).unwrap()), codes, 1.0).unwrap(),
        )
    }

    #[test]
    fn stepwise_identical_is_zero_and_matches_enumeration() {
        let mut rng = stream(54, Purpose::Test);
        let states: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).collect();
        let a = softmax(55);
        assert_eq!(stepwise_logratio_supnorm(&a, &a, &states).unwrap(), 0.0);
        let b = softmax(56).with_net(a.net().with_params(
            a.net().params().iter().map(|w| w * 1.1).collect(),
        ).unwrap());
        let got = stepwise_logratio_supnorm(&b, &a, &states).unwrap();
        let (Policy::Softmax(pa), Policy::Softmax(pb)) = (&a, &b) else { unreachable!() };
        let mut brute = 0.0;
        for s in &states {
            let ea = pa.energies(s).unwrap();
            let eb = pb.energies(s).unwrap();
            let la = softmax_log_probs(&ea, 1.0);
            let lb = softmax_log_probs(&eb, 1.0);
            let mut worst: f64 = 0.0;
            for k in 0..3 {
                worst = worst.max((lb[k] - la[k]) * (lb[k] - la[k]));
            }
            brute += worst;
        }
        brute /= states.len() as f64;
        assert!((got - brute).abs() < 1e-12);
    }

    #[test]
    fn stepwise_constant_energy_shift_is_zero() {
        let e = [0.3, -1.2, 0.8];
        let shifted: Vec<f64> = e.iter().map(|x| x + 4.0).collect();
        let a = softmax_log_probs(&e, 0.5);
        let b = softmax_log_probs(&shifted, 0.5);
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).fold(0.0, f64::max);
        assert!(worst < 1e-24);
    }
}
