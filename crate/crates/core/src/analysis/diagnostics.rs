use crate::error::{Error, Result};
use crate::numerics::{Matrix, NetworkParams};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

fn check_grid(values: &[Vec<f64>], q: &[f64], weights: &[Vec<f64>]) -> Result<usize> {
    let n = values.len();
    if n == 0 || q.len() != n || weights.len() != n {
        return Err(Error::invalid("kappa", "need one value row, weight and point distribution per client"));
    }
    let points = values[0].len();
    if values.iter().chain(weights).any(|v| v.len() != points) {
        return Err(Error::invalid("kappa", "rows must share the evaluation points"));
    }
    Ok(points)
}

/// `Σ_i q_i |v_n(x) − v_i(x)|`.
fn pairwise(values: &[Vec<f64>], q: &[f64], n: usize, x: usize) -> f64 {
    values
        .iter()
        .zip(q)
        .map(|(vi, qi)| qi * (values[n][x] - vi[x]).abs())
        .sum()
}

/// Exact heterogeneity level on a finite grid:
/// `Σ_n q_n Σ_x w_n(x) Σ_i q_i |v_n(x) − v_i(x)|`.
///
/// `values[n][x]` is client `n`'s critic at point `x`; `weights[n]` is the
/// sampling distribution of points for client `n`.
pub fn measure_kappa(values: &[Vec<f64>], q: &[f64], weights: &[Vec<f64>]) -> Result<f64> {
    let points = check_grid(values, q, weights)?;
    let mut total = 0.0;
    for n in 0..values.len() {
        let inner: f64 = (0..points).map(|x| weights[n][x] * pairwise(values, q, n, x)).sum();
        total += q[n] * inner;
    }
    Ok(total)
}

/// Sampled version of [`measure_kappa`]: draw `n ~ q`, `x ~ w_n`.
pub fn kappa_monte_carlo<R: Rng + ?Sized>(
    values: &[Vec<f64>],
    q: &[f64],
    weights: &[Vec<f64>],
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    check_grid(values, q, weights)?;
    let clients = WeightedIndex::new(q).map_err(|e| Error::invalid("q", e.to_string()))?;
    let points: Vec<WeightedIndex<f64>> = weights
        .iter()
        .map(|w| WeightedIndex::new(w).map_err(|e| Error::invalid("weights", e.to_string())))
        .collect::<Result<_>>()?;
    let draws: Vec<f64> = (0..samples)
        .map(|_| {
            let n = clients.sample(rng);
            let x = points[n].sample(rng);
            pairwise(values, q, n, x)
        })
        .collect();
    Ok(summarize(&draws))
}

fn summarize(draws: &[f64]) -> Estimate {
    let n = draws.len().max(1) as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

/// Aggregation error `|Σ_n q_n Σ_x w_n(x) (g(x) − l_n(x))|`.
///
/// `global[x]` and `local[n][x]` are log-probabilities of the reference
/// action at point `x`.
pub fn measure_omega(global: &[f64], local: &[Vec<f64>], q: &[f64], weights: &[Vec<f64>]) -> Result<f64> {
    let points = check_grid(local, q, weights)?;
    if global.len() != points {
        return Err(Error::Dimension {
            expected: points,
            got: global.len(),
        });
    }
    let mut total = 0.0;
    for n in 0..local.len() {
        let inner: f64 = (0..points).map(|x| weights[n][x] * (global[x] - local[n][x])).sum();
        total += q[n] * inner;
    }
    Ok(total.abs())
}

/// Sampled version of [`measure_omega`].
pub fn omega_monte_carlo<R: Rng + ?Sized>(
    global: &[f64],
    local: &[Vec<f64>],
    q: &[f64],
    weights: &[Vec<f64>],
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    check_grid(local, q, weights)?;
    let clients = WeightedIndex::new(q).map_err(|e| Error::invalid("q", e.to_string()))?;
    let points: Vec<WeightedIndex<f64>> = weights
        .iter()
        .map(|w| WeightedIndex::new(w).map_err(|e| Error::invalid("weights", e.to_string())))
        .collect::<Result<_>>()?;
    let draws: Vec<f64> = (0..samples)
        .map(|_| {
            let n = clients.sample(rng);
            let x = points[n].sample(rng);
            global[x] - local[n][x]
        })
        .collect();
    let est = summarize(&draws);
    Ok(Estimate {
        mean: est.mean.abs(),
        stderr: est.stderr,
    })
}

/// Mixture weights `q_i ρ_i(s) / Z(s)` at one state.
fn mixture(q: &[f64], rho: &[Vec<f64>], s: usize) -> Result<Vec<f64>> {
    let z: f64 = q.iter().zip(rho).map(|(qi, r)| qi * r[s]).sum();
    if !(z > 0.0) {
        return Err(Error::invalid("state", format!("state {s} is unreachable under the reference policy")));
    }
    Ok(q.iter().zip(rho).map(|(qi, r)| qi * r[s] / z).collect())
}

/// Ideal actor-first critic target at `(s, a)`:
/// `Σ_i q_i ρ_i(s)/Z(s) · Q_i(s,a)` with `Z(s) = Σ_i q_i ρ_i(s)`.
pub fn fedrac_ideal_target(q: &[f64], rho: &[Vec<f64>], qvals: &[&Matrix], s: usize, a: usize) -> Result<f64> {
    if rho.len() != q.len() || qvals.len() != q.len() {
        return Err(Error::invalid("target", "need one visitation and Q table per client"));
    }
    let w = mixture(q, rho, s)?;
    Ok(w.iter().zip(qvals).map(|(wi, qi)| wi * qi[(s, a)]).sum())
}

/// State-value form of the ideal target, `Σ_i q_i ρ_i(s)/Z(s) · V_i(s)`,
/// for every state. Unreachable states yield `None`.
pub fn fedrac_value_target(q: &[f64], rho: &[Vec<f64>], values: &[Vec<f64>]) -> Vec<Option<f64>> {
    let ns = values.first().map_or(0, Vec::len);
    (0..ns)
        .map(|s| {
            mixture(q, rho, s)
                .ok()
                .map(|w| w.iter().zip(values).map(|(wi, v)| wi * v[s]).sum())
        })
        .collect()
}

/// Mean `|f(x) − f⁰(x)|` over `inputs`.
pub fn measure_linearization_error(net: &NetworkParams, inputs: &[Vec<f64>]) -> Result<f64> {
    if inputs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for x in inputs {
        total += (net.forward(x)? - net.forward_linearized(x)?).abs();
    }
    Ok(total / inputs.len() as f64)
}
