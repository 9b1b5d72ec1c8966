use super::Check;
use crate::error::Result;
use crate::federation::{aggregate, renormalize};
use crate::learners::{gae_from_values, TrajectoryBatch};
use crate::numerics::{Architecture, Network, NetworkParams};
use crate::policies::{kl_divergence, l1_distance, logsumexp, softmax_log_probs, Action, ActionDist};
use crate::rng::{stream, Purpose, StreamRng};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const INSTANCES: usize = 1000;

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_ball_point(d: usize, rng: &mut StreamRng) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = rng.random::<f64>();
    v.into_iter().map(|x| x / norm * r).collect()
}

/// Weights at `ϑ⁰ + scale·z` for a standard normal `z`.
fn perturbed(net: &NetworkParams, scale: f64, rng: &mut StreamRng) -> NetworkParams {
    let w = net.init_weights().as_slice().iter().map(|w| w + scale * normal(rng)).collect();
    net.with_weights(w).expect("same shape")
}

fn random_net(width: usize, d: usize, radius: f64, rng: &mut StreamRng) -> NetworkParams {
    NetworkParams::init(width, d, radius, rng).expect("valid shape")
}

fn projection(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Purpose::Test);
    let mut worst_radius: f64 = 0.0;
    let mut all_idempotent = true;
    let mut inside_untouched = true;
    for i in 0..INSTANCES {
        let radius = rng.random_range(0.1..3.0);
        let net = random_net(16, 4, radius, &mut rng);
        let scale = if i % 2 == 0 { 1.0 } else { 0.01 };
        let raw = perturbed(&net, scale, &mut rng);
        let inside = raw.distance_from_init() <= radius;
        let once = raw.clone().project_to_ball();
        let twice = once.clone().project_to_ball();
        all_idempotent &= once == twice;
        if inside {
            inside_untouched &= once == raw;
        }
        worst_radius = worst_radius.max(once.distance_from_init() / radius - 1.0);
    }
    let ok = all_idempotent && inside_untouched && worst_radius <= 1e-12;
    Ok(Check::new(
        "projection idempotence and radius",
        ok,
        format!(
            "{INSTANCES} nets, idempotent={all_idempotent}, inside untouched={inside_untouched}, max relative overshoot {worst_radius:.1e}"
        ),
    ))
}

fn lipschitz(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Purpose::Test);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut worst_grad: f64 = 0.0;
    for i in 0..INSTANCES {
        let net = random_net(32, 5, 2.0, &mut rng);
        let a = perturbed(&net, 0.3, &mut rng).project_to_ball();
        // every other pair is close, where the bound is tight
        let b = if i % 2 == 0 {
            perturbed(&net, 0.3, &mut rng).project_to_ball()
        } else {
            let w = a.weights().as_slice().iter().map(|w| w + 1e-3 * normal(&mut rng)).collect();
            a.with_weights(w)?.project_to_ball()
        };
        let x = unit_ball_point(5, &mut rng);
        let gap = (a.forward(&x)? - b.forward(&x)?).abs();
        let dist = a
            .weights()
            .as_slice()
            .iter()
            .zip(b.weights().as_slice())
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(gap - dist);
        worst_grad = worst_grad.max(a.gradient(&x)?.frobenius_norm());
    }
    Ok(Check::new(
        "1-Lipschitz in parameters",
        worst <= 1e-12 && worst_grad <= 1.0 + 1e-12,
        format!("{INSTANCES} pairs, max(|Δf| − ‖Δϑ‖) = {worst:.2e}, max ‖∇f‖_F = {worst_grad:.4}"),
    ))
}

fn finite_differences(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Purpose::Test);
    let h = 1e-5;
    let (mut worst, mut used) = (0.0f64, 0usize);
    while used < INSTANCES {
        let net = perturbed(&random_net(24, 4, 5.0, &mut rng), 0.2, &mut rng);
        let x = unit_ball_point(4, &mut rng);
        let dir: Vec<f64> = (0..net.weights().as_slice().len()).map(|_| normal(&mut rng)).collect();
        let w = net.weights().as_slice();
        // stay away from activation kinks, including after the ±h move
        let d = net.input_dim();
        let kink = (0..net.width()).any(|i| {
            let pre: f64 = (0..d).map(|j| w[i * d + j] * x[j]).sum();
            let slope: f64 = (0..d).map(|j| dir[i * d + j] * x[j]).sum();
            pre.abs() <= 1e-3 || pre.abs() <= 2.0 * h * slope.abs()
        });
        if kink {
            continue;
        }
        let shifted = |s: f64| net.with_weights(w.iter().zip(&dir).map(|(a, b)| a + s * b).collect());
        let fd = (shifted(h)?.forward(&x)? - shifted(-h)?.forward(&x)?) / (2.0 * h);
        let analytic: f64 = net.gradient(&x)?.as_slice().iter().zip(&dir).map(|(g, v)| g * v).sum();
        if analytic.abs() < 1e-6 {
            continue;
        }
        worst = worst.max((fd - analytic).abs() / analytic.abs());
        used += 1;
    }
    Ok(Check::new(
        "gradient vs central finite differences",
        worst <= 1e-4,
        format!("{used} directions, max relative error {worst:.2e}"),
    ))
}

fn random_simplex(n: usize, rng: &mut StreamRng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn pinsker(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Purpose::Test);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..INSTANCES {
        let n = rng.random_range(2..8);
        let p = random_simplex(n, &mut rng);
        let q = random_simplex(n, &mut rng);
        let kl = kl_divergence(&ActionDist::Categorical(p.clone()), &ActionDist::Categorical(q.clone()))?;
        worst = worst.max(l1_distance(&p, &q).powi(2) - 2.0 * kl);
    }
    Ok(Check::new(
        "Pinsker inequality",
        worst <= 1e-12,
        format!("{INSTANCES} pairs, max(‖p−q‖₁² − 2·KL) = {worst:.3e}"),
    ))
}

fn log_sum_bounds(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Purpose::Test);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..INSTANCES {
        let n = rng.random_range(1..10);
        let scale = rng.random_range(0.1..20.0);
        let x: Vec<f64> = (0..n).map(|_| scale * normal(&mut rng)).collect();
        let lse = logsumexp(&x);
        let mean = x.iter().sum::<f64>() / n as f64;
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_n = (n as f64).ln();
        let tol = 1e-12 * (1.0 + lse.abs());
        worst = worst.max((mean + log_n - lse) - tol).max((lse - max - log_n) - tol);
    }
    Ok(Check::new(
        "log-sum-exp bounds",
        worst <= 0.0,
        format!("{INSTANCES} vectors, largest violation {worst:.3e}"),
    ))
}

fn random_batch(n: usize, rng: &mut StreamRng) -> TrajectoryBatch {
    let mut b = TrajectoryBatch::default();
    for i in 0..n {
        let terminal = rng.random_bool(0.05);
        let truncated = rng.random_bool(0.05);
        b.rewards.push(rng.random_range(-1.0..1.0));
        b.values.push(rng.random_range(-2.0..2.0));
        b.next_values.push(rng.random_range(-2.0..2.0));
        b.terminals.push(terminal);
        b.episode_ends.push(terminal || truncated || i + 1 == n);
        b.actions.push(Action::Discrete(0));
    }
    b
}

/// Forward sums of discounted TD errors up to each episode end.
fn gae_brute_force(b: &TrajectoryBatch, gamma: f64, lambda: f64) -> Vec<f64> {
    (0..b.len())
        .map(|t| {
            let mut total = 0.0;
            let mut k = 1.0;
            for i in t..b.len() {
                let next = if b.terminals[i] { 0.0 } else { b.next_values[i] };
                total += k * (b.rewards[i] + gamma * next - b.values[i]);
                if b.episode_ends[i] {
                    break;
                }
                k *= gamma * lambda;
            }
            total
        })
        .collect()
}

fn gae(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Purpose::Test);
    let mut worst: f64 = 0.0;
    let mut worst_ret: f64 = 0.0;
    for _ in 0..50 {
        let b = random_batch(rng.random_range(1..300), &mut rng);
        let gamma = rng.random_range(0.5..1.0);
        let lambda = rng.random_range(0.01..=1.0);
        let (adv, ret) = gae_from_values(&b, gamma, lambda);
        for (a, e) in adv.iter().zip(gae_brute_force(&b, gamma, lambda)) {
            worst = worst.max((a - e).abs());
        }
        for ((r, a), v) in ret.iter().zip(&adv).zip(&b.values) {
            worst_ret = worst_ret.max((r - (a + v)).abs());
        }
    }
    Ok(Check::new(
        "GAE vs brute force",
        worst <= 1e-10 && worst_ret <= 1e-9,
        format!("50 batches, max advantage error {worst:.2e}, max |Ĝ − Â − V| {worst_ret:.2e}"),
    ))
}

fn linearized_aggregation(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Purpose::Test);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let root = Architecture::TwoLayer { width: 32, radius: 1.5 }.build(4, &mut rng)?;
        let clients = rng.random_range(2..6);
        let locals: Vec<Network> = (0..clients)
            .map(|_| {
                let p = root.params().iter().map(|w| w + 0.5 * normal(&mut rng)).collect();
                root.with_params(p)
            })
            .collect::<Result<_>>()?;
        let raw: Vec<f64> = (0..clients).map(|_| rng.random_range(0.1..1.0)).collect();
        let q = renormalize(&raw)?;
        let refs: Vec<&Network> = locals.iter().collect();
        let agg = aggregate(&refs, &q)?;
        let lin = |n: &Network, x: &[f64]| n.as_two_layer().expect("two-layer").forward_linearized(x);
        for _ in 0..20 {
            let x = unit_ball_point(4, &mut rng);
            let mixed: f64 = locals.iter().zip(&q).map(|(n, w)| lin(n, &x).map(|v| w * v)).sum::<Result<f64>>()?;
            worst = worst.max((lin(&agg, &x)? - mixed).abs());
        }
    }
    Ok(Check::new(
        "linearized aggregation is linear",
        worst <= 1e-10,
        format!("100 aggregations × 20 inputs, max error {worst:.2e}"),
    ))
}

fn softmax_normalization(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Purpose::Test);
    let mut worst: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    for _ in 0..INSTANCES {
        let n = rng.random_range(1..12);
        let scale = rng.random_range(0.1..50.0);
        let e: Vec<f64> = (0..n).map(|_| scale * normal(&mut rng)).collect();
        let tau = rng.random_range(0.05..10.0);
        let lp = softmax_log_probs(&e, tau);
        worst = worst.max((lp.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs());
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = e.iter().map(|x| x + c).collect();
        for (a, b) in softmax_log_probs(&shifted, tau).iter().zip(&lp) {
            worst_shift = worst_shift.max((a.exp() - b.exp()).abs());
        }
    }
    Ok(Check::new(
        "softmax normalization",
        worst <= 1e-12 && worst_shift <= 1e-12,
        format!("{INSTANCES} vectors, max |Σp − 1| = {worst:.2e}, max shift change {worst_shift:.2e}"),
    ))
}

/// Numeric properties of the network, policy and advantage machinery.
pub fn property_suite(seed: u64) -> Vec<Check> {
    let checks: [(fn(u64) -> Result<Check>, &str); 8] = [
        (projection, "projection idempotence and radius"),
        (lipschitz, "1-Lipschitz in parameters"),
        (finite_differences, "gradient vs central finite differences"),
        (pinsker, "Pinsker inequality"),
        (log_sum_bounds, "log-sum-exp bounds"),
        (gae, "GAE vs brute force"),
        (linearized_aggregation, "linearized aggregation is linear"),
        (softmax_normalization, "softmax normalization"),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(i, (f, name))| Check::timed(name, || f(seed.wrapping_add(i as u64))))
        .collect()
}
