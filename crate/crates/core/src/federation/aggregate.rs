use crate::error::{Error, Result};
use crate::numerics::Network;

/// Renormalize `weights` to sum to one.
pub fn renormalize(weights: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights", "must be nonnegative with a positive sum"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// `Σ_k q_k θ_k`, summed in the order given (callers pass ascending client ids).
pub fn aggregate(nets: &[&Network], weights: &[f64]) -> Result<Network> {
    let first = *nets
        .first()
        .ok_or_else(|| Error::invalid("params", "nothing to aggregate"))?;
    if weights.len() != nets.len() {
        return Err(Error::Dimension {
            expected: nets.len(),
            got: weights.len(),
        });
    }
    if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weights", "must sum to 1"));
    }
    if nets.iter().any(|n| !n.same_structure(first)) {
        return Err(Error::Shape("clients do not share architecture and initialization".into()));
    }
    let mut sum = vec![0.0; first.num_params()];
    for (net, &w) in nets.iter().zip(weights) {
        for (s, p) in sum.iter_mut().zip(net.params()) {
            *s += w * p;
        }
    }
    first.with_params(sum)
}

/// SCAFFOLD control variates for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

impl ControlPair {
    pub fn zeros(actor: usize, critic: usize) -> Self {
        Self {
            actor: vec![0.0; actor],
            critic: vec![0.0; critic],
        }
    }
}

/// Option II client control: `c_k⁺ = c_k − c + (x_start − x_end)/(steps·lr)`.
///
/// Zero steps or a zero learning rate leave `c_k` unchanged.
pub fn scaffold_client_control(
    c_local: &[f64],
    c_global: &[f64],
    start: &[f64],
    end: &[f64],
    steps: usize,
    lr: f64,
) -> Vec<f64> {
    if steps == 0 || lr == 0.0 {
        return c_local.to_vec();
    }
    let k = 1.0 / (steps as f64 * lr);
    c_local
        .iter()
        .zip(c_global)
        .zip(start.iter().zip(end))
        .map(|((ck, c), (x0, x1))| ck - c + k * (x0 - x1))
        .collect()
}

/// `c ← c + (1/N) Σ_k Δc_k` over the participants' control changes.
pub fn scaffold_server_control(c_global: &[f64], deltas: &[&[f64]], n_clients: usize) -> Vec<f64> {
    let mut c = c_global.to_vec();
    let k = 1.0 / n_clients as f64;
    for d in deltas {
        for (ci, di) in c.iter_mut().zip(*d) {
            *ci += k * di;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Architecture, NetworkParams};
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn base() -> Network {
        Architecture::TwoLayer { width: 8, radius: 2.0 }
            .build(3, &mut stream(1, Purpose::Init))
            .unwrap()
    }

    fn nudged(net: &Network, seed: u64, size: f64) -> Network {
        let mut rng = stream(seed, Purpose::Test);
        let p = net.params().iter().map(|p| p + rng.random_range(-size..size)).collect();
        net.with_params(p).unwrap()
    }

    #[test]
    fn identical_inputs_identical_output() {
        let a = nudged(&base(), 2, 0.1);
        let out = aggregate(&[&a, &a, &a], &[0.2, 0.3, 0.5]).unwrap();
        for (x, y) in out.params().iter().zip(a.params()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_weights_give_midpoint() {
        let a = nudged(&base(), 3, 0.1);
        let b = nudged(&base(), 4, 0.1);
        let out = aggregate(&[&a, &b], &[0.5, 0.5]).unwrap();
        for ((o, x), y) in out.params().iter().zip(a.params()).zip(b.params()) {
            assert_eq!(*o, 0.5 * x + 0.5 * y);
        }
    }

    #[test]
    fn data_count_weights() {
        let q = renormalize(&[1.0, 3.0]).unwrap();
        assert_eq!(q, vec![0.25, 0.75]);
        let a = nudged(&base(), 5, 0.1);
        let b = nudged(&base(), 6, 0.1);
        let out = aggregate(&[&a, &b], &q).unwrap();
        for ((o, x), y) in out.params().iter().zip(a.params()).zip(b.params()) {
            assert_eq!(*o, 0.25 * x + 0.75 * y);
        }
    }

    #[test]
    fn mismatched_initialization_is_rejected() {
        let a = base();
        let b = Architecture::TwoLayer { width: 8, radius: 2.0 }
            .build(3, &mut stream(99, Purpose::Init))
            .unwrap();
        assert!(aggregate(&[&a, &b], &[0.5, 0.5]).is_err());
        assert!(aggregate(&[&a, &a], &[0.5, 0.6]).is_err());
    }

    #[test]
    fn aggregate_stays_in_ball_and_linearization_averages() {
        let root = base();
        let locals: Vec<Network> = (0..4).map(|s| nudged(&root, 10 + s, 3.0)).collect();
        let q = renormalize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let refs: Vec<&Network> = locals.iter().collect();
        let agg = aggregate(&refs, &q).unwrap();
        assert!(agg.distance_from_init() <= 2.0 + 1e-9);
        let lin = |n: &Network, x: &[f64]| n.as_two_layer().unwrap().forward_linearized(x).unwrap();
        let mut rng = stream(20, Purpose::Test);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
            let mixed: f64 = locals.iter().zip(&q).map(|(n, w)| w * lin(n, &x)).sum();
            assert!((lin(&agg, &x) - mixed).abs() < 1e-10);
        }
        let _: Option<&NetworkParams> = agg.as_two_layer();
    }

    #[test]
    fn scaffold_degenerate_cases() {
        let ck = vec![0.3, -0.2];
        assert_eq!(scaffold_client_control(&ck, &[1.0, 1.0], &[0.0, 0.0], &[5.0, 5.0], 0, 0.1), ck);
        assert_eq!(scaffold_client_control(&ck, &[1.0, 1.0], &[0.0, 0.0], &[5.0, 5.0], 3, 0.0), ck);
        let c = scaffold_server_control(&[1.0, 2.0], &[&[0.5, 0.5], &[1.5, -0.5]], 4);
        assert_eq!(c, vec![1.5, 2.0]);
    }

    #[test]
    fn scaffold_two_client_quadratic_trace() {
        // f_k(x) = a_k (x − b_k)² / 2, two local steps, both clients every round
        let (a, b) = ([1.0, 2.0], [0.0, 1.0]);
        let (lr, steps) = (0.1, 2);
        let mut x = 0.0;
        let mut c = vec![0.0];
        let mut ck = [vec![0.0], vec![0.0]];
        for _ in 0..2 {
            let mut ends = [0.0; 2];
            let mut deltas = Vec::new();
            let mut next_ck = ck.clone();
            for k in 0..2 {
                let mut y = x;
                for _ in 0..steps {
                    let g = a[k] * (y - b[k]) + (c[0] - ck[k][0]);
                    y -= lr * g;
                }
                ends[k] = y;
                next_ck[k] = scaffold_client_control(&ck[k], &c, &[x], &[y], steps, lr);
                deltas.push(vec![next_ck[k][0] - ck[k][0]]);
            }
            x = 0.5 * ends[0] + 0.5 * ends[1];
            let refs: Vec<&[f64]> = deltas.iter().map(|d| d.as_slice()).collect();
            c = scaffold_server_control(&c, &refs, 2);
            ck = next_ck;
        }
        // hand-stepped reference
        assert!((x - 0.315).abs() < 1e-8);
        assert!((c[0] + 0.675).abs() < 1e-8);
        assert!((ck[0][0] - 0.216).abs() < 1e-8);
        assert!((ck[1][0] + 1.566).abs() < 1e-8);
    }
}
