use super::LearnerConfig;
use crate::error::{Error, Result};
use crate::numerics::Network;
use rand::seq::SliceRandom;
use rand::Rng;

/// Extra gradient terms added by the federated base algorithm.
#[derive(Debug, Clone, Copy, Default)]
pub struct Correction<'a> {
    /// FedProx anchor and `μ`: adds `μ (w − anchor)`.
    pub prox: Option<(&'a [f64], f64)>,
    /// SCAFFOLD drift term `c − c_k`.
    pub control: Option<&'a [f64]>,
}

impl Correction<'_> {
    pub const NONE: Correction<'static> = Correction {
        prox: None,
        control: None,
    };

    fn apply(&self, params: &[f64], grad: &mut [f64]) {
        if let Some((anchor, mu)) = self.prox {
            if mu != 0.0 {
                for ((g, p), a) in grad.iter_mut().zip(params).zip(anchor) {
                    *g += mu * (p - a);
                }
            }
        }
        if let Some(c) = self.control {
            for (g, ci) in grad.iter_mut().zip(c) {
                *g += ci;
            }
        }
    }
}

/// Result of one local optimization.
#[derive(Debug, Clone)]
pub struct LocalUpdate {
    pub net: Network,
    /// SGD steps taken.
    pub steps: usize,
    /// Full-batch loss before training and after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Shuffled minibatch SGD with projection after every step.
///
/// `grad` adds the minibatch-mean loss gradient at `net` into its buffer;
/// `loss` evaluates the full-batch loss.
pub(crate) fn minibatch_sgd<R, G, L>(
    net: &Network,
    n: usize,
    cfg: &LearnerConfig,
    lr: f64,
    correction: &Correction,
    rng: &mut R,
    mut grad: G,
    loss: L,
) -> Result<LocalUpdate>
where
    R: Rng + ?Sized,
    G: FnMut(&Network, &[usize], &mut [f64]),
    L: Fn(&Network) -> f64,
{
    let check = |value: f64, epoch: usize| {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Divergence(format!("non-finite loss at epoch {epoch}")))
        }
    };
    let mut losses = vec![check(loss(net), 0)?];
    let mut current = net.clone();
    let mut order: Vec<usize> = (0..n).collect();
    let mut buf = vec![0.0; net.num_params()];
    let mut steps = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch.max(1)) {
            buf.iter_mut().for_each(|g| *g = 0.0);
            grad(&current, chunk, &mut buf);
            correction.apply(current.params(), &mut buf);
            current = current.sgd_step(&buf, lr)?;
            steps += 1;
        }
        debug_assert!(current.distance_from_init() <= current.radius() + 1e-9);
        losses.push(check(loss(&current), epoch)?);
    }
    Ok(LocalUpdate {
        net: current,
        steps,
        epoch_losses: losses,
    })
}
