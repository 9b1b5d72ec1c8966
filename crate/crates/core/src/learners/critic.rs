use super::rollout::TrajectoryBatch;
use super::sgd::{minibatch_sgd, Correction, LocalUpdate};
use super::LearnerConfig;
use crate::error::{Error, Result};
use crate::numerics::Network;
use rand::Rng;

/// Mean squared error between `V(s_t)` and the return targets `Ĝ_t`.
pub fn critic_loss(critic: &Network, batch: &TrajectoryBatch) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let sum: f64 = batch
        .critic_inputs
        .iter()
        .zip(&batch.returns)
        .map(|(x, g)| (critic.eval(x) - g).powi(2))
        .sum();
    sum / batch.len() as f64
}

/// `E` epochs of minibatch SGD on the critic regression loss.
pub fn train_critic<R: Rng + ?Sized>(
    critic: &Network,
    batch: &TrajectoryBatch,
    cfg: &LearnerConfig,
    lr: f64,
    correction: &Correction,
    rng: &mut R,
) -> Result<LocalUpdate> {
    if batch.returns.len() != batch.len() {
        return Err(Error::invalid("batch", "returns not computed"));
    }
    if let Some(x) = batch.critic_inputs.first() {
        critic.forward(x)?;
    }
    minibatch_sgd(
        critic,
        batch.len(),
        cfg,
        lr,
        correction,
        rng,
        |net, idx, out| {
            let scale = 2.0 / idx.len() as f64;
            for &i in idx {
                let x = &batch.critic_inputs[i];
                let err = net.eval(x) - batch.returns[i];
                net.accumulate_gradient(x, scale * err, out);
            }
        },
        |net| critic_loss(net, batch),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Architecture;
    use crate::policies::Action;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn regression_batch(n: usize, dim: usize, seed: u64) -> TrajectoryBatch {
        let mut rng = stream(seed, Purpose::Test);
        let mut b = TrajectoryBatch::default();
        for _ in 0..n {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0) / (dim as f64).sqrt()).collect();
            b.returns.push(x.iter().sum::<f64>().sin());
            b.critic_inputs.push(x);
            b.rewards.push(0.0);
            b.actions.push(Action::Discrete(0));
        }
        b
    }

    fn net(width: usize, dim: usize, radius: f64) -> Network {
        Architecture::TwoLayer { width, radius }
            .build(dim, &mut stream(11, Purpose::Init))
            .unwrap()
    }

    #[test]
    fn matched_targets_leave_params_unchanged() {
        let critic = net(32, 3, 5.0);
        let mut batch = regression_batch(40, 3, 12);
        batch.returns = batch.critic_inputs.iter().map(|x| critic.eval(x)).collect();
        let cfg = LearnerConfig::default();
        let up = train_critic(&critic, &batch, &cfg, 0.01, &Correction::NONE, &mut stream(1, Purpose::Minibatch)).unwrap();
        assert_eq!(up.net, critic);
        assert_eq!(up.epoch_losses[0], 0.0);
    }

    #[test]
    fn full_batch_loss_is_non_increasing() {
        let critic = net(64, 3, 5.0);
        let batch = regression_batch(32, 3, 13);
        let cfg = LearnerConfig {
            minibatch: 32,
            epochs: 30,
            ..LearnerConfig::default()
        };
        let up = train_critic(&critic, &batch, &cfg, 0.01, &Correction::NONE, &mut stream(2, Purpose::Minibatch)).unwrap();
        assert!(up.epoch_losses.windows(2).all(|w| w[1] <= w[0]), "{:?}", up.epoch_losses);
        assert!(up.epoch_losses.last().unwrap() < &up.epoch_losses[0]);
        assert_eq!(up.steps, 30);
    }

    #[test]
    fn zero_mu_matches_plain_update() {
        let critic = net(16, 2, 3.0);
        let batch = regression_batch(300, 2, 14);
        let cfg = LearnerConfig::default();
        let anchor = critic.params().to_vec();
        let prox = Correction {
            prox: Some((&anchor, 0.0)),
            control: None,
        };
        let a = train_critic(&critic, &batch, &cfg, 0.05, &Correction::NONE, &mut stream(3, Purpose::Minibatch)).unwrap();
        let b = train_critic(&critic, &batch, &cfg, 0.05, &prox, &mut stream(3, Purpose::Minibatch)).unwrap();
        assert_eq!(a.net, b.net);
    }

    #[test]
    fn proximal_term_keeps_params_closer() {
        let critic = net(16, 2, 50.0);
        let batch = regression_batch(300, 2, 15);
        let cfg = LearnerConfig::default();
        let anchor = critic.params().to_vec();
        let prox = Correction {
            prox: Some((&anchor, 5.0)),
            control: None,
        };
        let a = train_critic(&critic, &batch, &cfg, 0.05, &Correction::NONE, &mut stream(4, Purpose::Minibatch)).unwrap();
        let b = train_critic(&critic, &batch, &cfg, 0.05, &prox, &mut stream(4, Purpose::Minibatch)).unwrap();
        assert!(b.net.distance_from_init() < a.net.distance_from_init());
    }

    #[test]
    fn stays_in_ball() {
        let critic = net(16, 2, 0.05);
        let batch = regression_batch(200, 2, 16);
        let up = train_critic(&critic, &batch, &LearnerConfig::default(), 0.5, &Correction::NONE, &mut stream(5, Purpose::Minibatch)).unwrap();
        assert!(up.net.distance_from_init() <= 0.05 + 1e-9);
    }

    #[test]
    fn non_finite_targets_diverge() {
        let critic = net(8, 2, 1.0);
        let mut batch = regression_batch(10, 2, 17);
        batch.returns[3] = f64::NAN;
        let err = train_critic(&critic, &batch, &LearnerConfig::default(), 0.01, &Correction::NONE, &mut stream(6, Purpose::Minibatch))
            .unwrap_err();
        assert!(err.is_divergence());
    }
}
