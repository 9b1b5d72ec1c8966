use super::rollout::TrajectoryBatch;
use super::sgd::{minibatch_sgd, Correction, LocalUpdate};
use super::{ActorMode, LearnerConfig, BETA_MAX, BETA_MIN};
use crate::error::{Error, Result};
use crate::policies::{kl_divergence, ActionDist, Policy};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct ActorUpdate {
    pub update: LocalUpdate,
    /// Penalty for the next round; adapted only in `kl_penalty` mode.
    pub beta: f64,
    /// Mean `KL(π_new ‖ π_old)` over the batch states.
    pub kl: f64,
}

fn normalized(xs: &[f64]) -> Vec<f64> {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 1e-12 {
        xs.iter().map(|x| (x - mean) / sd).collect()
    } else {
        xs.iter().map(|x| x - mean).collect()
    }
}

/// Mean `KL(π_new(·|s) ‖ π_old(·|s))` over the given old distributions.
fn mean_kl(new: &Policy, inputs: &[Vec<f64>], old: &[ActionDist]) -> Result<f64> {
    let mut total = 0.0;
    for (x, q) in inputs.iter().zip(old) {
        total += kl_divergence(&new.dist(x)?, q)?;
    }
    Ok(total / inputs.len().max(1) as f64)
}

/// Move β against the KL-target violation.
pub(crate) fn adapt_beta(beta: f64, kl: f64, target: f64) -> f64 {
    let next = if kl > 1.5 * target {
        beta * 2.0
    } else if kl < target / 1.5 {
        beta / 2.0
    } else {
        beta
    };
    next.clamp(BETA_MIN, BETA_MAX)
}

/// Local actor update starting from `old`, the policy that collected `batch`.
///
/// `penalty` is `β_t` from the schedule in `mse_regression` mode and the
/// client's current adaptive β in `kl_penalty` mode. In `mse_regression` the
/// targets use the returns `Ĝ`; in `kl_penalty` the normalized advantages.
pub fn train_actor<R: Rng + ?Sized>(
    old: &Policy,
    batch: &TrajectoryBatch,
    cfg: &LearnerConfig,
    penalty: f64,
    lr: f64,
    correction: &Correction,
    rng: &mut R,
) -> Result<ActorUpdate> {
    if !(penalty > 0.0) {
        return Err(Error::invalid("beta", "penalty must be positive"));
    }
    let n = batch.len();
    let inputs = &batch.policy_inputs;
    let old_dists: Vec<ActionDist> = inputs.iter().map(|x| old.dist(x)).collect::<Result<_>>()?;
    let (update, beta) = match cfg.actor_mode {
        ActorMode::MseRegression => {
            let targets: Vec<f64> = batch
                .returns
                .iter()
                .zip(&batch.old_log_probs)
                .map(|(q, lp)| q / penalty + lp)
                .collect();
            let loss = |net: &crate::numerics::Network| {
                let pol = old.with_net(net.clone());
                let mut total = 0.0;
                for i in 0..n {
                    match pol.log_prob(&inputs[i], batch.actions[i]) {
                        Ok(lp) => total += (lp - targets[i]).powi(2),
                        Err(_) => return f64::NAN,
                    }
                }
                total / n.max(1) as f64
            };
            let up = minibatch_sgd(
                old.net(),
                n,
                cfg,
                lr,
                correction,
                rng,
                |net, idx, out| {
                    let pol = old.with_net(net.clone());
                    let scale = 2.0 / idx.len() as f64;
                    for &i in idx {
                        let lp = pol.log_prob(&inputs[i], batch.actions[i]).unwrap_or(f64::NAN);
                        pol.accumulate_grad_log_prob(&inputs[i], batch.actions[i], scale * (lp - targets[i]), out);
                    }
                },
                loss,
            )?;
            (up, penalty)
        }
        ActorMode::KlPenalty => {
            let adv = normalized(&batch.advantages);
            let beta = penalty;
            let loss = |net: &crate::numerics::Network| {
                let pol = old.with_net(net.clone());
                let mut total = 0.0;
                for i in 0..n {
                    let lp = match pol.log_prob(&inputs[i], batch.actions[i]) {
                        Ok(lp) => lp,
                        Err(_) => return f64::NAN,
                    };
                    let kl = match pol.dist(&inputs[i]).and_then(|p| kl_divergence(&p, &old_dists[i])) {
                        Ok(kl) => kl,
                        Err(_) => return f64::NAN,
                    };
                    total += -adv[i] * lp + beta * kl;
                }
                total / n.max(1) as f64
            };
            let up = minibatch_sgd(
                old.net(),
                n,
                cfg,
                lr,
                correction,
                rng,
                |net, idx, out| {
                    let pol = old.with_net(net.clone());
                    let scale = 1.0 / idx.len() as f64;
                    for &i in idx {
                        pol.accumulate_grad_log_prob(&inputs[i], batch.actions[i], -scale * adv[i], out);
                        pol.accumulate_grad_kl(&inputs[i], &old_dists[i], scale * beta, out);
                    }
                },
                loss,
            )?;
            (up, beta)
        }
    };
    let new_policy = old.with_net(update.net.clone());
    let kl = mean_kl(&new_policy, inputs, &old_dists)?;
    if !kl.is_finite() {
        return Err(Error::Divergence("non-finite policy KL".into()));
    }
    let beta = match cfg.actor_mode {
        ActorMode::MseRegression => beta,
        ActorMode::KlPenalty => adapt_beta(beta, kl, cfg.kl_target),
    };
    Ok(ActorUpdate { update, beta, kl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::collect_rollout;
    use crate::numerics::Architecture;
    use crate::policies::{Action, SoftmaxPolicy};
    use crate::rng::{stream, Purpose};
    use crate::environments::{build_network, EnvFamily, HeterogeneityNetworkSpec};

    fn chain_policy(radius: f64) -> (crate::environments::ClientEnv, Policy) {
        let spec = HeterogeneityNetworkSpec {
            n_clients: 1,
            family: EnvFamily::chain(0.2),
            gamma: 0.9,
            data_counts: None,
        };
        let env = build_network(&spec, &mut stream(20, Purpose::Network)).unwrap().envs.remove(0);
        let net = Architecture::TwoLayer { width: 256, radius }
            .build(env.actor_dim(), &mut stream(21, Purpose::Init))
            .unwrap();
        let pol = Policy::Softmax(SoftmaxPolicy::new(net, env.action_codes().unwrap(), 1.0).unwrap());
        (env, pol)
    }

    #[test]
    fn zero_q_keeps_mse_actor_fixed() {
        let (env, pol) = chain_policy(10.0);
        let mut batch = collect_rollout(&env, &pol, 256, &mut stream(22, Purpose::Rollout)).unwrap();
        batch.returns.iter_mut().for_each(|q| *q = 0.0);
        let cfg = LearnerConfig {
            actor_mode: ActorMode::MseRegression,
            ..LearnerConfig::default()
        };
        let up = train_actor(&pol, &batch, &cfg, 10.0, 0.01, &Correction::NONE, &mut stream(1, Purpose::Minibatch)).unwrap();
        assert_eq!(up.update.epoch_losses[0], 0.0);
        assert_eq!(&up.update.net, pol.net());
    }

    #[test]
    fn mse_loss_non_increasing_full_batch() {
        let (env, pol) = chain_policy(10.0);
        let mut batch = collect_rollout(&env, &pol, 64, &mut stream(23, Purpose::Rollout)).unwrap();
        batch.returns = batch.rewards.iter().map(|r| 3.0 * r).collect();
        let cfg = LearnerConfig {
            actor_mode: ActorMode::MseRegression,
            minibatch: 64,
            epochs: 20,
            ..LearnerConfig::default()
        };
        let up = train_actor(&pol, &batch, &cfg, 1.0, 0.01, &Correction::NONE, &mut stream(2, Purpose::Minibatch)).unwrap();
        let l = &up.update.epoch_losses;
        assert!(l.windows(2).all(|w| w[1] <= w[0]), "{l:?}");
        assert!(l[l.len() - 1] < l[0]);
    }

    #[test]
    fn beta_moves_against_violation_and_stays_bounded() {
        assert_eq!(adapt_beta(1.0, 1.0, 0.01), 2.0);
        assert_eq!(adapt_beta(1.0, 0.0, 0.01), 0.5);
        assert_eq!(adapt_beta(1.0, 0.01, 0.01), 1.0);
        assert_eq!(adapt_beta(BETA_MAX, 10.0, 0.01), BETA_MAX);
        assert_eq!(adapt_beta(BETA_MIN, 0.0, 0.01), BETA_MIN);
    }

    #[test]
    fn kl_mode_moves_toward_advantage() {
        let (env, pol) = chain_policy(10.0);
        let mut batch = collect_rollout(&env, &pol, 512, &mut stream(24, Purpose::Rollout)).unwrap();
        batch.advantages = batch
            .actions
            .iter()
            .map(|a| if *a == Action::Discrete(2) { 1.0 } else { -0.5 })
            .collect();
        let cfg = LearnerConfig {
            actor_mode: ActorMode::KlPenalty,
            ..LearnerConfig::default()
        };
        let up = train_actor(&pol, &batch, &cfg, 0.1, 0.5, &Correction::NONE, &mut stream(3, Purpose::Minibatch)).unwrap();
        let new = pol.with_net(up.update.net.clone());
        let x = &batch.policy_inputs[0];
        assert!(new.log_prob(x, Action::Discrete(2)).unwrap() > pol.log_prob(x, Action::Discrete(2)).unwrap());
        assert!(up.kl > 0.0);
        assert!(up.beta == 0.2 || up.beta == 0.05 || up.beta == 0.1);
    }
}
