use super::aggregate::{scaffold_client_control, ControlPair};
use super::config::{BaseAlgo, Variant};
use crate::environments::{ClientEnv, State};
use crate::error::{Error, Result};
use crate::learners::{
    collect_rollout, compute_gae, make_policy, train_actor, train_critic, ActorMode, Correction,
    LearnerConfig, TrajectoryBatch,
};
use crate::numerics::{l2_distance, Network};
use crate::policies::{Action, ScheduleSet};
use crate::rng::{Purpose, StreamKey};

/// Server-side view of one client.
#[derive(Debug, Clone)]
pub struct ClientSlot {
    pub id: usize,
    pub env: ClientEnv,
    pub data_count: f64,
    pub weight: f64,
    /// Adaptive KL penalty carried between the client's rounds.
    pub beta: f64,
    /// SCAFFOLD `c_k`; absent under FedAvg and FedProx.
    pub control: Option<ControlPair>,
}

/// Everything a client receives at the start of round `t`.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub round: usize,
    pub actor: &'a Network,
    pub critic: &'a Network,
    pub variant: Variant,
    pub base_algo: BaseAlgo,
    pub learner: &'a LearnerConfig,
    pub schedule: &'a ScheduleSet,
    pub seed: u64,
    pub global_control: Option<&'a ControlPair>,
}

/// Bitwise record of which parameters fed each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderCheck {
    /// The rollout policy's parameters equal the received `θᵗ`.
    pub rollout_used_global_actor: bool,
    /// Values behind the actor's targets came from the received `wᵗ`.
    pub actor_values_from_global: bool,
    /// Values behind the actor's targets came from the returned `w_k^{t+1}`.
    pub actor_values_from_local: bool,
    /// `w_k^{t+1}` differs from `wᵗ`.
    pub critic_moved: bool,
}

impl OrderCheck {
    /// Whether the check matches the contract of `variant`.
    pub fn holds_for(&self, variant: Variant) -> bool {
        self.rollout_used_global_actor
            && match variant {
                Variant::FedRac => self.actor_values_from_global,
                Variant::Baseline => self.actor_values_from_local,
            }
    }
}

#[derive(Debug, Clone)]
pub struct ClientStats {
    pub client: usize,
    pub rollout_digest: u64,
    /// Critic loss on the round's batch before and after training.
    pub critic_loss: (f64, f64),
    pub actor_loss: (f64, f64),
    pub kl: f64,
    pub actor_delta: f64,
    pub critic_delta: f64,
    pub order: OrderCheck,
}

/// States and on-policy actions kept for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Probe {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone)]
pub struct ClientResult {
    pub client: usize,
    pub actor: Network,
    pub critic: Network,
    pub data_count: f64,
    pub beta: f64,
    pub control: Option<ControlPair>,
    pub stats: ClientStats,
    pub probe: Probe,
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

const PROBE_SIZE: usize = 128;

fn probe(batch: &TrajectoryBatch) -> Probe {
    let n = batch.len();
    let stride = n.div_ceil(PROBE_SIZE).max(1);
    let idx = (0..n).step_by(stride);
    Probe {
        states: idx.clone().map(|i| batch.states[i].clone()).collect(),
        actions: idx.map(|i| batch.actions[i]).collect(),
    }
}

/// One client's local work in round `t`: rollout, critic and actor updates.
pub fn client_round(ctx: &RoundContext, slot: &ClientSlot) -> Result<ClientResult> {
    run(ctx, slot).map_err(|e| e.for_client(slot.id))
}

fn run(ctx: &RoundContext, slot: &ClientSlot) -> Result<ClientResult> {
    let t = ctx.round;
    let cfg = ctx.learner;
    let lr = cfg.lr_at(t);
    let key = |purpose| StreamKey::new(ctx.seed, purpose).client(slot.id).round(t).rng();

    let policy = make_policy(ctx.actor.clone(), &slot.env, ctx.schedule, t)?;
    let rollout_used_global_actor = same_bits(policy.net().params(), ctx.actor.params());
    let mut batch = collect_rollout(&slot.env, &policy, cfg.batch_size, &mut key(Purpose::Rollout))?;
    let digest = batch.rollout_digest();
    compute_gae(&mut batch, ctx.critic, cfg.gamma, cfg.gae_lambda)?;

    let scaffold = match (ctx.base_algo, ctx.global_control, &slot.control) {
        (BaseAlgo::Scaffold, Some(c), Some(ck)) => Some((c, ck)),
        (BaseAlgo::Scaffold, _, _) => {
            return Err(Error::invalid("scaffold", "control variates missing"));
        }
        _ => None,
    };
    let drift = |c: &[f64], ck: &[f64]| -> Result<Vec<f64>> {
        if c.len() != ck.len() {
            return Err(Error::invalid("scaffold", "control variate shapes differ"));
        }
        Ok(c.iter().zip(ck).map(|(a, b)| a - b).collect())
    };
    let (actor_drift, critic_drift) = match scaffold {
        Some((c, ck)) => (Some(drift(&c.actor, &ck.actor)?), Some(drift(&c.critic, &ck.critic)?)),
        None => (None, None),
    };
    let mu = match ctx.base_algo {
        BaseAlgo::FedProx => cfg.fedprox_mu,
        _ => 0.0,
    };
    let prox = |anchor| (ctx.base_algo == BaseAlgo::FedProx).then_some((anchor, mu));
    let critic_corr = Correction {
        prox: prox(ctx.critic.params()),
        control: critic_drift.as_deref(),
    };
    let actor_corr = Correction {
        prox: prox(ctx.actor.params()),
        control: actor_drift.as_deref(),
    };
    let penalty = match cfg.actor_mode {
        ActorMode::MseRegression => ctx.schedule.beta(t),
        ActorMode::KlPenalty => slot.beta,
    };

    let (critic_up, actor_up, values_net) = match ctx.variant {
        Variant::Baseline => {
            let critic_up = train_critic(ctx.critic, &batch, cfg, lr, &critic_corr, &mut key(Purpose::CriticUpdate))?;
            compute_gae(&mut batch, &critic_up.net, cfg.gamma, cfg.gae_lambda)?;
            let values_net = batch.value_source.clone();
            let actor_up = train_actor(&policy, &batch, cfg, penalty, lr, &actor_corr, &mut key(Purpose::ActorUpdate))?;
            (critic_up, actor_up, values_net)
        }
        Variant::FedRac => {
            let values_net = batch.value_source.clone();
            let actor_up = train_actor(&policy, &batch, cfg, penalty, lr, &actor_corr, &mut key(Purpose::ActorUpdate))?;
            let critic_up = train_critic(ctx.critic, &batch, cfg, lr, &critic_corr, &mut key(Purpose::CriticUpdate))?;
            (critic_up, actor_up, values_net)
        }
    };

    let values_net = values_net.ok_or_else(|| Error::invalid("batch", "values were never filled"))?;
    let order = OrderCheck {
        rollout_used_global_actor,
        actor_values_from_global: same_bits(values_net.params(), ctx.critic.params()),
        actor_values_from_local: same_bits(values_net.params(), critic_up.net.params()),
        critic_moved: !same_bits(critic_up.net.params(), ctx.critic.params()),
    };

    let control = match scaffold {
        Some((c, ck)) => Some(ControlPair {
            actor: scaffold_client_control(
                &ck.actor,
                &c.actor,
                ctx.actor.params(),
                actor_up.update.net.params(),
                actor_up.update.steps,
                lr,
            ),
            critic: scaffold_client_control(
                &ck.critic,
                &c.critic,
                ctx.critic.params(),
                critic_up.net.params(),
                critic_up.steps,
                lr,
            ),
        }),
        None => None,
    };

    let first_last = |l: &[f64]| (l[0], *l.last().unwrap_or(&l[0]));
    let stats = ClientStats {
        client: slot.id,
        rollout_digest: digest,
        critic_loss: first_last(&critic_up.epoch_losses),
        actor_loss: first_last(&actor_up.update.epoch_losses),
        kl: actor_up.kl,
        actor_delta: l2_distance(actor_up.update.net.params(), ctx.actor.params()),
        critic_delta: l2_distance(critic_up.net.params(), ctx.critic.params()),
        order,
    };
    Ok(ClientResult {
        client: slot.id,
        actor: actor_up.update.net,
        critic: critic_up.net,
        data_count: slot.data_count,
        beta: actor_up.beta,
        control,
        stats,
        probe: probe(&batch),
    })
}
