use super::aggregate::{aggregate, renormalize, scaffold_server_control, ControlPair};
use super::config::{BaseAlgo, TrainingConfig, Variant};
use super::round::{client_round, ClientResult, ClientSlot, ClientStats, RoundContext};
use crate::analysis::{
    brute_force_fed_optimum, discounted_visitation, exact_policy_eval, federated_objective, fedrac_value_target,
    measure_kappa, measure_linearization_error, measure_omega, policy_table, FedOptimum,
};
use crate::environments::{build_network, ClientEnv, ClientMeta, State, TabularMdp};
use crate::error::{Error, Result};
use crate::exec;
use crate::learners::make_policy;
use crate::numerics::Network;
use crate::policies::{stepwise_logratio_supnorm, Action, Policy};
use crate::rng::{Purpose, StreamKey};
use rand::Rng;
use std::time::Instant;

/// Server state between rounds.
#[derive(Debug, Clone)]
pub struct FederationState {
    /// Completed rounds.
    pub round: usize,
    pub horizon: usize,
    pub actor: Network,
    pub critic: Network,
    pub clients: Vec<ClientSlot>,
    pub variant: Variant,
    pub base_algo: BaseAlgo,
    /// Global SCAFFOLD `c`.
    pub control: Option<ControlPair>,
}

impl FederationState {
    pub fn weights(&self) -> Vec<f64> {
        self.clients.iter().map(|c| c.weight).collect()
    }
}

/// Per-round diagnostics; `None` where a quantity is undefined for the task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub kappa: Option<f64>,
    pub omega: Option<f64>,
    pub stepwise_logdiff: Option<f64>,
    pub linearization_error: Option<f64>,
    pub critic_eval_error: Option<f64>,
    pub fedrac_target_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RoundReport {
    /// Rounds completed, starting at 1.
    pub round: usize,
    pub participants: Vec<usize>,
    pub clients: Vec<ClientStats>,
    /// `Σ q_n η_n` of the new global policy from evaluation rollouts.
    pub mean_return: f64,
    pub return_stderr: f64,
    /// Exact federated objective of the new global policy (tabular only).
    pub exact_objective: Option<f64>,
    pub diagnostics: Diagnostics,
    pub wall_ms: f64,
}

/// Uniform sample of `k` distinct ids from `0..n`, sorted ascending.
pub fn sample_clients<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::invalid("participants", format!("need 1 <= K <= N = {n}, got {k}")));
    }
    let mut ids = rand::seq::index::sample(rng, n, k).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

struct TabularContext {
    mdps: Vec<TabularMdp>,
    optimum: FedOptimum,
    /// `(1 − γ) ρ_{π̂*,n}` per client.
    occupancy: Vec<Vec<f64>>,
}

/// Drives federated training one round at a time.
pub struct Trainer {
    cfg: TrainingConfig,
    state: FederationState,
    meta: Vec<ClientMeta>,
    tabular: Option<TabularContext>,
}

impl Trainer {
    pub fn new(cfg: TrainingConfig) -> Result<Self> {
        cfg.validate()?;
        let net = build_network(&cfg.network, &mut StreamKey::new(cfg.seed, Purpose::Network).rng())?;
        let env0 = &net.envs[0];
        let mut init = StreamKey::new(cfg.seed, Purpose::Init).rng();
        let actor = cfg.actor.build(env0.actor_dim(), &mut init)?;
        let critic = cfg.critic.build(env0.critic_dim(), &mut init)?;
        let control = (cfg.base_algo == BaseAlgo::Scaffold)
            .then(|| ControlPair::zeros(actor.num_params(), critic.num_params()));
        let clients = net
            .envs
            .iter()
            .zip(&net.meta)
            .map(|(env, m)| ClientSlot {
                id: m.id,
                env: env.clone(),
                data_count: m.data_count,
                weight: m.weight,
                beta: cfg.learner.beta_init,
                control: control.clone(),
            })
            .collect();
        let tabular = if cfg.network.family.is_tabular() {
            let mdps: Vec<TabularMdp> = net.envs.iter().filter_map(|e| e.tabular().cloned()).collect();
            let refs: Vec<&TabularMdp> = mdps.iter().collect();
            let optimum = brute_force_fed_optimum(&refs, &net.weights())?;
            let pi = optimum.table(mdps[0].n_actions);
            let occupancy = mdps
                .iter()
                .map(|m| {
                    discounted_visitation(m, &pi).map(|rho| rho.iter().map(|r| (1.0 - m.gamma) * r).collect())
                })
                .collect::<Result<_>>()?;
            Some(TabularContext {
                mdps,
                optimum,
                occupancy,
            })
        } else {
            None
        };
        let state = FederationState {
            round: 0,
            horizon: cfg.rounds,
            actor,
            critic,
            clients,
            variant: cfg.variant,
            base_algo: cfg.base_algo,
            control,
        };
        Ok(Self {
            cfg,
            state,
            meta: net.meta,
            tabular,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.cfg
    }

    pub fn state(&self) -> &FederationState {
        &self.state
    }

    pub fn meta(&self) -> &[ClientMeta] {
        &self.meta
    }

    /// Best deterministic federated policy (tabular only).
    pub fn optimum(&self) -> Option<&FedOptimum> {
        self.tabular.as_ref().map(|t| &t.optimum)
    }

    pub fn is_done(&self) -> bool {
        self.state.round >= self.cfg.rounds
    }

    /// Run one round and return its report.
    pub fn step(&mut self) -> Result<RoundReport> {
        if self.is_done() {
            return Err(Error::invalid("rounds", "training horizon already reached"));
        }
        let started = Instant::now();
        let t = self.state.round;
        let cfg = &self.cfg;
        let ids = sample_clients(
            self.state.clients.len(),
            cfg.participants,
            &mut StreamKey::new(cfg.seed, Purpose::Sampling).round(t).rng(),
        )?;
        let ctx = RoundContext {
            round: t,
            actor: &self.state.actor,
            critic: &self.state.critic,
            variant: cfg.variant,
            base_algo: cfg.base_algo,
            learner: &cfg.learner,
            schedule: &cfg.schedule,
            seed: cfg.seed,
            global_control: self.state.control.as_ref(),
        };
        let clients = &self.state.clients;
        let results: Vec<ClientResult> = exec::try_map(cfg.exec, &ids, |&id| client_round(&ctx, &clients[id]))?;

        let q = renormalize(&results.iter().map(|r| r.data_count).collect::<Vec<_>>())?;
        let actor = aggregate(&results.iter().map(|r| &r.actor).collect::<Vec<_>>(), &q)?;
        let critic = aggregate(&results.iter().map(|r| &r.critic).collect::<Vec<_>>(), &q)?;

        let diagnostics = if cfg.diagnostics {
            self.diagnostics(t, &results, &q, &actor, &critic)?
        } else {
            Diagnostics::default()
        };

        let n_clients = self.state.clients.len();
        if let Some(c) = &self.state.control {
            let mut actor_deltas = Vec::with_capacity(results.len());
            let mut critic_deltas = Vec::with_capacity(results.len());
            for r in &results {
                let old = self.state.clients[r.client].control.as_ref().expect("scaffold slot");
                let new = r.control.as_ref().expect("scaffold result");
                actor_deltas.push(new.actor.iter().zip(&old.actor).map(|(a, b)| a - b).collect::<Vec<_>>());
                critic_deltas.push(new.critic.iter().zip(&old.critic).map(|(a, b)| a - b).collect::<Vec<_>>());
            }
            self.state.control = Some(ControlPair {
                actor: scaffold_server_control(&c.actor, &as_slices(&actor_deltas), n_clients),
                critic: scaffold_server_control(&c.critic, &as_slices(&critic_deltas), n_clients),
            });
        }
        for r in &results {
            let slot = &mut self.state.clients[r.client];
            slot.beta = r.beta;
            if r.control.is_some() {
                slot.control = r.control.clone();
            }
        }

        self.state.actor = actor;
        self.state.critic = critic;
        self.state.round = t + 1;
        let (mean_return, return_stderr) = self.evaluate(&self.state.actor, t + 1)?;
        let exact_objective = match &self.tabular {
            Some(tab) => Some(self.exact_objective(tab, &self.state.actor, t + 1)?),
            None => None,
        };
        Ok(RoundReport {
            round: t + 1,
            participants: ids,
            clients: results.into_iter().map(|r| r.stats).collect(),
            mean_return,
            return_stderr,
            exact_objective,
            diagnostics,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn policy(&self, actor: &Network, t: usize) -> Result<Policy> {
        make_policy(actor.clone(), &self.state.clients[0].env, &self.cfg.schedule, t)
    }

    fn exact_objective(&self, tab: &TabularContext, actor: &Network, t: usize) -> Result<f64> {
        let pi = policy_table(&self.policy(actor, t)?, &self.state.clients[0].env)?;
        let refs: Vec<&TabularMdp> = tab.mdps.iter().collect();
        federated_objective(&refs, &self.state.weights(), &pi)
    }

    /// `Σ q_n η_n` from fresh discounted-return episodes on every client.
    pub fn evaluate(&self, actor: &Network, t: usize) -> Result<(f64, f64)> {
        let cfg = &self.cfg;
        let episodes = cfg.eval_episodes;
        let per_client = exec::map_range(cfg.exec, self.state.clients.len(), |n| -> Result<(f64, f64)> {
            let slot = &self.state.clients[n];
            let policy = make_policy(actor.clone(), &slot.env, &cfg.schedule, t)?;
            let mut rng = StreamKey::new(cfg.seed, Purpose::Evaluation).client(n).round(t).rng();
            let returns = (0..episodes)
                .map(|_| episode_return(&slot.env, &policy, cfg.learner.gamma, &mut rng))
                .collect::<Result<Vec<f64>>>()?;
            let mean = returns.iter().sum::<f64>() / episodes as f64;
            let var = if episodes > 1 {
                returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (episodes - 1) as f64
            } else {
                0.0
            };
            Ok((mean, var))
        });
        let mut total = 0.0;
        let mut var = 0.0;
        for (slot, r) in self.state.clients.iter().zip(per_client) {
            let (m, v) = r?;
            total += slot.weight * m;
            var += slot.weight * slot.weight * v / episodes as f64;
        }
        Ok((total, var.sqrt()))
    }

    fn diagnostics(
        &self,
        t: usize,
        results: &[ClientResult],
        q: &[f64],
        actor: &Network,
        critic: &Network,
    ) -> Result<Diagnostics> {
        let env = &self.state.clients[0].env;
        let old = self.policy(&self.state.actor, t)?;
        let new = self.policy(actor, t)?;
        let locals: Vec<Policy> = results.iter().map(|r| new.with_net(r.actor.clone())).collect();

        // evaluation points, reference actions and per-participant weights
        let (states, actions, weights): (Vec<State>, Vec<Action>, Vec<Vec<f64>>) = match &self.tabular {
            Some(tab) => {
                let ns = tab.mdps[0].n_states;
                let states = (0..ns).map(State::Discrete).collect();
                let actions = tab.optimum.actions.iter().map(|&a| Action::Discrete(a)).collect();
                let weights = results.iter().map(|r| tab.occupancy[r.client].clone()).collect();
                (states, actions, weights)
            }
            None => {
                let total: usize = results.iter().map(|r| r.probe.states.len()).sum();
                let mut states = Vec::with_capacity(total);
                let mut actions = Vec::with_capacity(total);
                let mut weights = Vec::new();
                for r in results {
                    let mut w = vec![0.0; total];
                    let len = r.probe.states.len();
                    for slot in &mut w[states.len()..states.len() + len] {
                        *slot = 1.0 / len as f64;
                    }
                    weights.push(w);
                    states.extend(r.probe.states.iter().cloned());
                    actions.extend(r.probe.actions.iter().copied());
                }
                (states, actions, weights)
            }
        };
        let critic_x: Vec<Vec<f64>> = states.iter().map(|s| env.critic_input(s)).collect::<Result<_>>()?;
        let policy_x: Vec<Vec<f64>> = states.iter().map(|s| env.policy_input(s)).collect::<Result<_>>()?;

        let values: Vec<Vec<f64>> = results
            .iter()
            .map(|r| critic_x.iter().map(|x| r.critic.forward(x)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let kappa = measure_kappa(&values, q, &weights)?;

        let log_probs = |p: &Policy| -> Result<Vec<f64>> {
            policy_x.iter().zip(&actions).map(|(x, a)| p.log_prob(x, *a)).collect()
        };
        let global_lp = log_probs(&new)?;
        let local_lp: Vec<Vec<f64>> = locals.iter().map(log_probs).collect::<Result<_>>()?;
        let omega = measure_omega(&global_lp, &local_lp, q, &weights)?;

        let stepwise = stepwise_logratio_supnorm(&new, &old, &policy_x)?;

        let linearization = match actor.as_two_layer() {
            Some(net) => {
                let inputs: Vec<Vec<f64>> = match env.action_codes() {
                    Some(codes) => policy_x
                        .iter()
                        .flat_map(|x| codes.iter().map(move |c| [x.as_slice(), c.as_slice()].concat()))
                        .collect(),
                    None => policy_x.clone(),
                };
                Some(measure_linearization_error(net, &inputs)?)
            }
            None => None,
        };

        let (critic_eval_error, fedrac_target_error) = match &self.tabular {
            Some(tab) => {
                let pi = policy_table(&old, env)?;
                let weights_all = self.state.weights();
                let exact: Vec<Vec<f64>> = tab
                    .mdps
                    .iter()
                    .map(|m| exact_policy_eval(m, &pi).map(|(_, v)| v))
                    .collect::<Result<_>>()?;
                let v_global: Vec<f64> = critic_x.iter().map(|x| critic.eval(x)).collect();
                let ns = v_global.len() as f64;
                let eval_err: f64 = exact
                    .iter()
                    .zip(&weights_all)
                    .map(|(v, w)| w * v.iter().zip(&v_global).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / ns)
                    .sum();
                let target = fedrac_value_target(&weights_all, &tab.occupancy, &exact);
                let (mut sum, mut count) = (0.0, 0.0);
                for (tgt, v) in target.iter().zip(&v_global) {
                    if let Some(tgt) = tgt {
                        sum += (tgt - v).powi(2);
                        count += 1.0;
                    }
                }
                (Some(eval_err), (count > 0.0).then(|| sum / count))
            }
            None => (None, None),
        };

        Ok(Diagnostics {
            kappa: Some(kappa),
            omega: Some(omega),
            stepwise_logdiff: Some(stepwise),
            linearization_error: linearization,
            critic_eval_error,
            fedrac_target_error,
        })
    }
}

fn as_slices(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(Vec::as_slice).collect()
}

/// Discounted return of one episode, capped at the environment horizon.
fn episode_return<R: Rng + ?Sized>(env: &ClientEnv, policy: &Policy, gamma: f64, rng: &mut R) -> Result<f64> {
    let mut state = env.reset(rng);
    let mut g = 0.0;
    let mut w = 1.0;
    for _ in 0..env.horizon() {
        let x = env.policy_input(&state)?;
        let a = policy.sample(&x, rng)?;
        let step = env.step(&state, a, rng)?;
        g += w * step.reward;
        w *= gamma;
        if step.terminal {
            break;
        }
        state = step.next;
    }
    Ok(g)
}

/// Run all rounds, handing each report to `sink` as soon as it is ready.
pub fn run_training<F>(cfg: TrainingConfig, mut sink: F) -> Result<(FederationState, Vec<RoundReport>)>
where
    F: FnMut(&RoundReport) -> Result<()>,
{
    let mut trainer = Trainer::new(cfg)?;
    let mut reports = Vec::with_capacity(trainer.cfg.rounds);
    while !trainer.is_done() {
        let report = trainer.step()?;
        sink(&report)?;
        reports.push(report);
    }
    Ok((trainer.state, reports))
}
