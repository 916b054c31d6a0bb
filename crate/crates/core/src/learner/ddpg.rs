use std::io::Write;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{encode_into, state_dim, Batch, Grads, LearnerConfig, LearnerError, Mlp, Optimizer, Output, ReplayBuffer};
use crate::env::CarAction;
use crate::product::{ProductEnv, QInit, Termination};

pub const ACTION_DIM: usize = 2;
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Deterministic action plus clipped Gaussian noise of scale `noise_std`.
pub fn act(actor: &Mlp, x: &[f64], noise_std: f64, rng: &mut impl Rng) -> CarAction {
    let out = actor.forward_one(x);
    let mut noisy = |u: f64| {
        let n: f64 = if noise_std > 0.0 { noise_std * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        (u + n).clamp(-1.0, 1.0)
    };
    let v = noisy(out[0]);
    let phi = noisy(out[1]);
    CarAction::new(v, phi)
}

fn critic_input(s: ArrayView2<f64>, a: ArrayView2<f64>) -> Array2<f64> {
    concatenate![Axis(1), s, a]
}

/// Mean squared Bellman error against the target networks and its gradient
/// with respect to the critic parameters. Terminal transitions use `y = r`.
pub fn critic_loss_grads(critic: &Mlp, target_actor: &Mlp, target_critic: &Mlp, batch: &Batch, discount: f64) -> (f64, Grads) {
    let n = batch.len() as f64;
    let a2 = target_actor.forward(batch.s2.view());
    let q2 = target_critic.forward(critic_input(batch.s2.view(), a2.view()).view());
    let y = &batch.r + &(q2.column(0).to_owned() * (1.0 - &batch.done) * discount);
    let trace = critic.forward_trace(critic_input(batch.s.view(), batch.a.view()).view());
    let err = &trace.output().column(0) - &y;
    let loss = err.mapv(|e| e * e).sum() / n;
    let grad_out = (err * (2.0 / n)).insert_axis(Axis(1));
    let (g, _) = critic.backward(&trace, &grad_out);
    (loss, g)
}

/// Mean of `Q(s, π(s))` over the batch and its gradient with respect to
/// the actor parameters, taken through the critic's action input.
pub fn actor_objective_grads(actor: &Mlp, critic: &Mlp, batch: &Batch) -> (f64, Grads) {
    let n = batch.len() as f64;
    let at = actor.forward_trace(batch.s.view());
    let ct = critic.forward_trace(critic_input(batch.s.view(), at.output().view()).view());
    let objective = ct.output().sum() / n;
    let (_, dx) = critic.backward(&ct, &Array2::from_elem((batch.len(), 1), 1.0 / n));
    let sd = batch.s.ncols();
    let da = dx.slice(s![.., sd..]).to_owned();
    let (g, _) = actor.backward(&at, &da);
    (objective, g)
}

pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), LearnerError> {
    target.soft_update_from(online, tau)
}

fn negate(g: &mut Grads) {
    g.w.iter_mut().for_each(|w| w.mapv_inplace(|x| -x));
    g.b.iter_mut().for_each(|b| b.mapv_inplace(|x| -x));
}

/// Actor, critic, their target copies and optimizer state.
#[derive(Clone, Debug)]
pub struct Ddpg {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    cfg: LearnerConfig,
    updates: usize,
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
}

impl Ddpg {
    pub fn new(state_dim: usize, cfg: &LearnerConfig, rng: &mut impl Rng) -> Self {
        let actor = Mlp::new(&layer_sizes(state_dim, &cfg.actor_hidden, ACTION_DIM), Output::ScaledTanh { bound: 1.0 }, rng);
        let critic = Mlp::new(&layer_sizes(state_dim + ACTION_DIM, &cfg.critic_hidden, 1), Output::Identity, rng);
        Self::from_networks(actor, critic, cfg)
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, cfg: &LearnerConfig) -> Self {
        Ddpg {
            actor_opt: Optimizer::new(cfg.optimizer, &actor),
            critic_opt: Optimizer::new(cfg.optimizer, &critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            cfg: cfg.clone(),
            updates: 0,
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn act(&self, x: &[f64], noise_std: f64, rng: &mut impl Rng) -> CarAction {
        act(&self.actor, x, noise_std, rng)
    }

    /// One critic descent step; returns the loss before the step.
    pub fn critic_update(&mut self, batch: &Batch) -> Result<f64, LearnerError> {
        let (loss, g) = critic_loss_grads(&self.critic, &self.target_actor, &self.target_critic, batch, self.cfg.discount);
        if !loss.is_finite() {
            return Err(LearnerError::NonFinite { what: "critic loss", update: self.updates });
        }
        self.critic_opt.step(&mut self.critic, &g, self.cfg.critic_lr);
        if !self.critic.is_finite() {
            return Err(LearnerError::NonFinite { what: "critic parameters", update: self.updates });
        }
        Ok(loss)
    }

    /// One actor ascent step; returns the objective before the step.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64, LearnerError> {
        let (obj, mut g) = actor_objective_grads(&self.actor, &self.critic, batch);
        if !obj.is_finite() {
            return Err(LearnerError::NonFinite { what: "actor objective", update: self.updates });
        }
        negate(&mut g);
        self.actor_opt.step(&mut self.actor, &g, self.cfg.actor_lr);
        if !self.actor.is_finite() {
            return Err(LearnerError::NonFinite { what: "actor parameters", update: self.updates });
        }
        Ok(obj)
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.cfg.tau;
        self.target_actor.soft_update_from(&self.actor, tau).expect("same architecture");
        self.target_critic.soft_update_from(&self.critic, tau).expect("same architecture");
    }

    /// Critic step, actor step, target blend.
    pub fn update(&mut self, batch: &Batch) -> Result<(f64, f64), LearnerError> {
        let loss = self.critic_update(batch)?;
        let obj = self.actor_update(batch)?;
        self.soft_update_targets();
        self.updates += 1;
        Ok((loss, obj))
    }

    pub fn checkpoint(&self, n_states: usize, n_sets: usize) -> Checkpoint {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            n_states,
            n_sets,
            actor: NetDump::of(&self.actor),
            critic: NetDump::of(&self.critic),
        }
    }
}

/// Layer sizes, output kind and flattened parameters of a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetDump {
    pub sizes: Vec<usize>,
    pub output: Output,
    pub params: Vec<f64>,
}

impl NetDump {
    pub fn of(net: &Mlp) -> Self {
        NetDump { sizes: net.sizes().to_vec(), output: net.output_kind(), params: net.params_flat() }
    }

    pub fn to_mlp(&self) -> Result<Mlp, LearnerError> {
        Mlp::from_flat(&self.sizes, self.output, &self.params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub n_states: usize,
    pub n_sets: usize,
    pub actor: NetDump,
    pub critic: NetDump,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(LearnerError::Mismatch(format!("unsupported checkpoint schema {}", c.schema_version)));
        }
        Ok(c)
    }

    /// The actor, checked against the environment's encoding.
    pub fn actor_for(&self, env: &ProductEnv) -> Result<Mlp, LearnerError> {
        if self.n_states != env.num_states() || self.n_sets != env.num_sets() {
            return Err(LearnerError::Mismatch(format!(
                "checkpoint has {} states / {} sets, automaton has {} / {}",
                self.n_states,
                self.n_sets,
                env.num_states(),
                env.num_sets()
            )));
        }
        let actor = self.actor.to_mlp()?;
        let want = state_dim(env.num_states(), env.num_sets());
        if actor.sizes()[0] != want || *actor.sizes().last().unwrap() != ACTION_DIM {
            return Err(LearnerError::Mismatch(format!("actor input {} != {want}", actor.sizes()[0])));
        }
        Ok(actor)
    }
}

/// Summary of one training episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Global step count when the episode ended.
    pub step: usize,
    pub episode: usize,
    pub ret: f64,
    pub length: usize,
    pub start_q: usize,
    pub termination: Termination,
    pub epsilon_used: usize,
}

impl EpisodeRecord {
    pub fn accepted(&self) -> bool {
        self.termination == Termination::AcceptedRound
    }
}

pub struct TrainResult {
    pub agent: Ddpg,
    pub episodes: Vec<EpisodeRecord>,
}

fn noise_at(cfg: &LearnerConfig, t: usize, steps: usize) -> f64 {
    let frac = if steps <= 1 { 0.0 } else { t as f64 / (steps - 1) as f64 };
    cfg.noise_std + (cfg.noise_final_std - cfg.noise_std) * frac
}

/// Runs `steps` environment steps of actor-critic training. All randomness
/// comes from one ChaCha8 stream seeded with `cfg.seed`, so identical inputs
/// give bit-identical results. The episode still running when the budget
/// ends is not recorded.
pub fn train(env: &ProductEnv, cfg: &LearnerConfig, mode: QInit, steps: usize) -> Result<TrainResult, LearnerError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_states = env.num_states();
    let dim = state_dim(n_states, env.num_sets());
    let bounds = env.workspace().bounds;
    let mut agent = Ddpg::new(dim, cfg, &mut rng);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, dim, ACTION_DIM);
    let mut episodes = Vec::new();
    let mut ps = env.reset(&mut rng, mode);
    let (mut ret, mut eps_used, mut start_q) = (0.0, 0usize, ps.q);
    let (mut x, mut x2) = (Vec::with_capacity(dim), Vec::with_capacity(dim));
    for t in 0..steps {
        encode_into(&mut x, &ps, n_states, &bounds);
        let a = if t < cfg.warmup_steps {
            CarAction::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
        } else {
            agent.act(&x, noise_at(cfg, t, steps), &mut rng)
        };
        let o = env.step_noisy(&ps, a, &mut rng);
        encode_into(&mut x2, &o.next, n_states, &bounds);
        let terminal = matches!(o.terminated, Termination::Trap | Termination::AcceptedRound);
        buffer.push(&x, &[a.v, a.phi], o.reward, &x2, terminal);
        if t >= cfg.warmup_steps && buffer.len() >= cfg.batch_size {
            let batch = buffer.sample(&mut rng, cfg.batch_size);
            agent.update(&batch)?;
        }
        ret += o.reward;
        eps_used += o.epsilon_to.is_some() as usize;
        if o.terminated.is_terminal() {
            episodes.push(EpisodeRecord {
                step: t + 1,
                episode: episodes.len(),
                ret,
                length: o.next.steps,
                start_q,
                termination: o.terminated,
                epsilon_used: eps_used,
            });
            ps = env.reset(&mut rng, mode);
            ret = 0.0;
            eps_used = 0;
            start_q = ps.q;
        } else {
            ps = o.next;
        }
    }
    Ok(TrainResult { agent, episodes })
}

/// Metrics CSV `(step, episode, return, normalized_return, accepted,
/// epsilon_used)`. `normalized_return` is the per-step return min-max scaled
/// over the run (0 when all episodes are equal).
pub fn write_metrics_csv(w: impl Write, episodes: &[EpisodeRecord]) -> Result<(), LearnerError> {
    let per_step: Vec<f64> = episodes.iter().map(|e| e.ret / e.length.max(1) as f64).collect();
    let lo = per_step.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_step.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "episode", "return", "normalized_return", "accepted", "epsilon_used"])?;
    for (e, p) in episodes.iter().zip(&per_step) {
        let norm = if hi > lo { (p - lo) / (hi - lo) } else { 0.0 };
        out.write_record([
            e.step.to_string(),
            e.episode.to_string(),
            e.ret.to_string(),
            norm.to_string(),
            (e.accepted() as u8).to_string(),
            e.epsilon_used.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
