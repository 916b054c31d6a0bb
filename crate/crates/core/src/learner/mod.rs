//! Deterministic-policy actor-critic learner over the product environment.

mod buffer;
mod ddpg;
mod mlp;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use ddpg::{
    act, actor_objective_grads, critic_loss_grads, soft_update, train, write_metrics_csv, Checkpoint, Ddpg,
    EpisodeRecord, NetDump, TrainResult, CHECKPOINT_SCHEMA_VERSION,
};
pub use mlp::{Grads, Mlp, Optimizer, OptimizerKind, Output, Trace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Bounds;
use crate::product::ProductState;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {what} at update {update}")]
    NonFinite { what: &'static str, update: usize },
    #[error("invalid learner config: {0}")]
    Config(String),
    #[error("checkpoint does not match environment: {0}")]
    Mismatch(String),
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub discount: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Exploration noise standard deviation at the first step.
    pub noise_std: f64,
    /// Standard deviation reached (linearly) at the last training step.
    pub noise_final_std: f64,
    /// Uniform random actions and no updates before this many steps.
    pub warmup_steps: usize,
    #[serde(default = "default_hidden")]
    pub actor_hidden: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub critic_hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            discount: 0.99,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            tau: 0.005,
            batch_size: 64,
            buffer_capacity: 100_000,
            noise_std: 0.2,
            noise_final_std: 0.0,
            warmup_steps: 1000,
            actor_hidden: default_hidden(),
            critic_hidden: default_hidden(),
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::Config(m.to_string()));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0 && self.actor_lr.is_finite() && self.critic_lr.is_finite()) {
            return bad("learning rates must be finite and non-negative");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch size and buffer capacity must be positive");
        }
        if !(self.noise_std >= 0.0 && self.noise_final_std >= 0.0) {
            return bad("noise scales must be non-negative");
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }
}

/// Network input dimension for `n_states` automaton states and `m` sets.
pub fn state_dim(n_states: usize, m: usize) -> usize {
    4 + n_states + m
}

/// `[x/hx, y/hy, sin θ, cos θ]`, one-hot `q`, then the visit bits, where
/// `hx`, `hy` are the workspace half-widths.
pub fn encode_state(ps: &ProductState, n_states: usize, bounds: &Bounds) -> Vec<f64> {
    let mut out = Vec::with_capacity(state_dim(n_states, ps.v.len()));
    encode_into(&mut out, ps, n_states, bounds);
    out
}

pub(crate) fn encode_into(out: &mut Vec<f64>, ps: &ProductState, n_states: usize, bounds: &Bounds) {
    let hx = 0.5 * (bounds.x[1] - bounds.x[0]);
    let hy = 0.5 * (bounds.y[1] - bounds.y[0]);
    out.clear();
    out.push(ps.s.x / hx);
    out.push(ps.s.y / hy);
    out.push(ps.s.theta.sin());
    out.push(ps.s.theta.cos());
    out.extend((0..n_states).map(|q| if q == ps.q { 1.0 } else { 0.0 }));
    out.extend((0..ps.v.len()).map(|i| if ps.v.get(i) { 1.0 } else { 0.0 }));
}
