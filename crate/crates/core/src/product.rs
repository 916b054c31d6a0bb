//! Episodic product of the car workspace with an annotated LDBA.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::automata::{EdgeId, StateId};
use crate::env::{distance_to_regions, CarAction, CarState, Labeler, Rect, Workspace};
use crate::shaping::{annotate_over, reward, update_visits, AnnotatedLdba, RewardParams, VisitVector};

/// How the automaton state is chosen at the start of an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QInit {
    RandomQ,
    FixedQ0,
}

impl std::str::FromStr for QInit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-q" => Ok(QInit::RandomQ),
            "fixed-q0" => Ok(QInit::FixedQ0),
            _ => Err(format!("unknown q-init mode {s:?} (expected random-q or fixed-q0)")),
        }
    }
}

impl std::fmt::Display for QInit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QInit::RandomQ => "random-q",
            QInit::FixedQ0 => "fixed-q0",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Running,
    Trap,
    AcceptedRound,
    StepLimit,
}

impl Termination {
    pub fn is_terminal(self) -> bool {
        self != Termination::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Running => "running",
            Termination::Trap => "trap",
            Termination::AcceptedRound => "accepted_round",
            Termination::StepLimit => "step_limit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductState {
    pub s: CarState,
    pub q: StateId,
    pub v: VisitVector,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: ProductState,
    pub reward: f64,
    pub terminated: Termination,
    pub edge_taken: EdgeId,
    /// The automaton state reached by an ε-move before the symbol step.
    pub epsilon_to: Option<StateId>,
}

/// Product environment; immutable and shareable across episodes.
#[derive(Clone, Debug)]
pub struct ProductEnv {
    workspace: Workspace,
    automaton: AnnotatedLdba,
    labeler: Labeler,
    params: RewardParams,
    max_steps: usize,
    noise_std: f64,
    /// `progress[q][v_bits]`, when the visit space is small enough to tabulate
    progress: Option<Vec<Vec<Vec<Rect>>>>,
}

const TABULATE_MAX_SETS: usize = 8;

impl ProductEnv {
    /// Annotates `ldba` over the labels realizable in `workspace`.
    pub fn new(
        workspace: Workspace,
        ldba: &crate::automata::Ldba,
        params: RewardParams,
        max_steps: usize,
    ) -> Self {
        let labeler = Labeler::new(&workspace, ldba.ap());
        let automaton = annotate_over(ldba, &labeler.realizable());
        let mut env =
            ProductEnv { workspace, automaton, labeler, params, max_steps, noise_std: 0.0, progress: None };
        let m = env.automaton.num_sets();
        if m <= TABULATE_MAX_SETS {
            let table = (0..env.automaton.ldba().num_states())
                .map(|q| (0..1u32 << m).map(|bits| env.compute_progress(q, VisitVector::from_bits(bits, m))).collect())
                .collect();
            env.progress = Some(table);
        }
        env
    }

    /// Additive Gaussian noise on (x, y) after each dynamics step, applied by
    /// [`ProductEnv::step_noisy`].
    pub fn with_noise(mut self, std: f64) -> Self {
        self.noise_std = std;
        self
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn automaton(&self) -> &AnnotatedLdba {
        &self.automaton
    }

    pub fn labeler(&self) -> &Labeler {
        &self.labeler
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn num_states(&self) -> usize {
        self.automaton.ldba().num_states()
    }

    pub fn num_sets(&self) -> usize {
        self.automaton.num_sets()
    }

    fn compute_progress(&self, q: StateId, v: VisitVector) -> Vec<Rect> {
        self.labeler.cells_where(|sigma| self.automaton.is_progress_label(q, v, sigma))
    }

    /// Cells of the workspace whose label would fire an annotated edge of `q`.
    pub fn progress_set(&self, q: StateId, v: VisitVector) -> Vec<Rect> {
        match &self.progress {
            Some(t) => t[q][v.bits() as usize].clone(),
            None => self.compute_progress(q, v),
        }
    }

    fn progress_distance(&self, s: &CarState, q: StateId, v: VisitVector) -> Option<f64> {
        match &self.progress {
            Some(t) => distance_to_regions(s, &t[q][v.bits() as usize]).ok(),
            None => distance_to_regions(s, &self.compute_progress(q, v)).ok(),
        }
    }

    /// Non-trap automaton states, the support of random initialization.
    pub fn init_states(&self) -> Vec<StateId> {
        (0..self.num_states()).filter(|&q| !self.automaton.is_trap(q)).collect()
    }

    pub fn reset(&self, rng: &mut impl Rng, mode: QInit) -> ProductState {
        let b = &self.workspace.bounds;
        let s = CarState::new(rng.gen_range(b.x[0]..=b.x[1]), rng.gen_range(b.y[0]..=b.y[1]), rng.gen_range(b.theta[0]..=b.theta[1]));
        let q = match mode {
            QInit::FixedQ0 => self.automaton.ldba().initial(),
            QInit::RandomQ => {
                let support = self.init_states();
                if support.is_empty() {
                    self.automaton.ldba().initial()
                } else {
                    support[rng.gen_range(0..support.len())]
                }
            }
        };
        self.reset_at(s, q)
    }

    pub fn reset_at(&self, s: CarState, q: StateId) -> ProductState {
        ProductState { s, q, v: VisitVector::ones(self.num_sets()), steps: 0 }
    }

    pub fn epsilon_options(&self, ps: &ProductState) -> Vec<StateId> {
        self.automaton.ldba().eps_successors(ps.q).collect()
    }

    /// The ε-successor taken by the greedy rule, if any: the first one with
    /// an annotated outgoing edge under the current visit vector.
    pub fn greedy_epsilon(&self, ps: &ProductState) -> Option<StateId> {
        self.automaton.ldba().eps_successors(ps.q).find(|&t| self.automaton.has_progress(t, ps.v))
    }

    pub fn step(&self, ps: &ProductState, a: CarAction) -> StepOutcome {
        self.step_with(ps, a, |s| s)
    }

    pub fn step_noisy(&self, ps: &ProductState, a: CarAction, rng: &mut impl Rng) -> StepOutcome {
        if self.noise_std <= 0.0 {
            return self.step(ps, a);
        }
        let normal = Normal::new(0.0, self.noise_std).expect("finite noise scale");
        let b = self.workspace.bounds;
        self.step_with(ps, a, |s| CarState {
            x: (s.x + normal.sample(rng)).clamp(b.x[0], b.x[1]),
            y: (s.y + normal.sample(rng)).clamp(b.y[0], b.y[1]),
            theta: s.theta,
        })
    }

    fn step_with(&self, ps: &ProductState, a: CarAction, perturb: impl FnOnce(CarState) -> CarState) -> StepOutcome {
        let ldba = self.automaton.ldba();
        let epsilon_to = self.greedy_epsilon(ps);
        let q = epsilon_to.unwrap_or(ps.q);
        let sigma = self.labeler.valuation(ps.s.x, ps.s.y);
        let e = ldba.step(q, sigma);
        let q_next = ldba.edge(e).dst;
        let r = reward(&self.automaton, ps.v, e, || self.progress_distance(&ps.s, q, ps.v), &self.params);
        let s_next = perturb(self.workspace.step(ps.s, a));
        let (v_next, accepted) = update_visits(ps.v, e, &self.automaton);
        let steps = ps.steps + 1;
        let terminated = if self.automaton.is_trap(q_next) {
            Termination::Trap
        } else if accepted {
            Termination::AcceptedRound
        } else if steps >= self.max_steps {
            Termination::StepLimit
        } else {
            Termination::Running
        };
        StepOutcome {
            next: ProductState { s: s_next, q: q_next, v: v_next, steps },
            reward: r,
            terminated,
            edge_taken: e,
            epsilon_to,
        }
    }

    /// Runs `policy` from `start` until the episode terminates, returning the
    /// outcomes in order.
    pub fn rollout(&self, start: ProductState, mut policy: impl FnMut(&ProductState) -> CarAction) -> Vec<StepOutcome> {
        let mut out = Vec::new();
        let mut ps = start;
        loop {
            let o = self.step(&ps, policy(&ps));
            out.push(o);
            if o.terminated.is_terminal() {
                return out;
            }
            ps = o.next;
        }
    }
}

/// One row of a trajectory log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub q: StateId,
    pub reward: f64,
    #[serde(rename = "V_bits")]
    pub v_bits: String,
    pub event: String,
}

/// Rows for an episode: the start state (event `reset`) followed by each
/// reached state with the reward of the step that produced it.
pub fn trajectory_rows(start: &ProductState, outcomes: &[StepOutcome]) -> Vec<TrajectoryRow> {
    let row = |ps: &ProductState, reward: f64, event: &str| TrajectoryRow {
        step: ps.steps,
        x: ps.s.x,
        y: ps.s.y,
        theta: ps.s.theta,
        q: ps.q,
        reward,
        v_bits: ps.v.to_bit_string(),
        event: event.to_string(),
    };
    let mut rows = vec![row(start, 0.0, "reset")];
    for o in outcomes {
        let event = match (o.epsilon_to, o.terminated) {
            (Some(_), Termination::Running) => "epsilon",
            (_, t) => t.as_str(),
        };
        rows.push(row(&o.next, o.reward, event));
    }
    rows
}

pub fn write_trajectory_csv(w: impl Write, rows: &[TrajectoryRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
