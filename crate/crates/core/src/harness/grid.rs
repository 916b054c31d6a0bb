//! Finite gridworld product and a value-iteration oracle for the shaped
//! reward.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{Ldba, StateId, Valuation};
use crate::shaping::{annotate_over, reward, update_visits, AnnotatedLdba, RewardParams, VisitVector};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("grid has no cells")]
    Empty,
    #[error("cell ({0}, {1}) lies outside the grid")]
    OutOfRange(usize, usize),
    #[error("wall cell ({0}, {1}) carries a label")]
    LabeledWall(usize, usize),
    #[error("label {0:?} is not a proposition of the automaton")]
    UnknownLabel(String),
    #[error("product has {0} states, more than the limit {1}")]
    TooLarge(usize, usize),
    #[error("value iteration did not reach tolerance in {0} sweeps")]
    NoConvergence(usize),
}

/// Limit on cells × automaton states.
pub const MAX_CELLS_TIMES_STATES: usize = 100_000;
/// Limit on the number of acceptance sets.
pub const MAX_SETS: usize = 8;
pub const MAX_SWEEPS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridMove {
    Up,
    Right,
    Down,
    Left,
}

impl GridMove {
    /// Tie-breaking order of greedy action selection.
    pub const ALL: [GridMove; 4] = [GridMove::Up, GridMove::Right, GridMove::Down, GridMove::Left];

    fn delta(self) -> (i64, i64) {
        match self {
            GridMove::Up => (0, 1),
            GridMove::Right => (1, 0),
            GridMove::Down => (0, -1),
            GridMove::Left => (-1, 0),
        }
    }
}

/// `width × height` cells addressed as `[x, y]` with `y` growing upward.
/// Moves are deterministic and 4-connected; a move off the grid or into a
/// wall leaves the agent in place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gridworld {
    pub width: usize,
    pub height: usize,
    /// Proposition name to the cells where it holds.
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<[usize; 2]>>,
    #[serde(default)]
    pub walls: Vec<[usize; 2]>,
}

impl Gridworld {
    pub fn from_json(text: &str) -> Result<Self, OracleError> {
        let g: Gridworld = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OracleError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.width == 0 || self.height == 0 {
            return Err(OracleError::Empty);
        }
        let check = |c: &[usize; 2]| if c[0] < self.width && c[1] < self.height { Ok(()) } else { Err(OracleError::OutOfRange(c[0], c[1])) };
        for c in self.labels.values().flatten().chain(&self.walls) {
            check(c)?;
        }
        for c in self.labels.values().flatten() {
            if self.walls.contains(c) {
                return Err(OracleError::LabeledWall(c[0], c[1]));
            }
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, c: usize) -> (usize, usize) {
        (c % self.width, c / self.width)
    }

    pub fn is_wall(&self, c: usize) -> bool {
        let (x, y) = self.coords(c);
        self.walls.contains(&[x, y])
    }

    pub fn neighbor(&self, c: usize, m: GridMove) -> usize {
        let (x, y) = self.coords(c);
        let (dx, dy) = m.delta();
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return c;
        }
        let n = self.cell(nx as usize, ny as usize);
        if self.is_wall(n) {
            c
        } else {
            n
        }
    }

    /// Label of every cell as a valuation over `ap`.
    pub fn valuations(&self, ap: &[String]) -> Result<Vec<Valuation>, OracleError> {
        let mut out = vec![Valuation::EMPTY; self.num_cells()];
        for (name, cells) in &self.labels {
            let bit = ap.iter().position(|p| p == name).ok_or_else(|| OracleError::UnknownLabel(name.clone()))?;
            for c in cells {
                let k = self.cell(c[0], c[1]);
                out[k] = out[k].with(bit);
            }
        }
        Ok(out)
    }

    /// `ldba` annotated over the labels that occur on free cells.
    pub fn annotate(&self, ldba: &Ldba) -> Result<AnnotatedLdba, OracleError> {
        let vals = self.valuations(ldba.ap())?;
        let mut alphabet: Vec<Valuation> = (0..self.num_cells()).filter(|&c| !self.is_wall(c)).map(|c| vals[c]).collect();
        alphabet.sort();
        alphabet.dedup();
        Ok(annotate_over(ldba, &alphabet))
    }

    pub fn manhattan(&self, a: usize, b: usize) -> usize {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx) + ay.abs_diff(by)
    }
}

/// Flat index of product states `(cell, q, V)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProductIndex {
    pub cells: usize,
    pub states: usize,
    pub sets: usize,
}

impl ProductIndex {
    pub fn len(&self) -> usize {
        self.cells * self.states << self.sets
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, cell: usize, q: StateId, bits: u32) -> usize {
        ((cell * self.states + q) << self.sets) + bits as usize
    }

    pub fn decode(&self, i: usize) -> (usize, StateId, u32) {
        let bits = (i & ((1 << self.sets) - 1)) as u32;
        let rest = i >> self.sets;
        (rest / self.states, rest % self.states, bits)
    }
}

/// One product step from a state, shared by every move except for the
/// next cell.
#[derive(Clone, Copy, Debug)]
struct Step {
    reward: f64,
    q_next: StateId,
    bits_next: u32,
    accepted: bool,
    trap: bool,
}

struct Model<'a> {
    gw: &'a Gridworld,
    index: ProductIndex,
    valid: Vec<bool>,
    steps: Vec<Option<Step>>,
}

impl<'a> Model<'a> {
    fn build(gw: &'a Gridworld, a: &AnnotatedLdba, params: &RewardParams) -> Result<Self, OracleError> {
        gw.validate()?;
        let ldba = a.ldba();
        let n_q = ldba.num_states();
        let m = a.num_sets();
        if gw.num_cells() * n_q > MAX_CELLS_TIMES_STATES {
            return Err(OracleError::TooLarge(gw.num_cells() * n_q, MAX_CELLS_TIMES_STATES));
        }
        if m > MAX_SETS {
            return Err(OracleError::TooLarge(gw.num_cells() * n_q << m, MAX_CELLS_TIMES_STATES << MAX_SETS));
        }
        let vals = gw.valuations(ldba.ap())?;
        let free: Vec<usize> = (0..gw.num_cells()).filter(|&c| !gw.is_wall(c)).collect();
        let index = ProductIndex { cells: gw.num_cells(), states: n_q, sets: m };
        let mut valid = vec![false; index.len()];
        let mut steps = vec![None; index.len()];
        for &c in &free {
            for q0 in 0..n_q {
                if a.is_trap(q0) {
                    continue;
                }
                for bits in 1..(1u32 << m) {
                    let v = VisitVector::from_bits(bits, m);
                    let i = index.index(c, q0, bits);
                    valid[i] = true;
                    let q = ldba.eps_successors(q0).find(|&t| a.has_progress(t, v)).unwrap_or(q0);
                    let e = ldba.step(q, vals[c]);
                    let distance = || {
                        free.iter()
                            .filter(|&&t| a.is_progress_label(q, v, vals[t]))
                            .map(|&t| gw.manhattan(c, t) as f64)
                            .reduce(f64::min)
                    };
                    let r = reward(a, v, e, distance, params);
                    let q_next = ldba.edge(e).dst;
                    let (v_next, accepted) = update_visits(v, e, a);
                    steps[i] = Some(Step { reward: r, q_next, bits_next: v_next.bits(), accepted, trap: a.is_trap(q_next) });
                }
            }
        }
        Ok(Model { gw, index, valid, steps })
    }

    fn next(&self, i: usize, st: &Step, m: GridMove) -> usize {
        let (c, _, _) = self.index.decode(i);
        self.index.index(self.gw.neighbor(c, m), st.q_next, st.bits_next)
    }

    fn terminal(st: &Step) -> bool {
        st.trap || st.accepted
    }
}

/// Value-iteration outcome over all product states.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub index: ProductIndex,
    /// Free cell, non-trap automaton state, nonzero visit vector.
    pub valid: Vec<bool>,
    pub values: Vec<f64>,
    /// Greedy move; `None` where the episode ends after the current step.
    pub policy: Vec<Option<GridMove>>,
    /// The greedy policy completes an acceptance round from this state.
    pub satisfied: Vec<bool>,
    /// Some move sequence completes an acceptance round from this state.
    pub reachable: Vec<bool>,
    pub sweeps: usize,
    pub gamma: f64,
    next_cells: Vec<[usize; 4]>,
    steps: Vec<Option<(StateId, u32, bool, bool)>>,
}

impl OracleResult {
    /// Valid states where `satisfied` and `reachable` differ, as `(cell, q, bits)`.
    pub fn mismatches(&self) -> Vec<(usize, StateId, u32)> {
        (0..self.index.len())
            .filter(|&i| self.valid[i] && self.satisfied[i] != self.reachable[i])
            .map(|i| self.index.decode(i))
            .collect()
    }

    pub fn matches_ground_truth(&self) -> bool {
        self.mismatches().is_empty()
    }

    /// Product states visited by the greedy policy from `(cell, q, bits)`,
    /// ending with the state reached by the terminating step, if any.
    pub fn greedy_path(&self, cell: usize, q: StateId, bits: u32) -> Vec<(usize, StateId, u32)> {
        let mut i = self.index.index(cell, q, bits);
        let mut seen = vec![false; self.index.len()];
        let mut path = vec![self.index.decode(i)];
        while let Some((qn, bn, acc, trap)) = self.steps[i] {
            seen[i] = true;
            let c = self.index.decode(i).0;
            let nc = match self.policy[i] {
                Some(m) => self.next_cells[c][GridMove::ALL.iter().position(|&x| x == m).unwrap()],
                None => c,
            };
            i = self.index.index(nc, qn, bn);
            path.push(self.index.decode(i));
            if acc || trap || seen[i] {
                break;
            }
        }
        path
    }

    pub fn count_satisfied(&self) -> usize {
        self.satisfied.iter().zip(&self.valid).filter(|(s, v)| **s && **v).count()
    }

    pub fn count_reachable(&self) -> usize {
        self.reachable.iter().zip(&self.valid).filter(|(s, v)| **s && **v).count()
    }
}

/// States from which some move sequence fires an acceptance round without
/// first entering a trap.
pub fn bfs_ground_truth(gw: &Gridworld, a: &AnnotatedLdba) -> Result<Vec<bool>, OracleError> {
    let params = RewardParams { r_g: 0.0, r_n: 0.0, r_d: 0.0, d_max: 0.0 };
    let model = Model::build(gw, a, &params)?;
    Ok(reachability(&model))
}

fn reachability(model: &Model) -> Vec<bool> {
    let n = model.index.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut good = vec![false; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        let Some(st) = model.steps[i] else { continue };
        if st.accepted && !st.trap {
            good[i] = true;
            queue.push_back(i);
        } else if !Model::terminal(&st) {
            for m in GridMove::ALL {
                preds[model.next(i, &st, m)].push(i);
            }
        }
    }
    while let Some(j) = queue.pop_front() {
        for &p in &preds[j] {
            if !good[p] {
                good[p] = true;
                queue.push_back(p);
            }
        }
    }
    good
}

/// Value iteration with discount `gamma` on the gridworld product under the
/// shaped reward, with grid Manhattan distance to the progress cells.
/// Greedy ties go to the first move of [`GridMove::ALL`].
pub fn tabular_oracle(
    gw: &Gridworld,
    a: &AnnotatedLdba,
    params: &RewardParams,
    gamma: f64,
    tol: f64,
) -> Result<OracleResult, OracleError> {
    let model = Model::build(gw, a, params)?;
    let n = model.index.len();
    let mut values = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        if sweeps == MAX_SWEEPS {
            return Err(OracleError::NoConvergence(MAX_SWEEPS));
        }
        sweeps += 1;
        let mut delta = 0.0f64;
        let mut fresh = values.clone();
        for i in 0..n {
            let Some(st) = model.steps[i] else { continue };
            let cont = if Model::terminal(&st) {
                0.0
            } else {
                GridMove::ALL.iter().map(|&m| values[model.next(i, &st, m)]).fold(f64::NEG_INFINITY, f64::max)
            };
            fresh[i] = st.reward + gamma * cont;
            delta = delta.max((fresh[i] - values[i]).abs());
        }
        values = fresh;
        if delta < tol {
            break;
        }
    }
    let mut policy = vec![None; n];
    for i in 0..n {
        let Some(st) = model.steps[i] else { continue };
        if Model::terminal(&st) {
            continue;
        }
        let mut best: Option<(GridMove, f64)> = None;
        for m in GridMove::ALL {
            let v = values[model.next(i, &st, m)];
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((m, v));
            }
        }
        policy[i] = best.map(|(m, _)| m);
    }
    let satisfied = simulate_greedy(&model, &policy);
    let reachable = reachability(&model);
    let next_cells = (0..gw.num_cells()).map(|c| GridMove::ALL.map(|m| gw.neighbor(c, m))).collect();
    let steps = model.steps.iter().map(|s| s.map(|s| (s.q_next, s.bits_next, s.accepted, s.trap))).collect();
    Ok(OracleResult { index: model.index, valid: model.valid, values, policy, satisfied, reachable, sweeps, gamma, next_cells, steps })
}

/// Follows the deterministic greedy policy from every state; success is an
/// acceptance round before a trap or a repeated state.
fn simulate_greedy(model: &Model, policy: &[Option<GridMove>]) -> Vec<bool> {
    let n = model.index.len();
    // 0 unknown, 1 on the current path, 2 success, 3 failure
    let mut status = vec![0u8; n];
    for start in 0..n {
        if model.steps[start].is_none() || status[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut i = start;
        let outcome = loop {
            match status[i] {
                1 => break 3,
                2 | 3 => break status[i],
                _ => {}
            }
            let Some(st) = model.steps[i] else { break 3 };
            if st.accepted && !st.trap {
                status[i] = 2;
                break 2;
            }
            if st.trap {
                status[i] = 3;
                break 3;
            }
            status[i] = 1;
            path.push(i);
            i = model.next(i, &st, policy[i].expect("non-terminal states have a move"));
        };
        for p in path {
            status[p] = outcome;
        }
    }
    status.iter().map(|&s| s == 2).collect()
}
