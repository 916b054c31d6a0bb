//! Edge annotation, visit tracking and the shaped product reward.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{EdgeId, Ldba, StateId, Valuation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapingError {
    #[error("brute-force annotation supports at most {max} states, got {got}")]
    TooLarge { max: usize, got: usize },
    #[error("reward parameters must satisfy r_d < r_n < 0 < r_g (got r_g={r_g}, r_n={r_n}, r_d={r_d})")]
    Ordering { r_g: f64, r_n: f64, r_d: f64 },
    #[error("reward parameters must satisfy |r_n| <= |r_d|/{ratio} <= |r_g|/{ratio_sq}")]
    Magnitude { ratio: f64, ratio_sq: f64 },
    #[error("d_max must be positive and finite, got {0}")]
    BadDmax(f64),
    #[error("r_n * d_max = {0} falls below r_d; rewards would leave [r_d, r_g]")]
    DistanceRange(f64),
}

/// An LDBA together with its per-acceptance-set edge maps.
#[derive(Clone, Debug)]
pub struct AnnotatedLdba {
    ldba: Ldba,
    /// `b_maps[i][e]`
    b_maps: Vec<Vec<bool>>,
    traps: BTreeSet<StateId>,
    alphabet: Vec<Valuation>,
    live: Vec<bool>,
    /// `pure_negative[e]`: the guard holds on the empty valuation.
    pure_negative: Vec<bool>,
}

fn live_edges(ldba: &Ldba, alphabet: &[Valuation]) -> Vec<bool> {
    ldba.edges().iter().map(|e| alphabet.iter().any(|&v| e.guard.eval(v))).collect()
}

fn base_maps(ldba: &Ldba) -> Vec<Vec<bool>> {
    (0..ldba.num_sets())
        .map(|i| (0..ldba.edges().len()).map(|e| ldba.acceptance()[i].contains(&e)).collect())
        .collect()
}

impl AnnotatedLdba {
    fn assemble(ldba: Ldba, alphabet: Vec<Valuation>, b_maps: Vec<Vec<bool>>, traps: BTreeSet<StateId>) -> Self {
        let live = live_edges(&ldba, &alphabet);
        let pure_negative = ldba.edges().iter().map(|e| e.guard.eval(Valuation::EMPTY)).collect();
        AnnotatedLdba { ldba, b_maps, traps, alphabet, live, pure_negative }
    }

    pub fn ldba(&self) -> &Ldba {
        &self.ldba
    }

    pub fn b_maps(&self) -> &[Vec<bool>] {
        &self.b_maps
    }

    pub fn b(&self, i: usize, e: EdgeId) -> bool {
        self.b_maps[i][e]
    }

    pub fn traps(&self) -> &BTreeSet<StateId> {
        &self.traps
    }

    pub fn is_trap(&self, q: StateId) -> bool {
        self.traps.contains(&q)
    }

    /// Symbols the annotation treats as possible inputs.
    pub fn alphabet(&self) -> &[Valuation] {
        &self.alphabet
    }

    /// The edge carries at least one symbol of the alphabet.
    pub fn is_live(&self, e: EdgeId) -> bool {
        self.live[e]
    }

    pub fn num_sets(&self) -> usize {
        self.b_maps.len()
    }

    /// `q` has a live outgoing edge with `b = 1` under `v`.
    pub fn has_progress(&self, q: StateId, v: VisitVector) -> bool {
        self.ldba.out_edge_ids(q).any(|e| self.live[e] && b_value(self, v, e))
    }

    /// True iff a position labeled `sigma` lies in the progress set of `q`
    /// under `v`: some annotated outgoing edge whose guard excludes the empty
    /// label accepts `sigma`.
    pub fn is_progress_label(&self, q: StateId, v: VisitVector, sigma: Valuation) -> bool {
        self.ldba.out_edge_ids(q).any(|e| {
            self.live[e] && !self.pure_negative[e] && b_value(self, v, e) && self.ldba.edge(e).guard.eval(sigma)
        })
    }

    /// Audit dump `{states, edges, b_maps, traps}`.
    pub fn to_json(&self) -> serde_json::Value {
        let a = &self.ldba;
        let states: Vec<_> = (0..a.num_states())
            .map(|q| {
                serde_json::json!({
                    "id": q,
                    "name": a.state_name(q),
                    "part": a.part(q),
                    "initial": q == a.initial(),
                    "trap": self.is_trap(q),
                })
            })
            .collect();
        let edges: Vec<_> = a
            .edges()
            .iter()
            .enumerate()
            .map(|(id, e)| {
                let acc: Vec<usize> = (0..a.num_sets()).filter(|&i| a.edge_marks(id) >> i & 1 == 1).collect();
                serde_json::json!({
                    "id": id,
                    "src": e.src,
                    "dst": e.dst,
                    "guard": e.guard.to_string(),
                    "acc": acc,
                    "live": self.live[id],
                })
            })
            .collect();
        let b_maps: Vec<Vec<u8>> = self.b_maps.iter().map(|m| m.iter().map(|&b| b as u8).collect()).collect();
        serde_json::json!({
            "ap": a.ap(),
            "states": states,
            "edges": edges,
            "eps_edges": a.eps_edges(),
            "b_maps": b_maps,
            "traps": self.traps,
        })
    }
}

/// Annotation over the full alphabet 2^AP.
pub fn annotate(a: &Ldba) -> AnnotatedLdba {
    annotate_over(a, &a.valuations().collect::<Vec<_>>())
}

/// Backward marking by synchronous sweeps: each sweep reads `g` as it was at
/// the start of the sweep, so the result does not depend on state order.
/// Edges carrying no symbol of `alphabet` are not transitions.
pub fn annotate_over(a: &Ldba, alphabet: &[Valuation]) -> AnnotatedLdba {
    let live = live_edges(a, alphabet);
    let n = a.num_states();
    let mut b_maps = base_maps(a);
    let mut ever = vec![false; n];
    for (i, b) in b_maps.iter_mut().enumerate() {
        let mut g: Vec<bool> = (0..n).map(|q| a.out_edge_ids(q).any(|e| a.acceptance()[i].contains(&e))).collect();
        loop {
            let prev = g.clone();
            for q in (0..n).filter(|&q| !prev[q]) {
                for e in a.out_edge_ids(q) {
                    if live[e] && prev[a.edge(e).dst] {
                        b[e] = true;
                        g[q] = true;
                    }
                }
                if a.eps_successors(q).any(|d| prev[d]) {
                    g[q] = true;
                }
            }
            if g == prev {
                break;
            }
        }
        for q in 0..n {
            ever[q] |= g[q];
        }
    }
    let traps = (0..n).filter(|&q| !ever[q]).collect();
    AnnotatedLdba::assemble(a.clone(), alphabet.to_vec(), b_maps, traps)
}

pub const BRUTE_FORCE_MAX_STATES: usize = 12;

/// Independent reference for [`annotate_over`]: breadth-first distances to
/// the sources of each acceptance set over the reversed transition graph; an
/// edge is marked iff accepting or it strictly decreases the distance.
pub fn brute_force_annotation(a: &Ldba, alphabet: &[Valuation]) -> Result<AnnotatedLdba, ShapingError> {
    let n = a.num_states();
    if n > BRUTE_FORCE_MAX_STATES {
        return Err(ShapingError::TooLarge { max: BRUTE_FORCE_MAX_STATES, got: n });
    }
    let live = live_edges(a, alphabet);
    let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (e, edge) in a.edges().iter().enumerate() {
        if live[e] {
            reverse[edge.dst].push(edge.src);
        }
    }
    for &(src, dst) in a.eps_edges() {
        reverse[dst].push(src);
    }
    let mut b_maps = base_maps(a);
    let mut reach_any = vec![false; n];
    for (i, b) in b_maps.iter_mut().enumerate() {
        let mut dist: Vec<Option<usize>> = vec![None; n];
        let mut queue = VecDeque::new();
        for &e in &a.acceptance()[i] {
            let s = a.edge(e).src;
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(q) = queue.pop_front() {
            for &p in &reverse[q] {
                if dist[p].is_none() {
                    dist[p] = Some(dist[q].unwrap() + 1);
                    queue.push_back(p);
                }
            }
        }
        for (e, edge) in a.edges().iter().enumerate() {
            if let (true, Some(ds), Some(dd)) = (live[e], dist[edge.src], dist[edge.dst]) {
                if dd < ds {
                    b[e] = true;
                }
            }
        }
        for q in 0..n {
            reach_any[q] |= dist[q].is_some();
        }
    }
    let traps = (0..n).filter(|&q| !reach_any[q]).collect();
    Ok(AnnotatedLdba::assemble(a.clone(), alphabet.to_vec(), b_maps, traps))
}

/// Which acceptance sets still have to be crossed in the current round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisitVector {
    bits: u32,
    m: usize,
}

impl VisitVector {
    pub fn ones(m: usize) -> Self {
        assert!((1..=32).contains(&m), "acceptance set count {m} out of range");
        VisitVector { bits: Self::full(m), m }
    }

    fn full(m: usize) -> u32 {
        if m == 32 {
            u32::MAX
        } else {
            (1u32 << m) - 1
        }
    }

    pub fn from_bits(bits: u32, m: usize) -> Self {
        let v = Self::ones(m);
        VisitVector { bits: bits & v.bits, ..v }
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Slots as a 0/1 string, slot 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.m).map(|i| if self.get(i) { '1' } else { '0' }).collect()
    }
}

/// Clears the slots of every set containing `e`; a vector that becomes all
/// zero is reset to all ones and the round is reported as complete.
pub fn update_visits(v: VisitVector, e: EdgeId, a: &AnnotatedLdba) -> (VisitVector, bool) {
    let bits = v.bits & !a.ldba.edge_marks(e);
    if bits == 0 {
        (VisitVector::ones(v.m), true)
    } else {
        (VisitVector { bits, m: v.m }, false)
    }
}

/// `OR_i (b_i(e) AND V[i])`
pub fn b_value(a: &AnnotatedLdba, v: VisitVector, e: EdgeId) -> bool {
    (0..a.num_sets()).any(|i| a.b_maps[i][e] && v.get(i))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub r_g: f64,
    pub r_n: f64,
    pub r_d: f64,
    pub d_max: f64,
}

/// How strictly `|r_n| << |r_d| << |r_g|` is enforced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudePolicy {
    /// Required factor between consecutive magnitudes; `None` only checks
    /// the sign ordering.
    pub ratio: Option<f64>,
}

impl Default for MagnitudePolicy {
    fn default() -> Self {
        MagnitudePolicy { ratio: Some(10.0) }
    }
}

impl RewardParams {
    pub fn validate(&self, policy: MagnitudePolicy) -> Result<(), ShapingError> {
        let RewardParams { r_g, r_n, r_d, d_max } = *self;
        if !(r_d < r_n && r_n < 0.0 && 0.0 < r_g) || ![r_g, r_n, r_d].iter().all(|x| x.is_finite()) {
            return Err(ShapingError::Ordering { r_g, r_n, r_d });
        }
        if let Some(k) = policy.ratio {
            if !(r_n.abs() <= r_d.abs() / k && r_d.abs() / k <= r_g.abs() / (k * k)) {
                return Err(ShapingError::Magnitude { ratio: k, ratio_sq: k * k });
            }
        }
        if !(d_max > 0.0 && d_max.is_finite()) {
            return Err(ShapingError::BadDmax(d_max));
        }
        if r_n * d_max < r_d {
            return Err(ShapingError::DistanceRange(r_n * d_max));
        }
        Ok(())
    }
}

/// Shaped reward for taking edge `e` out of `q` under visit vector `v`
/// (before `v` is updated). `distance` returns the distance from the current
/// position to the progress set of `(q, v)`, or `None` when it is empty; it
/// is only called when needed. Entering a trap or leaving a state without
/// annotated edges yields `r_d`.
pub fn reward(
    a: &AnnotatedLdba,
    v: VisitVector,
    e: EdgeId,
    distance: impl FnOnce() -> Option<f64>,
    p: &RewardParams,
) -> f64 {
    let edge = a.ldba.edge(e);
    if !a.has_progress(edge.src, v) || a.is_trap(edge.dst) {
        return p.r_d;
    }
    if b_value(a, v, e) {
        return p.r_g;
    }
    let d = distance().unwrap_or(p.d_max);
    p.r_n * d
}
