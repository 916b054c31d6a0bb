//! Transition-based generalized Büchi automata, limit-deterministic automata,
//! HOA exchange, a fragment translator and a lasso-word acceptance oracle.

mod guard;
mod hoa;
mod ldba;
mod translate;

pub use guard::{Guard, Valuation};
pub use hoa::{emit_hoa, parse_hoa, parse_hoa_ldba};
pub use ldba::{accepts_lasso, validate_ldba, Ldba, LassoWord, LdbaError, Part};
pub use translate::{translate_fragment, FragmentError};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ltl::{is_valid_atom_name, AlphabetSymbol};

pub type StateId = usize;
pub type EdgeId = usize;

/// Alphabets larger than this are rejected; symbol-level semantics are
/// recovered by enumerating all 2^|AP| valuations.
pub const MAX_AP: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub src: StateId,
    pub guard: Guard,
    pub dst: StateId,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("automaton must have at least one state")]
    NoStates,
    #[error("initial state {0} out of range")]
    BadInitial(StateId),
    #[error("edge {edge} references state {state} out of range")]
    BadState { edge: EdgeId, state: StateId },
    #[error("edge {edge} guard references proposition index {ap} but only {n_ap} are declared")]
    BadGuardAp { edge: EdgeId, ap: usize, n_ap: usize },
    #[error("acceptance set {set} references edge {edge} out of range")]
    BadAcceptanceEdge { set: usize, edge: EdgeId },
    #[error("at least one acceptance set is required")]
    NoAcceptanceSets,
    #[error("at most 32 acceptance sets are supported, got {0}")]
    TooManyAcceptanceSets(usize),
    #[error("at most {MAX_AP} atomic propositions are supported, got {0}")]
    TooManyPropositions(usize),
    #[error("invalid atomic proposition name {0:?}")]
    BadPropositionName(String),
    #[error("duplicate atomic proposition {0:?}")]
    DuplicateProposition(String),
}

/// A TGBA with edge guards given as propositional formulas over `ap`.
///
/// Edges are kept grouped by source state (stable order); the acceptance
/// sets refer to edge indices in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tgba {
    ap: Vec<String>,
    num_states: usize,
    initial: StateId,
    edges: Vec<Edge>,
    acceptance: Vec<BTreeSet<EdgeId>>,
    state_names: Vec<Option<String>>,
    marks: Vec<u32>,
}

impl Tgba {
    pub fn new(
        ap: Vec<String>,
        num_states: usize,
        initial: StateId,
        edges: Vec<Edge>,
        acceptance: Vec<BTreeSet<EdgeId>>,
    ) -> Result<Self, AutomatonError> {
        if num_states == 0 {
            return Err(AutomatonError::NoStates);
        }
        if initial >= num_states {
            return Err(AutomatonError::BadInitial(initial));
        }
        if ap.len() > MAX_AP {
            return Err(AutomatonError::TooManyPropositions(ap.len()));
        }
        for (i, p) in ap.iter().enumerate() {
            if !is_valid_atom_name(p) {
                return Err(AutomatonError::BadPropositionName(p.clone()));
            }
            if ap[..i].contains(p) {
                return Err(AutomatonError::DuplicateProposition(p.clone()));
            }
        }
        if acceptance.is_empty() {
            return Err(AutomatonError::NoAcceptanceSets);
        }
        if acceptance.len() > 32 {
            return Err(AutomatonError::TooManyAcceptanceSets(acceptance.len()));
        }
        for (id, e) in edges.iter().enumerate() {
            for s in [e.src, e.dst] {
                if s >= num_states {
                    return Err(AutomatonError::BadState { edge: id, state: s });
                }
            }
            if let Some(max) = e.guard.max_ap() {
                if max >= ap.len() {
                    return Err(AutomatonError::BadGuardAp { edge: id, ap: max, n_ap: ap.len() });
                }
            }
        }
        for (set, members) in acceptance.iter().enumerate() {
            if let Some(&bad) = members.iter().find(|&&e| e >= edges.len()) {
                return Err(AutomatonError::BadAcceptanceEdge { set, edge: bad });
            }
        }

        // stable sort by source, remapping acceptance sets
        let mut order: Vec<EdgeId> = (0..edges.len()).collect();
        order.sort_by_key(|&i| edges[i].src);
        let mut new_index = vec![0; edges.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let acceptance: Vec<BTreeSet<EdgeId>> = acceptance
            .iter()
            .map(|s| s.iter().map(|&e| new_index[e]).collect())
            .collect();
        let mut slots: Vec<Option<Edge>> = edges.into_iter().map(Some).collect();
        let edges: Vec<Edge> = order.iter().map(|&i| slots[i].take().expect("each edge once")).collect();

        let mut marks = vec![0u32; edges.len()];
        for (i, set) in acceptance.iter().enumerate() {
            for &e in set {
                marks[e] |= 1 << i;
            }
        }
        Ok(Self {
            ap,
            num_states,
            initial,
            edges,
            acceptance,
            state_names: vec![None; num_states],
            marks,
        })
    }

    pub fn with_state_names(mut self, names: Vec<Option<String>>) -> Self {
        assert_eq!(names.len(), self.num_states);
        self.state_names = names;
        self
    }

    pub fn ap(&self) -> &[String] {
        &self.ap
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn acceptance(&self) -> &[BTreeSet<EdgeId>] {
        &self.acceptance
    }

    /// Number of acceptance sets m.
    pub fn num_sets(&self) -> usize {
        self.acceptance.len()
    }

    /// Bitmask of the acceptance sets containing edge `e`.
    pub fn edge_marks(&self, e: EdgeId) -> u32 {
        self.marks[e]
    }

    pub fn state_name(&self, q: StateId) -> Option<&str> {
        self.state_names[q].as_deref()
    }

    pub fn state_names(&self) -> &[Option<String>] {
        &self.state_names
    }

    pub fn num_valuations(&self) -> u32 {
        1 << self.ap.len()
    }

    pub fn valuations(&self) -> impl Iterator<Item = Valuation> {
        (0..self.num_valuations()).map(Valuation)
    }

    pub fn out_edge_ids(&self, q: StateId) -> impl Iterator<Item = EdgeId> + '_ {
        // edges are sorted by source
        let start = self.edges.partition_point(|e| e.src < q);
        let end = self.edges.partition_point(|e| e.src <= q);
        start..end
    }

    /// Edges leaving `q` whose guard holds under `v`.
    pub fn enabled(&self, q: StateId, v: Valuation) -> impl Iterator<Item = EdgeId> + '_ {
        self.out_edge_ids(q).filter(move |&e| self.edges[e].guard.eval(v))
    }

    pub fn valuation_of(&self, symbol: &AlphabetSymbol) -> Valuation {
        Valuation::from_names(&self.ap, symbol.0.iter().map(String::as_str))
    }

    pub fn symbol_of(&self, v: Valuation) -> AlphabetSymbol {
        AlphabetSymbol(
            self.ap
                .iter()
                .enumerate()
                .filter(|(i, _)| v.has(*i))
                .map(|(_, p)| p.clone())
                .collect(),
        )
    }

    /// Symbols σ with at least one σ-transition out of `q`.
    pub fn out_props(&self, q: StateId) -> BTreeSet<Valuation> {
        self.valuations().filter(|&v| self.enabled(q, v).next().is_some()).collect()
    }

    /// Edges out of `q` that carry at least one symbol.
    pub fn out_edges(&self, q: StateId) -> Vec<EdgeId> {
        self.out_edge_ids(q)
            .filter(|&e| self.valuations().any(|v| self.edges[e].guard.eval(v)))
            .collect()
    }

    /// True iff the two automata are equal up to a renaming of states, with
    /// guards compared as Boolean functions. Edge order within a state is
    /// ignored.
    pub fn is_isomorphic(&self, other: &Tgba) -> bool {
        if self.ap != other.ap
            || self.num_states != other.num_states
            || self.edges.len() != other.edges.len()
            || self.acceptance.len() != other.acceptance.len()
        {
            return false;
        }
        let n = self.num_states;
        let mut map: Vec<Option<StateId>> = vec![None; n];
        let mut used = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        fn bind(
            a: StateId,
            b: StateId,
            map: &mut [Option<StateId>],
            used: &mut [bool],
            queue: &mut std::collections::VecDeque<StateId>,
        ) -> bool {
            match map[a] {
                Some(x) => x == b,
                None if used[b] => false,
                None => {
                    map[a] = Some(b);
                    used[b] = true;
                    queue.push_back(a);
                    true
                }
            }
        }
        if !bind(self.initial, other.initial, &mut map, &mut used, &mut queue) {
            return false;
        }
        let mut next_unmapped = 0;
        loop {
            while let Some(a) = queue.pop_front() {
                let b = map[a].expect("queued states are mapped");
                let ea: Vec<EdgeId> = self.out_edge_ids(a).collect();
                let eb: Vec<EdgeId> = other.out_edge_ids(b).collect();
                if ea.len() != eb.len() {
                    return false;
                }
                let table = |t: &Tgba, e: EdgeId| t.valuations().map(|v| t.edges[e].guard.eval(v)).collect::<Vec<_>>();
                let mut taken = vec![false; eb.len()];
                for &x in &ea {
                    let tx = table(self, x);
                    let dx = self.edges[x].dst;
                    let found = eb.iter().enumerate().position(|(j, &y)| {
                        let dy = other.edges[y].dst;
                        !taken[j]
                            && self.marks[x] == other.marks[y]
                            && (map[dx] == Some(dy) || (map[dx].is_none() && !used[dy]))
                            && table(other, y) == tx
                    });
                    match found {
                        Some(j) => {
                            taken[j] = true;
                            bind(dx, other.edges[eb[j]].dst, &mut map, &mut used, &mut queue);
                        }
                        None => return false,
                    }
                }
            }
            // unreachable states: pair them up in index order
            while next_unmapped < n && map[next_unmapped].is_some() {
                next_unmapped += 1;
            }
            if next_unmapped == n {
                return true;
            }
            let Some(b) = (0..n).find(|&b| !used[b]) else {
                return false;
            };
            if !bind(next_unmapped, b, &mut map, &mut used, &mut queue) {
                return false;
            }
        }
    }
}
