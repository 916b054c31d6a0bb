use std::collections::BTreeSet;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EdgeId, StateId, Tgba, Valuation};
use crate::ltl::AlphabetSymbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    /// Q_N: the initial part, deterministic within itself, left only by ε-edges.
    Initial,
    /// Q_D: the deterministic accepting part.
    Deterministic,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LdbaError {
    #[error("partition covers {got} states but the automaton has {expected}")]
    PartitionSize { expected: usize, got: usize },
    #[error("nondeterminism in QD: state {state} has {successors} successors on symbol {symbol}")]
    NondeterminismInQd { state: StateId, symbol: String, successors: usize },
    #[error("QD state {state} leaves QD on symbol {symbol} (edge {edge})")]
    QdLeavesQd { state: StateId, symbol: String, edge: EdgeId },
    #[error("QN state {state} has {successors} successors within QN on symbol {symbol}")]
    QnNotDeterministic { state: StateId, symbol: String, successors: usize },
    #[error("accepting edge outside QD: edge {edge} ({src} -> {dst})")]
    AcceptingEdgeOutsideQd { edge: EdgeId, src: StateId, dst: StateId },
    #[error("non-ε transition from QN to QD: edge {edge} ({src} -> {dst})")]
    SymbolEdgeQnToQd { edge: EdgeId, src: StateId, dst: StateId },
    #[error("ε-edge {src} -> {dst} must lead from QN to QD")]
    BadEpsilonEdge { src: StateId, dst: StateId },
}

/// An automaton that passed the four limit-determinism conditions. Every
/// state has exactly one symbol successor per letter, so the transition
/// function is tabulated.
#[derive(Clone, Debug)]
pub struct Ldba {
    tgba: Tgba,
    parts: Vec<Part>,
    eps: Vec<(StateId, StateId)>,
    // succ[q * 2^|AP| + v] = the unique enabled edge
    succ: Vec<EdgeId>,
}

impl Ldba {
    pub fn tgba(&self) -> &Tgba {
        &self.tgba
    }

    pub fn part(&self, q: StateId) -> Part {
        self.parts[q]
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn eps_edges(&self) -> &[(StateId, StateId)] {
        &self.eps
    }

    pub fn eps_successors(&self, q: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.eps.iter().filter(move |(s, _)| *s == q).map(|(_, d)| *d)
    }

    /// The unique edge taken from `q` on letter `v`.
    pub fn step(&self, q: StateId, v: Valuation) -> EdgeId {
        self.succ[q * self.tgba.num_valuations() as usize + v.0 as usize]
    }

    pub fn num_states(&self) -> usize {
        self.tgba.num_states()
    }

    pub fn to_hoa(&self) -> String {
        super::hoa::emit_hoa_ldba(self)
    }
}

impl std::ops::Deref for Ldba {
    type Target = Tgba;

    fn deref(&self) -> &Tgba {
        &self.tgba
    }
}

/// Checks the four conditions and returns the automaton as an [`Ldba`].
///
/// 1. every QD state has exactly one successor per letter, inside QD;
/// 2. every QN state has exactly one successor per letter inside QN;
/// 3. accepting edges run within QD;
/// 4. QN is left for QD only through ε-edges.
pub fn validate_ldba(a: &Tgba, parts: &[Part], eps: &[(StateId, StateId)]) -> Result<Ldba, LdbaError> {
    if parts.len() != a.num_states() {
        return Err(LdbaError::PartitionSize { expected: a.num_states(), got: parts.len() });
    }
    let qd = |q: StateId| parts[q] == Part::Deterministic;
    for (e, edge) in a.edges().iter().enumerate() {
        if a.edge_marks(e) != 0 && !(qd(edge.src) && qd(edge.dst)) {
            return Err(LdbaError::AcceptingEdgeOutsideQd { edge: e, src: edge.src, dst: edge.dst });
        }
    }
    for &(src, dst) in eps {
        if src >= parts.len() || dst >= parts.len() || qd(src) || !qd(dst) {
            return Err(LdbaError::BadEpsilonEdge { src, dst });
        }
    }
    let n_val = a.num_valuations() as usize;
    let mut succ = vec![0; a.num_states() * n_val];
    for q in 0..a.num_states() {
        for v in a.valuations() {
            let enabled: Vec<EdgeId> = a.enabled(q, v).collect();
            let symbol = a.symbol_of(v).to_string();
            if qd(q) {
                if let Some(&e) = enabled.iter().find(|&&e| !qd(a.edge(e).dst)) {
                    return Err(LdbaError::QdLeavesQd { state: q, symbol, edge: e });
                }
                let targets: BTreeSet<StateId> = enabled.iter().map(|&e| a.edge(e).dst).collect();
                if targets.len() != 1 || enabled.len() != 1 {
                    return Err(LdbaError::NondeterminismInQd { state: q, symbol, successors: enabled.len() });
                }
            } else {
                if let Some(&e) = enabled.iter().find(|&&e| qd(a.edge(e).dst)) {
                    let d = a.edge(e).dst;
                    return Err(LdbaError::SymbolEdgeQnToQd { edge: e, src: q, dst: d });
                }
                if enabled.len() != 1 {
                    return Err(LdbaError::QnNotDeterministic { state: q, symbol, successors: enabled.len() });
                }
            }
            succ[q * n_val + v.0 as usize] = enabled[0];
        }
    }
    Ok(Ldba { tgba: a.clone(), parts: parts.to_vec(), eps: eps.to_vec(), succ })
}

/// A finite witness `prefix · cycle^ω` of an infinite word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LassoWord {
    pub prefix: Vec<AlphabetSymbol>,
    pub cycle: Vec<AlphabetSymbol>,
}

impl LassoWord {
    pub fn new(prefix: Vec<AlphabetSymbol>, cycle: Vec<AlphabetSymbol>) -> Self {
        assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
        Self { prefix, cycle }
    }

    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Decides acceptance of a lasso word.
///
/// Builds the graph of (state, word position) pairs reachable from the
/// initial pair, with letter moves and ε-moves, and accepts iff some
/// strongly connected component lying in the cycle part contains an edge
/// from every acceptance set. This covers every resolution of ε-choices.
pub fn accepts_lasso(a: &Ldba, w: &LassoWord) -> bool {
    let positions = w.len();
    let p = w.prefix.len();
    let letters: Vec<Valuation> = w.prefix.iter().chain(&w.cycle).map(|s| a.valuation_of(s)).collect();
    let next_pos = |i: usize| if i + 1 < positions { i + 1 } else { p };

    let mut graph: DiGraph<(StateId, usize), u32> = DiGraph::new();
    let mut index: Vec<Option<NodeIndex>> = vec![None; a.num_states() * positions];
    let mut stack = Vec::new();
    let mut node = |g: &mut DiGraph<(StateId, usize), u32>, stack: &mut Vec<NodeIndex>, q: StateId, i: usize| {
        let slot = &mut index[q * positions + i];
        *slot.get_or_insert_with(|| {
            let n = g.add_node((q, i));
            stack.push(n);
            n
        })
    };
    let start = node(&mut graph, &mut stack, a.initial(), 0);
    let _ = start;
    while let Some(n) = stack.pop() {
        let (q, i) = graph[n];
        for e in a.enabled(q, letters[i]).collect::<Vec<_>>() {
            let m = node(&mut graph, &mut stack, a.edge(e).dst, next_pos(i));
            graph.add_edge(n, m, a.edge_marks(e));
        }
        for d in a.eps_successors(q).collect::<Vec<_>>() {
            let m = node(&mut graph, &mut stack, d, i);
            graph.add_edge(n, m, 0);
        }
    }

    let all = if a.num_sets() == 32 { u32::MAX } else { (1u32 << a.num_sets()) - 1 };
    tarjan_scc(&graph).into_iter().any(|scc| {
        let members: BTreeSet<NodeIndex> = scc.iter().copied().collect();
        let mut seen = 0u32;
        for &n in &scc {
            for e in graph.edges(n) {
                use petgraph::visit::EdgeRef;
                if members.contains(&e.target()) {
                    seen |= *e.weight();
                }
            }
        }
        seen == all
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{parse_hoa, Edge};

    const PHI1: &str = include_str!("../../fixtures/phi1.hoa");

    fn sym(names: &[&str]) -> AlphabetSymbol {
        names.iter().copied().collect()
    }

    fn all_qd(a: &Tgba) -> Vec<Part> {
        vec![Part::Deterministic; a.num_states()]
    }

    #[test]
    fn phi1_fixture_is_deterministic_ldba() {
        let a = parse_hoa(PHI1).unwrap();
        assert_eq!(a.num_states(), 3);
        assert_eq!(a.num_sets(), 1);
        assert_eq!(a.acceptance()[0].len(), 1);
        let accepting = *a.acceptance()[0].iter().next().unwrap();
        assert_eq!(a.edge(accepting).src, a.edge(accepting).dst);
        validate_ldba(&a, &all_qd(&a), &[]).unwrap();
    }

    #[test]
    fn accepting_edge_in_qn_is_rejected() {
        let a = parse_hoa(PHI1).unwrap();
        let mut parts = all_qd(&a);
        parts[2] = Part::Initial;
        let err = validate_ldba(&a, &parts, &[]).unwrap_err();
        assert!(err.to_string().contains("accepting edge outside QD"), "{err}");
    }

    #[test]
    fn qd_nondeterminism_is_rejected() {
        let e = |src, g: &str, dst| Edge { src, guard: g.parse().unwrap(), dst };
        let a = Tgba::new(
            vec!["a".into()],
            2,
            0,
            vec![e(0, "0", 0), e(0, "0", 1), e(0, "!0", 0), e(1, "t", 1)],
            vec![BTreeSet::from([3])],
        )
        .unwrap();
        let err = validate_ldba(&a, &all_qd(&a), &[]).unwrap_err();
        assert!(matches!(err, LdbaError::NondeterminismInQd { state: 0, .. }));
        assert!(err.to_string().contains("nondeterminism in QD"));
        assert!(err.to_string().contains("{a}"));
    }

    #[test]
    fn incomplete_qd_state_is_rejected() {
        let e = |src, g: &str, dst| Edge { src, guard: g.parse().unwrap(), dst };
        let a = Tgba::new(vec!["a".into()], 1, 0, vec![e(0, "0", 0)], vec![BTreeSet::from([0])]).unwrap();
        assert!(matches!(
            validate_ldba(&a, &all_qd(&a), &[]),
            Err(LdbaError::NondeterminismInQd { successors: 0, .. })
        ));
    }

    #[test]
    fn qn_conditions() {
        let e = |src, g: &str, dst| Edge { src, guard: g.parse().unwrap(), dst };
        // 0 in QN loops on everything, ε to 1 in QD which accepts on a
        let good = Tgba::new(
            vec!["a".into()],
            2,
            0,
            vec![e(0, "t", 0), e(1, "0", 1), e(1, "!0", 1)],
            vec![BTreeSet::from([1])],
        )
        .unwrap();
        let parts = vec![Part::Initial, Part::Deterministic];
        validate_ldba(&good, &parts, &[(0, 1)]).unwrap();
        assert!(matches!(
            validate_ldba(&good, &parts, &[(1, 0)]),
            Err(LdbaError::BadEpsilonEdge { src: 1, dst: 0 })
        ));
        // symbol edge from QN straight into QD
        let leak = Tgba::new(
            vec!["a".into()],
            2,
            0,
            vec![e(0, "!0", 0), e(0, "0", 1), e(1, "t", 1)],
            vec![BTreeSet::from([2])],
        )
        .unwrap();
        assert!(matches!(
            validate_ldba(&leak, &parts, &[]),
            Err(LdbaError::SymbolEdgeQnToQd { src: 0, dst: 1, .. })
        ));
        // two QN successors on the same letter
        let branching = Tgba::new(
            vec!["a".into()],
            3,
            0,
            vec![e(0, "t", 0), e(0, "0", 2), e(2, "t", 2), e(1, "t", 1)],
            vec![BTreeSet::from([3])],
        )
        .unwrap();
        let parts3 = vec![Part::Initial, Part::Deterministic, Part::Initial];
        assert!(matches!(
            validate_ldba(&branching, &parts3, &[]),
            Err(LdbaError::QnNotDeterministic { state: 0, .. })
        ));
    }

    #[test]
    fn lasso_acceptance_on_phi1() {
        let a = parse_hoa(PHI1).unwrap();
        let l = validate_ldba(&a, &all_qd(&a), &[]).unwrap();
        assert!(accepts_lasso(&l, &LassoWord::new(vec![sym(&["a"]), sym(&["b"])], vec![sym(&[])])));
        assert!(!accepts_lasso(&l, &LassoWord::new(vec![], vec![sym(&[])])));
        assert!(!accepts_lasso(&l, &LassoWord::new(vec![sym(&["b"])], vec![sym(&["a"])])));
        assert!(accepts_lasso(&l, &LassoWord::new(vec![], vec![sym(&["b"]), sym(&["a"])])));
    }

    #[test]
    fn trivial_automaton_accepts_everything() {
        let a = parse_hoa("HOA: v1\nStates: 1\nStart: 0\nAP: 1 \"a\"\nAcceptance: 1 Inf(0)\n--BODY--\nState: 0\n[t] 0 {0}\n--END--\n").unwrap();
        let l = validate_ldba(&a, &all_qd(&a), &[]).unwrap();
        for w in [
            LassoWord::new(vec![], vec![sym(&[])]),
            LassoWord::new(vec![sym(&["a"]), sym(&[])], vec![sym(&["a"])]),
        ] {
            assert!(accepts_lasso(&l, &w));
        }
    }

    #[test]
    fn lasso_acceptance_explores_epsilon_choices() {
        // QN state 0 waits forever; ε to 1 (needs a forever) or ε to 2 (needs !a forever)
        let e = |src, g: &str, dst| Edge { src, guard: g.parse().unwrap(), dst };
        let a = Tgba::new(
            vec!["a".into()],
            4,
            0,
            vec![e(0, "t", 0), e(1, "0", 1), e(1, "!0", 3), e(2, "!0", 2), e(2, "0", 3), e(3, "t", 3)],
            vec![BTreeSet::from([1, 3])],
        )
        .unwrap();
        let parts = vec![Part::Initial, Part::Deterministic, Part::Deterministic, Part::Deterministic];
        let l = validate_ldba(&a, &parts, &[(0, 1), (0, 2)]).unwrap();
        // FG a and FG !a are both accepted, alternating forever is not
        assert!(accepts_lasso(&l, &LassoWord::new(vec![sym(&[])], vec![sym(&["a"])])));
        assert!(accepts_lasso(&l, &LassoWord::new(vec![sym(&["a"])], vec![sym(&[])])));
        assert!(!accepts_lasso(&l, &LassoWord::new(vec![], vec![sym(&["a"]), sym(&[])])));
    }

    #[test]
    fn generalized_acceptance_needs_every_set() {
        let a = parse_hoa(
            "HOA: v1\nStates: 1\nStart: 0\nAP: 2 \"a\" \"b\"\nAcceptance: 2 Inf(0)&Inf(1)\n--BODY--\nState: 0\n[0] 0 {0}\n[!0 & 1] 0 {1}\n[!0 & !1] 0\n--END--\n",
        )
        .unwrap();
        let l = validate_ldba(&a, &all_qd(&a), &[]).unwrap();
        assert!(!accepts_lasso(&l, &LassoWord::new(vec![], vec![sym(&["a"])])));
        assert!(accepts_lasso(&l, &LassoWord::new(vec![], vec![sym(&["a"]), sym(&["b"])])));
        // b only in the prefix does not count
        assert!(!accepts_lasso(&l, &LassoWord::new(vec![sym(&["b"])], vec![sym(&["a"])])));
    }
}
