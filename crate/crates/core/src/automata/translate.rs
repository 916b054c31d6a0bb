//! Native translation for sequencing/avoidance goals.
//!
//! Supported formulas are a disjunction/conjunction of reachability goals
//! (`F φ`, `p U φ` with propositional `p`, nested arbitrarily) conjoined at
//! the top level with invariants `G p` over propositional `p`. Both the
//! sugared and the core-operator spellings are accepted.
//!
//! States are residual obligations obtained by formula progression, kept in
//! disjunctive normal form with absorption and then merged by partition
//! refinement. The resulting automaton is deterministic and complete; the
//! only accepting edge is the self-loop of the state where every reachability
//! goal has been discharged.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use super::{validate_ldba, Edge, Guard, Ldba, Part, Tgba, Valuation, MAX_AP};
use crate::ltl::{atomic_props, Formula};

const MAX_STATES: usize = 512;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FragmentError {
    #[error("formula outside supported fragment ({reason}): {subformula}")]
    OutsideFragment { subformula: String, reason: String },
    #[error("too many atomic propositions: {0} (max {MAX_AP})")]
    TooManyPropositions(usize),
    #[error("translation exceeded {MAX_STATES} states")]
    TooManyStates,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Obl {
    True,
    Atom(Atom),
    And(Vec<Obl>),
    Or(Vec<Obl>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Atom {
    Prop(Guard),
    Eventually(Box<Obl>),
    Until(Guard, Box<Obl>),
}

type Clause = BTreeSet<Atom>;
/// Disjunction of conjunctions; `{}` is false, `{{}}` is true.
type Dnf = BTreeSet<Clause>;

fn outside(f: &Formula, reason: &str) -> FragmentError {
    FragmentError::OutsideFragment { subformula: f.to_string(), reason: reason.to_string() }
}

fn is_temporal(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::Atom(_) => false,
        Formula::Next(_) | Formula::Until(..) | Formula::Eventually(_) | Formula::Always(_) => true,
        Formula::Not(a) => is_temporal(a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => is_temporal(a) || is_temporal(b),
    }
}

fn prop_guard(f: &Formula, ap: &[String]) -> Guard {
    match f {
        Formula::True => Guard::True,
        Formula::Atom(p) => Guard::Ap(ap.iter().position(|x| x == p).expect("atom in ap list")),
        Formula::Not(a) => Guard::not(prop_guard(a, ap)),
        Formula::And(a, b) => Guard::And(vec![prop_guard(a, ap), prop_guard(b, ap)]),
        Formula::Or(a, b) => Guard::Or(vec![prop_guard(a, ap), prop_guard(b, ap)]),
        Formula::Implies(a, b) => Guard::Or(vec![Guard::not(prop_guard(a, ap)), prop_guard(b, ap)]),
        _ => unreachable!("prop_guard on temporal formula"),
    }
}

/// `G p` in either spelling, with `p` propositional.
fn as_invariant(f: &Formula) -> Option<&Formula> {
    match f {
        Formula::Always(p) if !is_temporal(p) => Some(p),
        Formula::Not(inner) => match inner.as_ref() {
            Formula::Until(t, neg) if **t == Formula::True => match neg.as_ref() {
                Formula::Not(p) if !is_temporal(p) => Some(p),
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}

fn reachability(f: &Formula, ap: &[String]) -> Result<Obl, FragmentError> {
    if !is_temporal(f) {
        return Ok(match prop_guard(f, ap) {
            Guard::True => Obl::True,
            g => Obl::Atom(Atom::Prop(g)),
        });
    }
    match f {
        Formula::Eventually(x) => Ok(Obl::Atom(Atom::Eventually(Box::new(reachability(x, ap)?)))),
        Formula::Until(l, r) if **l == Formula::True => {
            Ok(Obl::Atom(Atom::Eventually(Box::new(reachability(r, ap)?))))
        }
        Formula::Until(l, r) => {
            if is_temporal(l) {
                return Err(outside(f, "left operand of U must be propositional"));
            }
            Ok(Obl::Atom(Atom::Until(prop_guard(l, ap), Box::new(reachability(r, ap)?))))
        }
        Formula::And(a, b) => Ok(Obl::And(vec![reachability(a, ap)?, reachability(b, ap)?])),
        Formula::Or(a, b) => Ok(Obl::Or(vec![reachability(a, ap)?, reachability(b, ap)?])),
        Formula::Implies(a, b) if !is_temporal(a) => Ok(Obl::Or(vec![
            Obl::Atom(Atom::Prop(Guard::not(prop_guard(a, ap)))),
            reachability(b, ap)?,
        ])),
        Formula::Not(inner) => match inner.as_ref() {
            Formula::Not(x) => reachability(x, ap),
            // core spelling of a disjunction
            Formula::And(a, b) => match (a.as_ref(), b.as_ref()) {
                (Formula::Not(x), Formula::Not(y)) => {
                    Ok(Obl::Or(vec![reachability(x, ap)?, reachability(y, ap)?]))
                }
                _ => Err(outside(f, "negated temporal formula")),
            },
            _ if as_invariant(f).is_some() => Err(outside(f, "G is only supported as a top-level conjunct")),
            _ => Err(outside(f, "negated temporal formula")),
        },
        Formula::Next(_) => Err(outside(f, "X is not supported")),
        Formula::Always(_) => Err(outside(f, "G is only supported as a top-level conjunct")),
        Formula::Implies(..) => Err(outside(f, "temporal antecedent of ->")),
        Formula::True | Formula::Atom(_) => unreachable!("handled as propositional"),
    }
}

fn split_conjuncts<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::And(a, b) => {
            split_conjuncts(a, out);
            split_conjuncts(b, out);
        }
        _ => out.push(f),
    }
}

fn absorb(d: Dnf) -> Dnf {
    let clauses: Vec<Clause> = d.into_iter().collect();
    clauses
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            !clauses.iter().enumerate().any(|(j, other)| j != *i && other.is_subset(c) && (other.len() < c.len() || j < *i))
        })
        .map(|(_, c)| c.clone())
        .collect()
}

fn dnf_and(a: &Dnf, b: &Dnf) -> Dnf {
    let mut out = Dnf::new();
    for x in a {
        for y in b {
            out.insert(x.union(y).cloned().collect());
        }
    }
    absorb(out)
}

fn dnf_true() -> Dnf {
    Dnf::from([Clause::new()])
}

fn to_dnf(o: &Obl) -> Dnf {
    match o {
        Obl::True => dnf_true(),
        Obl::Atom(a) => Dnf::from([Clause::from([a.clone()])]),
        Obl::And(xs) => xs.iter().fold(dnf_true(), |acc, x| dnf_and(&acc, &to_dnf(x))),
        Obl::Or(xs) => absorb(xs.iter().flat_map(to_dnf).collect()),
    }
}

fn progress_obl(o: &Obl, v: Valuation) -> Dnf {
    match o {
        Obl::True => dnf_true(),
        Obl::Atom(a) => progress_atom(a, v),
        Obl::And(xs) => xs.iter().fold(dnf_true(), |acc, x| dnf_and(&acc, &progress_obl(x, v))),
        Obl::Or(xs) => absorb(xs.iter().flat_map(|x| progress_obl(x, v)).collect()),
    }
}

fn progress_atom(a: &Atom, v: Valuation) -> Dnf {
    match a {
        Atom::Prop(g) => {
            if g.eval(v) {
                dnf_true()
            } else {
                Dnf::new()
            }
        }
        Atom::Eventually(x) => {
            let mut d = progress_obl(x, v);
            d.insert(Clause::from([a.clone()]));
            absorb(d)
        }
        Atom::Until(g, x) => {
            let mut d = progress_obl(x, v);
            if g.eval(v) {
                d.insert(Clause::from([a.clone()]));
            }
            absorb(d)
        }
    }
}

fn progress(state: &Dnf, v: Valuation) -> Dnf {
    let mut out = Dnf::new();
    for clause in state {
        let d = clause.iter().fold(dnf_true(), |acc, a| dnf_and(&acc, &progress_atom(a, v)));
        out.extend(d);
    }
    absorb(out)
}

fn guard_formula(g: &Guard, ap: &[String]) -> Formula {
    let fold = |gs: &[Guard], join: fn(Formula, Formula) -> Formula| {
        let mut it = gs.iter().map(|g| guard_formula(g, ap));
        let first = it.next().unwrap_or(Formula::True);
        it.fold(first, join)
    };
    match g {
        Guard::True => Formula::True,
        Guard::False => Formula::falsum(),
        Guard::Ap(i) => Formula::Atom(ap[*i].clone()),
        Guard::Not(x) => Formula::not(guard_formula(x, ap)),
        Guard::And(gs) => fold(gs, Formula::and),
        Guard::Or(gs) => fold(gs, Formula::or),
    }
}

fn obl_formula(o: &Obl, ap: &[String]) -> Formula {
    let fold = |xs: &[Obl], join: fn(Formula, Formula) -> Formula| {
        let mut it = xs.iter().map(|x| obl_formula(x, ap));
        let first = it.next().unwrap_or(Formula::True);
        it.fold(first, join)
    };
    match o {
        Obl::True => Formula::True,
        Obl::Atom(a) => atom_formula(a, ap),
        Obl::And(xs) => fold(xs, Formula::and),
        Obl::Or(xs) => fold(xs, Formula::or),
    }
}

fn atom_formula(a: &Atom, ap: &[String]) -> Formula {
    match a {
        Atom::Prop(g) => guard_formula(g, ap),
        Atom::Eventually(x) => Formula::eventually(obl_formula(x, ap)),
        Atom::Until(g, x) => Formula::until(guard_formula(g, ap), obl_formula(x, ap)),
    }
}

fn dnf_name(d: &Dnf, ap: &[String]) -> String {
    if d.is_empty() {
        return "false".into();
    }
    let clause = |c: &Clause| {
        let mut it = c.iter().map(|a| atom_formula(a, ap));
        let first = it.next().unwrap_or(Formula::True);
        it.fold(first, Formula::and)
    };
    let mut it = d.iter().map(clause);
    let first = it.next().expect("nonempty");
    it.fold(first, Formula::or).to_string()
}

/// Translates a formula of the supported fragment into a deterministic,
/// complete LDBA (every state in QD, no ε-edges).
pub fn translate_fragment(f: &Formula) -> Result<Ldba, FragmentError> {
    let ap = atomic_props(f);
    if ap.len() > MAX_AP {
        return Err(FragmentError::TooManyPropositions(ap.len()));
    }
    let mut conjuncts = Vec::new();
    split_conjuncts(f, &mut conjuncts);
    let mut invariants = Vec::new();
    let mut goals = Vec::new();
    for c in conjuncts {
        match as_invariant(c) {
            Some(p) => invariants.push(prop_guard(p, &ap)),
            None => goals.push(reachability(c, &ap)?),
        }
    }
    let invariant = Guard::And(invariants);
    let initial = to_dnf(&Obl::And(goals));

    // explore residuals
    let n_val = 1u32 << ap.len();
    let mut ids: BTreeMap<Dnf, usize> = BTreeMap::new();
    let mut residuals: Vec<Dnf> = Vec::new();
    let mut table: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    ids.insert(initial.clone(), 0);
    residuals.push(initial);
    queue.push_back(0);
    while let Some(s) = queue.pop_front() {
        let mut row = Vec::with_capacity(n_val as usize);
        for v in (0..n_val).map(Valuation) {
            let next = if invariant.eval(v) { progress(&residuals[s], v) } else { Dnf::new() };
            let id = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    if residuals.len() >= MAX_STATES {
                        return Err(FragmentError::TooManyStates);
                    }
                    let id = residuals.len();
                    ids.insert(next.clone(), id);
                    residuals.push(next);
                    queue.push_back(id);
                    id
                }
            };
            row.push(id);
        }
        table.push(row);
    }

    // partition refinement: done / dead / pending, then by successor blocks
    let class = |d: &Dnf| {
        if d.contains(&Clause::new()) {
            0
        } else if d.is_empty() {
            1
        } else {
            2
        }
    };
    let mut block: Vec<usize> = residuals.iter().map(class).collect();
    loop {
        let mut sigs: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let next: Vec<usize> = (0..residuals.len())
            .map(|s| {
                let sig = (block[s], table[s].iter().map(|&t| block[t]).collect::<Vec<_>>());
                let n = sigs.len();
                *sigs.entry(sig).or_insert(n)
            })
            .collect();
        let stable = sigs.len() == block.iter().collect::<BTreeSet<_>>().len();
        block = next;
        if stable {
            break;
        }
    }

    // number blocks in BFS order from the initial residual
    let mut order: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rep: Vec<usize> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    order.insert(block[0], 0);
    rep.push(0);
    while let Some(s) = queue.pop_front() {
        for &t in &table[s] {
            if !order.contains_key(&block[t]) {
                order.insert(block[t], rep.len());
                rep.push(t);
                queue.push_back(t);
            }
        }
    }
    let state_of = |s: usize| order[&block[s]];
    let n_states = rep.len();

    let mut edges = Vec::new();
    let mut accepting = BTreeSet::new();
    for (q, &r) in rep.iter().enumerate() {
        let mut groups: Vec<(usize, Vec<Valuation>)> = Vec::new();
        for v in 0..n_val {
            let dst = state_of(table[r][v as usize]);
            match groups.iter_mut().find(|(d, _)| *d == dst) {
                Some((_, vals)) => vals.push(Valuation(v)),
                None => groups.push((dst, vec![Valuation(v)])),
            }
        }
        let done = class(&residuals[r]) == 0;
        for (dst, vals) in groups {
            if done && dst == q {
                accepting.insert(edges.len());
            }
            edges.push(Edge { src: q, guard: Guard::from_valuations(&vals, ap.len()), dst });
        }
    }
    let names = rep.iter().map(|&r| Some(dnf_name(&residuals[r], &ap))).collect();
    let tgba = Tgba::new(ap, n_states, 0, edges, vec![accepting])
        .expect("translator builds well-formed automata")
        .with_state_names(names);
    let parts = vec![Part::Deterministic; n_states];
    Ok(validate_ldba(&tgba, &parts, &[]).expect("translator output is deterministic and complete"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{accepts_lasso, LassoWord};
    use crate::ltl::{expand_derived, lasso_satisfies, parse_ltl, AlphabetSymbol};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tr(text: &str) -> Ldba {
        translate_fragment(&parse_ltl(text).unwrap()).unwrap()
    }

    #[test]
    fn phi1_three_state_chain() {
        let a = tr("F (a & F b)");
        assert_eq!(a.num_states(), 3);
        let g = |q| a.out_edge_ids(q).map(|e| (a.edge(e).guard.to_string(), a.edge(e).dst)).collect::<Vec<_>>();
        assert_eq!(g(0), vec![("!0".to_string(), 0), ("0 & !1".to_string(), 1), ("0 & 1".to_string(), 2)]);
        assert_eq!(g(1), vec![("!1".to_string(), 1), ("1".to_string(), 2)]);
        assert_eq!(g(2), vec![("t".to_string(), 2)]);
        let acc: Vec<_> = a.acceptance()[0].iter().copied().collect();
        assert_eq!(acc.len(), 1);
        assert_eq!(a.edge(acc[0]).src, 2);
        assert_eq!(a.state_name(0), Some("F (a & F b)"));
    }

    #[test]
    fn phi2_five_state_chain() {
        let a = tr("F (a & F (b & F (c & F d)))");
        assert_eq!(a.num_states(), 5);
        // the chain advances one region at a time on singleton labels
        let sym = |p: &str| Valuation::from_names(a.ap(), [p]);
        let mut q = 0;
        for (p, expect) in [("a", 1), ("b", 2), ("c", 3), ("d", 4)] {
            assert_eq!(a.edge(a.step(q, Valuation::EMPTY)).dst, q);
            q = a.edge(a.step(q, sym(p))).dst;
            assert_eq!(q, expect);
        }
    }

    #[test]
    fn phi3_four_states() {
        let a = tr("F (a & F d) | F (b & (!c U d))");
        assert_eq!(a.num_states(), 4);
    }

    #[test]
    fn matches_hand_written_fixtures() {
        let cases = [
            ("F (a & F b)", include_str!("../../fixtures/phi1.hoa")),
            ("F (a & F (b & F (c & F d)))", include_str!("../../fixtures/phi2.hoa")),
            ("F (a & F d) | F (b & (!c U d))", include_str!("../../fixtures/phi3.hoa")),
        ];
        for (text, hoa) in cases {
            let fixture = crate::automata::parse_hoa(hoa).unwrap();
            assert!(tr(text).tgba().is_isomorphic(&fixture), "{text}\n{}", tr(text).to_hoa());
        }
    }

    #[test]
    fn expanded_spelling_translates_identically() {
        for text in ["F (a & F b)", "F (a & F d) | F (b & (!c U d))", "F (a & F b) & G !c"] {
            let f = parse_ltl(text).unwrap();
            let x = translate_fragment(&f).unwrap();
            let y = translate_fragment(&expand_derived(&f)).unwrap();
            assert!(x.tgba().is_isomorphic(y.tgba()), "{text}");
        }
    }

    #[test]
    fn invariant_adds_a_trap() {
        let a = tr("F (a & F b) & G !c");
        assert_eq!(a.num_states(), 4);
        let c = Valuation::from_names(a.ap(), ["c"]);
        let dead = a.edge(a.step(0, c)).dst;
        assert_eq!(a.edge(a.step(dead, Valuation::EMPTY)).dst, dead);
        assert!(a.edge_marks(a.step(dead, Valuation::EMPTY)) == 0);
    }

    #[test]
    fn fragment_errors() {
        for text in ["X a", "(F a) U b", "F G a", "!F a", "G F a", "F a | G !b", "(F a) -> b"] {
            let err = translate_fragment(&parse_ltl(text).unwrap()).unwrap_err();
            assert!(matches!(err, FragmentError::OutsideFragment { .. }), "{text}: {err}");
        }
    }

    #[test]
    fn degenerate_formulas() {
        let t = tr("true");
        assert_eq!(t.num_states(), 1);
        assert_eq!(t.acceptance()[0].len(), 1);
        let f = tr("false");
        assert!(f.acceptance()[0].is_empty());
        let g = tr("G !c");
        assert_eq!(g.num_states(), 2);
    }

    fn random_symbol(rng: &mut ChaCha8Rng, ap: &[String]) -> AlphabetSymbol {
        ap.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect()
    }

    #[test]
    fn agrees_with_formula_semantics_on_random_lassos() {
        let formulas = [
            "F (a & F b)",
            "F (a & F (b & F (c & F d)))",
            "F (a & F d) | F (b & (!c U d))",
            "F (a & F b) & G !c",
            "a U (b U c)",
            "(a | b) & F (c -> F d)",
            "!a U b & F c",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for text in formulas {
            let f = parse_ltl(text).unwrap();
            let a = translate_fragment(&f).unwrap();
            for _ in 0..400 {
                let pre = (0..rng.gen_range(0..=6)).map(|_| random_symbol(&mut rng, a.ap())).collect::<Vec<_>>();
                let cyc = (0..rng.gen_range(1..=4)).map(|_| random_symbol(&mut rng, a.ap())).collect::<Vec<_>>();
                let expected = lasso_satisfies(&f, &pre, &cyc);
                assert_eq!(accepts_lasso(&a, &LassoWord::new(pre.clone(), cyc.clone())), expected, "{text} on {pre:?} {cyc:?}");
            }
        }
    }
}
