//! Seeded generators shared by unit, property and acceptance tests.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::automata::{validate_ldba, Edge, Guard, Ldba, Part, Tgba, Valuation};
use crate::ltl::AlphabetSymbol;

/// A random valid LDBA with 1..=`max_states` states, 1..=`max_sets`
/// acceptance sets and `n_ap` propositions. About a third of the automata
/// have a nondeterministic initial part joined to the rest by ε-edges.
pub fn random_ldba(rng: &mut impl Rng, max_states: usize, max_sets: usize, n_ap: usize) -> Ldba {
    let n = rng.gen_range(1..=max_states);
    let m = rng.gen_range(1..=max_sets);
    let n_qn = if n >= 2 && rng.gen_bool(0.3) { rng.gen_range(1..n) } else { 0 };
    let ap: Vec<String> = (0..n_ap).map(|i| format!("p{i}")).collect();
    let vals: Vec<Valuation> = (0..1u32 << n_ap).map(Valuation).collect();
    let mut edges = Vec::new();
    let mut acceptance = vec![BTreeSet::new(); m];
    for q in 0..n {
        let targets = if q < n_qn { 0..n_qn } else { n_qn..n };
        let mut shuffled = vals.clone();
        shuffled.shuffle(rng);
        let groups = rng.gen_range(1..=shuffled.len());
        let mut cuts: Vec<usize> = (1..shuffled.len()).collect();
        cuts.shuffle(rng);
        let mut cuts: Vec<usize> = cuts.into_iter().take(groups - 1).collect();
        cuts.sort();
        let mut start = 0;
        for end in cuts.into_iter().chain(std::iter::once(shuffled.len())) {
            let group = &shuffled[start..end];
            start = end;
            let id = edges.len();
            edges.push(Edge { src: q, guard: Guard::from_valuations(group, n_ap), dst: rng.gen_range(targets.clone()) });
            if q >= n_qn {
                for set in acceptance.iter_mut() {
                    if rng.gen_bool(0.25) {
                        set.insert(id);
                    }
                }
            }
        }
    }
    let mut eps = Vec::new();
    for q in 0..n_qn {
        if rng.gen_bool(0.6) {
            eps.push((q, rng.gen_range(n_qn..n)));
        }
    }
    let parts: Vec<Part> = (0..n).map(|q| if q < n_qn { Part::Initial } else { Part::Deterministic }).collect();
    let tgba = Tgba::new(ap, n, 0, edges, acceptance).expect("generated automaton is well formed");
    validate_ldba(&tgba, &parts, &eps).expect("generated automaton is limit deterministic")
}

/// A random lasso word over `ap` with prefix length ≤ `max_prefix` and
/// cycle length in 1..=`max_cycle`.
pub fn random_lasso(
    rng: &mut impl Rng,
    ap: &[String],
    max_prefix: usize,
    max_cycle: usize,
) -> (Vec<AlphabetSymbol>, Vec<AlphabetSymbol>) {
    let symbol = |rng: &mut dyn rand::RngCore| -> AlphabetSymbol {
        ap.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect()
    };
    let np = rng.gen_range(0..=max_prefix);
    let nc = rng.gen_range(1..=max_cycle);
    let prefix = (0..np).map(|_| symbol(rng)).collect();
    let cycle = (0..nc).map(|_| symbol(rng)).collect();
    (prefix, cycle)
}
