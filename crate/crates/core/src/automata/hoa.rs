//! HOA v1 subset: explicit edge labels, transition-based generalized Büchi
//! acceptance (`Inf(0)&...&Inf(m-1)`), single initial state.
//!
//! Two optional headers carry the LDBA structure that plain HOA cannot
//! express: `ldba-qn: <states>` lists the states of the initial
//! (nondeterministic) part and `ldba-eps: <src> <dst> ...` lists ε-edges as
//! source/destination pairs. Tools that do not know them ignore them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::{AutomatonError, Edge, Guard, Ldba, Part, StateId, Tgba};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HoaError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported HOA feature: {feature}")]
    Unsupported { line: usize, feature: String },
    #[error("invalid automaton: {0}")]
    Invalid(#[from] AutomatonError),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Header(String),
    Ident(String),
    Int(usize),
    Str(String),
    Label(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Amp,
    Bar,
    Bang,
    Body,
    End,
    Abort,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, HoaError> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let err = |line: usize, m: &str| HoaError::Parse { line, message: m.to_string() };
    while i < b.len() {
        let c = b[i];
        match c {
            b'\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'/' if b.get(i + 1) == Some(&b'*') => {
                let start_line = line;
                i += 2;
                loop {
                    if i + 1 >= b.len() {
                        return Err(err(start_line, "unterminated comment"));
                    }
                    if b[i] == b'*' && b[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    if b[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
            }
            b'"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match b.get(i) {
                        None => return Err(err(line, "unterminated string")),
                        Some(b'"') => break,
                        Some(b'\\') if i + 1 < b.len() => {
                            s.push(b[i + 1] as char);
                            i += 2;
                        }
                        Some(&ch) => {
                            if ch == b'\n' {
                                line += 1;
                            }
                            s.push(ch as char);
                            i += 1;
                        }
                    }
                }
                i += 1;
                out.push((Tok::Str(s), line));
            }
            b'[' => {
                let start = i + 1;
                while i < b.len() && b[i] != b']' {
                    if b[i] == b'\n' {
                        return Err(err(line, "unterminated label"));
                    }
                    i += 1;
                }
                if i >= b.len() {
                    return Err(err(line, "unterminated label"));
                }
                out.push((Tok::Label(text[start..i].to_string()), line));
                i += 1;
            }
            b'{' | b'}' | b'(' | b')' | b'&' | b'|' | b'!' => {
                let t = match c {
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'&' => Tok::Amp,
                    b'|' => Tok::Bar,
                    _ => Tok::Bang,
                };
                out.push((t, line));
                i += 1;
            }
            b'-' if text[i..].starts_with("--BODY--") => {
                out.push((Tok::Body, line));
                i += 8;
            }
            b'-' if text[i..].starts_with("--END--") => {
                out.push((Tok::End, line));
                i += 7;
            }
            b'-' if text[i..].starts_with("--ABORT--") => {
                out.push((Tok::Abort, line));
                i += 9;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let n = text[start..i].parse().map_err(|_| err(line, "integer too large"))?;
                out.push((Tok::Int(n), line));
            }
            c if c.is_ascii_alphabetic() || c == b'_' || c == b'@' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'-' || b[i] == b'@') {
                    i += 1;
                }
                let word = text[start..i].to_string();
                if b.get(i) == Some(&b':') {
                    i += 1;
                    out.push((Tok::Header(word), line));
                } else {
                    out.push((Tok::Ident(word), line));
                }
            }
            _ => return Err(err(line, &format!("unexpected character {:?}", c as char))),
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    last_line: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |(_, l)| *l)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn parse_err(&self, message: impl Into<String>) -> HoaError {
        HoaError::Parse { line: self.line(), message: message.into() }
    }

    fn unsupported(&self, feature: impl Into<String>) -> HoaError {
        HoaError::Unsupported { line: self.line(), feature: feature.into() }
    }

    fn int(&mut self, what: &str) -> Result<usize, HoaError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.parse_err(format!("expected {what}"))),
        }
    }

    /// Tokens until the next header or body marker.
    fn header_value(&mut self) -> Vec<(Tok, usize)> {
        let start = self.pos;
        while let Some(t) = self.peek() {
            if matches!(t, Tok::Header(_) | Tok::Body) {
                break;
            }
            self.pos += 1;
        }
        self.toks[start..self.pos].to_vec()
    }
}

struct Header {
    num_states: Option<usize>,
    start: Option<usize>,
    ap: Option<Vec<String>>,
    num_sets: Option<usize>,
    qn: Vec<StateId>,
    eps: Vec<(StateId, StateId)>,
}

pub fn parse_hoa(text: &str) -> Result<Tgba, HoaError> {
    parse_full(text).map(|(a, _, _)| a)
}

/// Parses an automaton together with the LDBA partition and ε-edges declared
/// in the `ldba-qn`/`ldba-eps` headers (all states in QD when absent).
pub fn parse_hoa_ldba(text: &str) -> Result<(Tgba, Vec<Part>, Vec<(StateId, StateId)>), HoaError> {
    parse_full(text)
}

fn parse_full(text: &str) -> Result<(Tgba, Vec<Part>, Vec<(StateId, StateId)>), HoaError> {
    let toks = tokenize(text)?;
    let last_line = text.lines().count().max(1);
    let mut c = Cursor { toks, pos: 0, last_line };

    match (c.next(), c.next()) {
        (Some(Tok::Header(h)), Some(Tok::Ident(v))) if h == "HOA" => {
            if v != "v1" {
                return Err(c.unsupported(format!("HOA version {v}")));
            }
        }
        _ => {
            return Err(HoaError::Parse { line: 1, message: "file must start with 'HOA: v1'".into() });
        }
    }

    let mut h = Header { num_states: None, start: None, ap: None, num_sets: None, qn: vec![], eps: vec![] };
    loop {
        let line = c.line();
        match c.next() {
            Some(Tok::Body) => break,
            Some(Tok::Header(name)) => {
                let value = c.header_value();
                parse_header(&name, &value, line, &mut h)?;
            }
            Some(_) => return Err(HoaError::Parse { line, message: "expected a header or --BODY--".into() }),
            None => return Err(HoaError::Parse { line, message: "missing --BODY--".into() }),
        }
    }

    let ap = h.ap.ok_or_else(|| c.parse_err("missing AP header"))?;
    let num_sets = h.num_sets.ok_or_else(|| c.parse_err("missing Acceptance header"))?;
    let start = h.start.ok_or_else(|| c.parse_err("missing Start header"))?;

    let mut edges: Vec<Edge> = Vec::new();
    let mut acceptance: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_sets];
    let mut names: BTreeMap<StateId, String> = BTreeMap::new();
    let mut seen: BTreeSet<StateId> = BTreeSet::new();
    let mut max_state = 0;
    loop {
        match c.peek() {
            Some(Tok::End) => {
                c.next();
                break;
            }
            Some(Tok::Abort) => return Err(c.parse_err("automaton aborted (--ABORT--)")),
            Some(Tok::Header(name)) if name == "State" => {
                c.next();
            }
            None => return Err(c.parse_err("missing --END--")),
            _ => return Err(c.parse_err("expected 'State:'")),
        }
        if let Some(Tok::Label(_)) = c.peek() {
            return Err(c.unsupported("state labels"));
        }
        let q = c.int("state number")?;
        if !seen.insert(q) {
            return Err(c.parse_err(format!("state {q} declared twice")));
        }
        max_state = max_state.max(q);
        if let Some(Tok::Str(s)) = c.peek() {
            names.insert(q, s.clone());
            c.next();
        }
        if c.peek() == Some(&Tok::LBrace) {
            return Err(c.unsupported("state-based acceptance"));
        }
        // edges
        loop {
            match c.peek() {
                Some(Tok::Label(label)) => {
                    let label = label.clone();
                    let line = c.line();
                    c.next();
                    let guard: Guard = label.parse().map_err(|e| {
                        if label.contains('@') {
                            HoaError::Unsupported { line, feature: "label aliases".into() }
                        } else {
                            HoaError::Parse { line, message: format!("bad guard [{label}]: {e}") }
                        }
                    })?;
                    let dst = c.int("edge destination")?;
                    if c.peek() == Some(&Tok::Amp) {
                        return Err(c.unsupported("alternation (universal branching)"));
                    }
                    max_state = max_state.max(dst);
                    let id = edges.len();
                    if c.peek() == Some(&Tok::LBrace) {
                        c.next();
                        loop {
                            match c.next() {
                                Some(Tok::RBrace) => break,
                                Some(Tok::Int(set)) => {
                                    if set >= num_sets {
                                        return Err(c.parse_err(format!(
                                            "acceptance mark {set} but only {num_sets} sets declared"
                                        )));
                                    }
                                    acceptance[set].insert(id);
                                }
                                _ => return Err(c.parse_err("bad acceptance mark list")),
                            }
                        }
                    }
                    edges.push(Edge { src: q, guard, dst });
                }
                Some(Tok::Int(_)) => return Err(c.unsupported("implicit (unlabeled) edges")),
                _ => break,
            }
        }
    }
    if c.peek().is_some() {
        return Err(c.parse_err("trailing content after --END--"));
    }

    let num_states = match h.num_states {
        Some(n) => {
            if n == 0 || max_state >= n {
                return Err(c.parse_err(format!("state {max_state} exceeds declared States: {n}")));
            }
            n
        }
        None => max_state + 1,
    };
    if start >= num_states {
        return Err(c.parse_err(format!("start state {start} out of range")));
    }
    let state_names = (0..num_states).map(|q| names.get(&q).cloned()).collect();
    let tgba = Tgba::new(ap, num_states, start, edges, acceptance)?.with_state_names(state_names);

    let mut parts = vec![Part::Deterministic; num_states];
    for &q in &h.qn {
        if q >= num_states {
            return Err(c.parse_err(format!("ldba-qn state {q} out of range")));
        }
        parts[q] = Part::Initial;
    }
    for &(s, d) in &h.eps {
        if s >= num_states || d >= num_states {
            return Err(c.parse_err(format!("ldba-eps edge {s}->{d} out of range")));
        }
    }
    Ok((tgba, parts, h.eps))
}

fn parse_header(name: &str, value: &[(Tok, usize)], line: usize, h: &mut Header) -> Result<(), HoaError> {
    let perr = |m: &str| HoaError::Parse { line, message: format!("{name}: {m}") };
    let unsup = |f: &str| HoaError::Unsupported { line, feature: f.to_string() };
    let toks: Vec<&Tok> = value.iter().map(|(t, _)| t).collect();
    match name {
        "States" => match toks.as_slice() {
            [Tok::Int(n)] => h.num_states = Some(*n),
            _ => return Err(perr("expected one integer")),
        },
        "Start" => {
            if h.start.is_some() {
                return Err(unsup("multiple initial states"));
            }
            match toks.as_slice() {
                [Tok::Int(n)] => h.start = Some(*n),
                [Tok::Int(_), Tok::Amp, ..] => return Err(unsup("alternation (conjunctive initial states)")),
                _ => return Err(perr("expected one state number")),
            }
        }
        "AP" => {
            let Some((Tok::Int(n), rest)) = toks.split_first().map(|(a, b)| (*a, b)) else {
                return Err(perr("expected a count"));
            };
            let names: Vec<String> = rest
                .iter()
                .map(|t| match t {
                    Tok::Str(s) => Ok(s.clone()),
                    _ => Err(perr("expected quoted proposition names")),
                })
                .collect::<Result<_, _>>()?;
            if names.len() != *n {
                return Err(perr(&format!("declares {n} propositions but lists {}", names.len())));
            }
            h.ap = Some(names);
        }
        "Acceptance" => {
            let Some((Tok::Int(m), rest)) = toks.split_first().map(|(a, b)| (*a, b)) else {
                return Err(perr("expected a set count"));
            };
            if rest.iter().any(|t| matches!(t, Tok::Ident(s) if s == "Fin")) {
                return Err(unsup("Fin acceptance (only generalized Büchi is supported)"));
            }
            if rest.iter().any(|t| matches!(t, Tok::Bar)) {
                return Err(unsup("disjunctive acceptance (only generalized Büchi is supported)"));
            }
            if *m == 0 {
                return Err(perr("at least one acceptance set is required"));
            }
            let mut seen = BTreeSet::new();
            let mut i = 0;
            while i < rest.len() {
                match (rest.get(i), rest.get(i + 1), rest.get(i + 2), rest.get(i + 3)) {
                    (Some(Tok::Ident(inf)), Some(Tok::LParen), Some(Tok::Int(k)), Some(Tok::RParen)) if inf == "Inf" => {
                        if *k >= *m || !seen.insert(*k) {
                            return Err(perr(&format!("bad set index {k}")));
                        }
                        i += 4;
                    }
                    _ => return Err(perr("expected Inf(k) terms joined by '&'")),
                }
                if i < rest.len() {
                    if rest[i] != &Tok::Amp {
                        return Err(perr("expected '&'"));
                    }
                    i += 1;
                }
            }
            if seen.len() != *m {
                return Err(perr("every set 0..m-1 must appear in an Inf term"));
            }
            h.num_sets = Some(*m);
        }
        "acc-name" => match toks.first() {
            Some(Tok::Ident(s)) if s == "generalized-Buchi" || s == "Buchi" => {}
            Some(Tok::Ident(s)) => return Err(unsup(&format!("acceptance {s}"))),
            _ => return Err(perr("expected an acceptance name")),
        },
        "ldba-qn" => {
            for t in toks {
                match t {
                    Tok::Int(q) => h.qn.push(*q),
                    _ => return Err(perr("expected state numbers")),
                }
            }
        }
        "ldba-eps" => {
            let ints: Vec<usize> = toks
                .iter()
                .map(|t| match t {
                    Tok::Int(q) => Ok(*q),
                    _ => Err(perr("expected state numbers")),
                })
                .collect::<Result<_, _>>()?;
            if ints.len() % 2 != 0 {
                return Err(perr("expected source/destination pairs"));
            }
            h.eps.extend(ints.chunks(2).map(|p| (p[0], p[1])));
        }
        "Alias" => return Err(unsup("label aliases")),
        "controllable-AP" => return Err(unsup("controllable-AP")),
        // name, tool, properties and other informational headers
        _ => {}
    }
    Ok(())
}

pub fn emit_hoa(a: &Tgba) -> String {
    emit(a, &[], &[])
}

pub(crate) fn emit_hoa_ldba(a: &Ldba) -> String {
    let qn: Vec<StateId> = (0..a.num_states()).filter(|&q| a.part(q) == Part::Initial).collect();
    emit(a.tgba(), &qn, a.eps_edges())
}

fn emit(a: &Tgba, qn: &[StateId], eps: &[(StateId, StateId)]) -> String {
    let mut s = String::new();
    let m = a.num_sets();
    let _ = writeln!(s, "HOA: v1");
    let _ = writeln!(s, "States: {}", a.num_states());
    let _ = writeln!(s, "Start: {}", a.initial());
    let _ = write!(s, "AP: {}", a.ap().len());
    for p in a.ap() {
        let _ = write!(s, " \"{p}\"");
    }
    let _ = writeln!(s);
    if m == 1 {
        let _ = writeln!(s, "acc-name: Buchi");
    } else {
        let _ = writeln!(s, "acc-name: generalized-Buchi {m}");
    }
    let terms: Vec<String> = (0..m).map(|i| format!("Inf({i})")).collect();
    let _ = writeln!(s, "Acceptance: {m} {}", terms.join("&"));
    let _ = writeln!(s, "properties: trans-labels explicit-labels trans-acc");
    if !qn.is_empty() {
        let list: Vec<String> = qn.iter().map(|q| q.to_string()).collect();
        let _ = writeln!(s, "ldba-qn: {}", list.join(" "));
    }
    if !eps.is_empty() {
        let list: Vec<String> = eps.iter().map(|(a, b)| format!("{a} {b}")).collect();
        let _ = writeln!(s, "ldba-eps: {}", list.join(" "));
    }
    let _ = writeln!(s, "--BODY--");
    for q in 0..a.num_states() {
        match a.state_name(q) {
            Some(name) => {
                let escaped = name.replace('\\', "\\\\").replace('"', "\\\"");
                let _ = writeln!(s, "State: {q} \"{escaped}\"");
            }
            None => {
                let _ = writeln!(s, "State: {q}");
            }
        }
        for e in a.out_edge_ids(q) {
            let edge = a.edge(e);
            let _ = write!(s, "[{}] {}", edge.guard, edge.dst);
            let marks = a.edge_marks(e);
            if marks != 0 {
                let sets: Vec<String> = (0..m).filter(|i| marks >> i & 1 == 1).map(|i| i.to_string()).collect();
                let _ = write!(s, " {{{}}}", sets.join(" "));
            }
            let _ = writeln!(s);
        }
    }
    let _ = writeln!(s, "--END--");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::Valuation;
    use proptest::prelude::*;

    const TRIVIAL: &str = "HOA: v1\nStates: 1\nStart: 0\nAP: 0\nAcceptance: 1 Inf(0)\n--BODY--\nState: 0\n[t] 0 {0}\n--END--\n";

    #[test]
    fn parses_minimal_automaton() {
        let a = parse_hoa(TRIVIAL).unwrap();
        assert_eq!(a.num_states(), 1);
        assert_eq!(a.edges().len(), 1);
        assert_eq!(a.acceptance(), &[BTreeSet::from([0])]);
    }

    #[test]
    fn emit_trivial_declares_acceptance() {
        let text = emit_hoa(&parse_hoa(TRIVIAL).unwrap());
        assert!(text.contains("Acceptance: 1 Inf(0)"), "{text}");
    }

    #[test]
    fn parses_generalized_acceptance_and_comments() {
        let text = r#"HOA: v1
/* two sets */
name: "GF a & GF b"
States: 1
Start: 0
AP: 2 "a" "b"
acc-name: generalized-Buchi 2
Acceptance: 2 Inf(1)&Inf(0)
properties: trans-labels explicit-labels trans-acc deterministic
--BODY--
State: 0 "loop"
[0 & 1] 0 {0 1}
[0 & !1] 0 {0}
[!0 & 1] 0 {1}
[!0 & !1] 0
--END--
"#;
        let a = parse_hoa(text).unwrap();
        assert_eq!(a.num_sets(), 2);
        assert_eq!(a.acceptance()[0], BTreeSet::from([0, 1]));
        assert_eq!(a.acceptance()[1], BTreeSet::from([0, 2]));
        assert_eq!(a.state_name(0), Some("loop"));
        assert!(a.edge(1).guard.eval(Valuation(1)));
    }

    fn unsupported(text: &str) -> String {
        match parse_hoa(text) {
            Err(HoaError::Unsupported { feature, .. }) => feature,
            other => panic!("expected unsupported error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unsupported_features() {
        let state_acc = TRIVIAL.replace("State: 0\n[t] 0 {0}", "State: 0 {0}\n[t] 0");
        assert!(unsupported(&state_acc).contains("state-based acceptance"));
        let alt = TRIVIAL.replace("[t] 0 {0}", "[t] 0&0 {0}");
        assert!(unsupported(&alt).contains("alternation"));
        let fin = TRIVIAL.replace("Acceptance: 1 Inf(0)", "Acceptance: 1 Fin(0)");
        assert!(unsupported(&fin).contains("Fin"));
        let rabin = TRIVIAL.replace("Acceptance: 1 Inf(0)", "acc-name: Rabin 1\nAcceptance: 2 Fin(0)&Inf(1)");
        assert!(unsupported(&rabin).contains("Rabin"));
        let implicit = TRIVIAL.replace("[t] 0 {0}", "0 {0}");
        assert!(unsupported(&implicit).contains("implicit"));
        let multi = TRIVIAL.replace("Start: 0\n", "Start: 0\nStart: 0\n");
        assert!(unsupported(&multi).contains("multiple initial"));
    }

    #[test]
    fn malformed_input_reports_line() {
        let bad = TRIVIAL.replace("[t] 0 {0}", "[t &] 0 {0}");
        assert!(matches!(parse_hoa(&bad), Err(HoaError::Parse { line: 8, .. })));
        let no_body = "HOA: v1\nStates: 1\n";
        assert!(matches!(parse_hoa(no_body), Err(HoaError::Parse { .. })));
        let bad_state = TRIVIAL.replace("[t] 0 {0}", "[t] 3 {0}");
        assert!(matches!(parse_hoa(&bad_state), Err(HoaError::Parse { line: 9, .. })));
        assert!(matches!(parse_hoa("HOA v1"), Err(HoaError::Parse { line: 1, .. })));
        let bad_mark = TRIVIAL.replace("{0}", "{1}");
        assert!(matches!(parse_hoa(&bad_mark), Err(HoaError::Parse { line: 8, .. })));
    }

    #[test]
    fn ldba_headers_round_trip() {
        let text = "HOA: v1\nStates: 2\nStart: 0\nAP: 1 \"a\"\nAcceptance: 1 Inf(0)\nldba-qn: 0\nldba-eps: 0 1\n--BODY--\nState: 0\n[t] 0\nState: 1\n[0] 1 {0}\n[!0] 1\n--END--\n";
        let (a, parts, eps) = parse_hoa_ldba(text).unwrap();
        assert_eq!(parts, vec![Part::Initial, Part::Deterministic]);
        assert_eq!(eps, vec![(0, 1)]);
        let ldba = crate::automata::validate_ldba(&a, &parts, &eps).unwrap();
        let again = parse_hoa_ldba(&emit_hoa_ldba(&ldba)).unwrap();
        assert_eq!(again.1, parts);
        assert_eq!(again.2, eps);
    }

    fn arb_tgba() -> impl Strategy<Value = Tgba> {
        (1usize..6, 0usize..3, 1usize..3).prop_flat_map(|(n, n_ap, m)| {
            let edge = (0..n, 0u32..(1 << (1 << n_ap)), 0..n, 0u32..(1 << m));
            (Just(n), Just(n_ap), Just(m), 0..n, prop::collection::vec(edge, 0..12))
        })
        .prop_map(|(n, n_ap, m, init, raw)| {
            let mut acceptance = vec![BTreeSet::new(); m];
            let mut edges = Vec::new();
            for (i, (src, table, dst, marks)) in raw.into_iter().enumerate() {
                let vals: Vec<Valuation> = (0..1u32 << n_ap).filter(|v| table >> v & 1 == 1).map(Valuation).collect();
                edges.push(Edge { src, guard: Guard::from_valuations(&vals, n_ap), dst });
                for (k, set) in acceptance.iter_mut().enumerate() {
                    if marks >> k & 1 == 1 {
                        set.insert(i);
                    }
                }
            }
            let ap = (0..n_ap).map(|i| format!("p{i}")).collect();
            Tgba::new(ap, n, init, edges, acceptance).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn emit_parse_round_trip(a in arb_tgba()) {
            let text = emit_hoa(&a);
            let b = parse_hoa(&text).unwrap();
            prop_assert!(a.is_isomorphic(&b), "{}", text);
        }
    }
}
