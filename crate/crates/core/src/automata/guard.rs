use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A letter of 2^AP as a bitmask over the automaton's proposition list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Valuation(pub u32);

impl Valuation {
    pub const EMPTY: Valuation = Valuation(0);

    pub fn has(self, ap: usize) -> bool {
        self.0 >> ap & 1 == 1
    }

    pub fn with(self, ap: usize) -> Valuation {
        Valuation(self.0 | 1 << ap)
    }

    /// Names not in `ap` are ignored.
    pub fn from_names<'a>(ap: &[String], names: impl IntoIterator<Item = &'a str>) -> Valuation {
        names.into_iter().fold(Valuation::EMPTY, |v, n| match ap.iter().position(|p| p == n) {
            Some(i) => v.with(i),
            None => v,
        })
    }
}

/// Propositional edge guard over proposition indices (HOA label syntax).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Guard {
    True,
    False,
    Ap(usize),
    Not(Box<Guard>),
    And(Vec<Guard>),
    Or(Vec<Guard>),
}

impl Guard {
    pub fn eval(&self, v: Valuation) -> bool {
        match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Ap(i) => v.has(*i),
            Guard::Not(g) => !g.eval(v),
            Guard::And(gs) => gs.iter().all(|g| g.eval(v)),
            Guard::Or(gs) => gs.iter().any(|g| g.eval(v)),
        }
    }

    pub fn max_ap(&self) -> Option<usize> {
        match self {
            Guard::True | Guard::False => None,
            Guard::Ap(i) => Some(*i),
            Guard::Not(g) => g.max_ap(),
            Guard::And(gs) | Guard::Or(gs) => gs.iter().filter_map(Guard::max_ap).max(),
        }
    }

    pub fn not(g: Guard) -> Guard {
        Guard::Not(Box::new(g))
    }

    /// A compact guard equivalent to the given set of valuations over `n_ap`
    /// propositions (prime implicants with a greedy cover).
    pub fn from_valuations(vals: &[Valuation], n_ap: usize) -> Guard {
        let full = 1u32 << n_ap;
        let mut on = vec![false; full as usize];
        for v in vals {
            on[v.0 as usize] = true;
        }
        if on.iter().all(|&b| !b) {
            return Guard::False;
        }
        if on.iter().all(|&b| b) {
            return Guard::True;
        }
        let mask_all = full - 1;
        // cube = (care mask, value bits)
        let mut current: Vec<(u32, u32)> = (0..full).filter(|&v| on[v as usize]).map(|v| (mask_all, v)).collect();
        let mut primes: Vec<(u32, u32)> = Vec::new();
        while !current.is_empty() {
            let mut merged = vec![false; current.len()];
            let mut next: Vec<(u32, u32)> = Vec::new();
            for i in 0..current.len() {
                for j in i + 1..current.len() {
                    let (mi, vi) = current[i];
                    let (mj, vj) = current[j];
                    if mi != mj {
                        continue;
                    }
                    let diff = vi ^ vj;
                    if diff.count_ones() == 1 {
                        merged[i] = true;
                        merged[j] = true;
                        let cube = (mi & !diff, vi & !diff);
                        if !next.contains(&cube) {
                            next.push(cube);
                        }
                    }
                }
            }
            for (i, c) in current.iter().enumerate() {
                if !merged[i] && !primes.contains(c) {
                    primes.push(*c);
                }
            }
            current = next;
        }
        let covers = |(m, val): (u32, u32), v: u32| v & m == val;
        let mut uncovered: Vec<u32> = (0..full).filter(|&v| on[v as usize]).collect();
        let mut chosen = Vec::new();
        while !uncovered.is_empty() {
            // most minterms covered, then fewest literals, then first found
            let best = primes
                .iter()
                .copied()
                .max_by_key(|&c| {
                    let n = uncovered.iter().filter(|&&v| covers(c, v)).count();
                    (n, std::cmp::Reverse(c.0.count_ones()))
                })
                .expect("some prime covers every minterm");
            uncovered.retain(|&v| !covers(best, v));
            chosen.push(best);
        }
        chosen.sort_by_key(|&(m, v)| (std::cmp::Reverse(m.count_ones()), v));
        let cube_guard = |(m, val): (u32, u32)| {
            let lits: Vec<Guard> = (0..n_ap)
                .filter(|&i| m >> i & 1 == 1)
                .map(|i| if val >> i & 1 == 1 { Guard::Ap(i) } else { Guard::not(Guard::Ap(i)) })
                .collect();
            match lits.len() {
                0 => Guard::True,
                1 => lits.into_iter().next().unwrap(),
                _ => Guard::And(lits),
            }
        };
        let mut terms: Vec<Guard> = chosen.into_iter().map(cube_guard).collect();
        if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Guard::Or(terms)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for GuardParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at column {}", self.message, self.offset + 1)
    }
}

impl FromStr for Guard {
    type Err = GuardParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = GuardParser { s: s.as_bytes(), pos: 0 };
        let g = p.or()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("trailing input in guard"));
        }
        Ok(g)
    }
}

struct GuardParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl GuardParser<'_> {
    fn err(&self, message: &str) -> GuardParseError {
        GuardParseError { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn or(&mut self) -> Result<Guard, GuardParseError> {
        let mut terms = vec![self.and()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            terms.push(self.and()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Guard::Or(terms) })
    }

    fn and(&mut self) -> Result<Guard, GuardParseError> {
        let mut terms = vec![self.unary()?];
        while self.peek() == Some(b'&') {
            self.pos += 1;
            terms.push(self.unary()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Guard::And(terms) })
    }

    fn unary(&mut self) -> Result<Guard, GuardParseError> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(Guard::not(self.unary()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let g = self.or()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(g)
            }
            Some(b't') => {
                self.pos += 1;
                Ok(Guard::True)
            }
            Some(b'f') => {
                self.pos += 1;
                Ok(Guard::False)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
                text.parse().map(Guard::Ap).map_err(|_| self.err("proposition index too large"))
            }
            Some(b'@') => Err(self.err("label aliases are not supported")),
            Some(_) => Err(self.err("unexpected character in guard")),
            None => Err(self.err("unexpected end of guard")),
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn atomic(g: &Guard) -> bool {
            matches!(g, Guard::True | Guard::False | Guard::Ap(_) | Guard::Not(_))
        }
        match self {
            Guard::True => write!(f, "t"),
            Guard::False => write!(f, "f"),
            Guard::Ap(i) => write!(f, "{i}"),
            Guard::Not(g) if atomic(g) => write!(f, "!{g}"),
            Guard::Not(g) => write!(f, "!({g})"),
            Guard::And(gs) => {
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    if atomic(g) {
                        write!(f, "{g}")?;
                    } else {
                        write!(f, "({g})")?;
                    }
                }
                Ok(())
            }
            Guard::Or(gs) => {
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    if matches!(g, Guard::Or(_)) {
                        write!(f, "({g})")?;
                    } else {
                        write!(f, "{g}")?;
                    }
                }
                Ok(())
            }
        }
    }
}
