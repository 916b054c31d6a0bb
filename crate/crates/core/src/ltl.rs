//! LTL formulas: syntax tree, text parser, printer and derived-operator expansion.
//!
//! Concrete syntax (ASCII):
//!
//! ```text
//! formula  := implies
//! implies  := or ( "->" implies )?          right-associative
//! or       := and ( "|" and )*
//! and      := until ( "&" until )*
//! until    := unary ( "U" until )?          right-associative
//! unary    := ( "!" | "X" | "F" | "G" ) unary | atom
//! atom     := "true" | "false" | ident | "(" formula ")"
//! ident    := [a-z][a-z0-9_]*
//! ```
//!
//! `#` starts a comment running to the end of the line.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LtlError {
    #[error("empty formula")]
    Empty,
    #[error("unknown token {found:?} at byte {offset}")]
    Lex { offset: usize, found: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

/// A set of atomic propositions, i.e. one letter of the alphabet 2^AP.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlphabetSymbol(pub BTreeSet<String>);

impl AlphabetSymbol {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }
}

impl<S: Into<String>> FromIterator<S> for AlphabetSymbol {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for AlphabetSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

impl Formula {
    pub fn atom(name: &str) -> Self {
        Formula::Atom(name.to_string())
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    pub fn falsum() -> Self {
        Formula::not(Formula::True)
    }

    /// True iff the formula only uses the core operators {true, atom, !, &, U, X}.
    pub fn is_core(&self) -> bool {
        match self {
            Formula::True | Formula::Atom(_) => true,
            Formula::Not(a) | Formula::Next(a) => a.is_core(),
            Formula::And(a, b) | Formula::Until(a, b) => a.is_core() && b.is_core(),
            Formula::Or(..) | Formula::Implies(..) | Formula::Eventually(..) | Formula::Always(..) => {
                false
            }
        }
    }
}

pub fn parse_ltl(text: &str) -> Result<Formula, LtlError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(LtlError::Empty);
    }
    let mut p = Parser { tokens: &tokens, pos: 0, end: text.len() };
    let f = p.implies()?;
    if let Some(t) = p.peek() {
        return Err(LtlError::Parse {
            offset: t.offset,
            message: format!("unexpected {}", t.kind.describe()),
        });
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = LtlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ltl(s)
    }
}

/// Rewrites F, G, |, -> in terms of the core operators. No simplification is
/// performed, so double negations introduced by the rewrites are kept.
pub fn expand_derived(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        True => True,
        Atom(p) => Atom(p.clone()),
        Not(a) => Formula::not(expand_derived(a)),
        And(a, b) => Formula::and(expand_derived(a), expand_derived(b)),
        Or(a, b) => or_core(expand_derived(a), expand_derived(b)),
        Implies(a, b) => or_core(Formula::not(expand_derived(a)), expand_derived(b)),
        Next(a) => Formula::next(expand_derived(a)),
        Until(a, b) => Formula::until(expand_derived(a), expand_derived(b)),
        Eventually(a) => Formula::until(True, expand_derived(a)),
        Always(a) => Formula::not(Formula::until(True, Formula::not(expand_derived(a)))),
    }
}

fn or_core(a: Formula, b: Formula) -> Formula {
    Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
}

/// Sorted, deduplicated atomic propositions of `f`.
pub fn atomic_props(f: &Formula) -> Vec<String> {
    fn walk(f: &Formula, out: &mut BTreeSet<String>) {
        match f {
            Formula::True => {}
            Formula::Atom(p) => {
                out.insert(p.clone());
            }
            Formula::Not(a) | Formula::Next(a) | Formula::Eventually(a) | Formula::Always(a) => {
                walk(a, out)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Until(a, b) => {
                walk(a, out);
                walk(b, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(f, &mut out);
    out.into_iter().collect()
}

pub fn is_valid_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    name != "true"
        && name != "false"
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Reference semantics: does the lasso word `prefix · cycle^ω` satisfy `f`?
///
/// Evaluated directly on the formula by fixpoint iteration over the finitely
/// many positions of the lasso, without going through any automaton.
pub fn lasso_satisfies(f: &Formula, prefix: &[AlphabetSymbol], cycle: &[AlphabetSymbol]) -> bool {
    assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
    let word: Vec<&AlphabetSymbol> = prefix.iter().chain(cycle.iter()).collect();
    let n = word.len();
    let succ = |i: usize| if i + 1 < n { i + 1 } else { prefix.len() };
    eval_positions(f, &word, &succ)[0]
}

fn eval_positions(f: &Formula, word: &[&AlphabetSymbol], succ: &dyn Fn(usize) -> usize) -> Vec<bool> {
    let n = word.len();
    match f {
        Formula::True => vec![true; n],
        Formula::Atom(p) => word.iter().map(|s| s.contains(p)).collect(),
        Formula::Not(a) => eval_positions(a, word, succ).into_iter().map(|b| !b).collect(),
        Formula::And(a, b) => {
            let (x, y) = (eval_positions(a, word, succ), eval_positions(b, word, succ));
            x.iter().zip(&y).map(|(p, q)| *p && *q).collect()
        }
        Formula::Or(a, b) => {
            let (x, y) = (eval_positions(a, word, succ), eval_positions(b, word, succ));
            x.iter().zip(&y).map(|(p, q)| *p || *q).collect()
        }
        Formula::Implies(a, b) => {
            let (x, y) = (eval_positions(a, word, succ), eval_positions(b, word, succ));
            x.iter().zip(&y).map(|(p, q)| !*p || *q).collect()
        }
        Formula::Next(a) => {
            let x = eval_positions(a, word, succ);
            (0..n).map(|i| x[succ(i)]).collect()
        }
        Formula::Until(a, b) => {
            let (x, y) = (eval_positions(a, word, succ), eval_positions(b, word, succ));
            until_fixpoint(&x, &y, succ)
        }
        Formula::Eventually(a) => {
            let y = eval_positions(a, word, succ);
            until_fixpoint(&vec![true; n], &y, succ)
        }
        Formula::Always(a) => {
            let x = eval_positions(a, word, succ);
            let neg: Vec<bool> = x.iter().map(|b| !b).collect();
            until_fixpoint(&vec![true; n], &neg, succ).into_iter().map(|b| !b).collect()
        }
    }
}

// Least fixpoint of  S = y | (x & X S).
fn until_fixpoint(x: &[bool], y: &[bool], succ: &dyn Fn(usize) -> usize) -> Vec<bool> {
    let n = x.len();
    let mut sat = y.to_vec();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !sat[i] && x[i] && sat[succ(i)] {
                sat[i] = true;
                changed = true;
            }
        }
        if !changed {
            return sat;
        }
    }
}

// Printing always parenthesizes binary operators so that the output reparses
// to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Atom(p) => write!(f, "{p}"),
            Formula::Not(a) => write!(f, "!{a}"),
            Formula::Next(a) => write!(f, "X {a}"),
            Formula::Eventually(a) => write!(f, "F {a}"),
            Formula::Always(a) => write!(f, "G {a}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Until(a, b) => write!(f, "({a} U {b})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    Next,
    Until,
    Eventually,
    Always,
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier '{s}'"),
            TokenKind::True => "'true'".into(),
            TokenKind::False => "'false'".into(),
            TokenKind::Not => "'!'".into(),
            TokenKind::And => "'&'".into(),
            TokenKind::Or => "'|'".into(),
            TokenKind::Implies => "'->'".into(),
            TokenKind::Next => "'X'".into(),
            TokenKind::Until => "'U'".into(),
            TokenKind::Eventually => "'F'".into(),
            TokenKind::Always => "'G'".into(),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, LtlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b'!' => TokenKind::Not,
            b'&' => TokenKind::And,
            b'|' => TokenKind::Or,
            b'X' => TokenKind::Next,
            b'U' => TokenKind::Until,
            b'F' => TokenKind::Eventually,
            b'G' => TokenKind::Always,
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                TokenKind::Implies
            }
            b'a'..=b'z' => {
                while i + 1 < bytes.len()
                    && matches!(bytes[i + 1], b'a'..=b'z' | b'0'..=b'9' | b'_')
                {
                    i += 1;
                }
                match &text[start..=i] {
                    "true" => TokenKind::True,
                    "false" => TokenKind::False,
                    word => TokenKind::Ident(word.to_string()),
                }
            }
            _ => {
                let found = text[start..].chars().next().map(String::from).unwrap_or_default();
                return Err(LtlError::Lex { offset: start, found });
            }
        };
        i += 1;
        out.push(Token { kind, offset: start });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn implies(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.or()?;
        if self.eat(&TokenKind::Implies) {
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.and()?;
        while self.eat(&TokenKind::Or) {
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.until()?;
        while self.eat(&TokenKind::And) {
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.unary()?;
        if self.eat(&TokenKind::Until) {
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(LtlError::Parse {
                offset: self.end,
                message: "unexpected end of input (dangling operator?)".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Not => Ok(Formula::not(self.unary()?)),
            TokenKind::Next => Ok(Formula::next(self.unary()?)),
            TokenKind::Eventually => Ok(Formula::eventually(self.unary()?)),
            TokenKind::Always => Ok(Formula::always(self.unary()?)),
            TokenKind::True => Ok(Formula::True),
            TokenKind::False => Ok(Formula::falsum()),
            TokenKind::Ident(name) => Ok(Formula::Atom(name)),
            TokenKind::LParen => {
                let inner = self.implies()?;
                if !self.eat(&TokenKind::RParen) {
                    return Err(LtlError::Parse {
                        offset: self.offset(),
                        message: format!("expected ')' to close '(' at byte {}", tok.offset),
                    });
                }
                Ok(inner)
            }
            other => Err(LtlError::Parse {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}
