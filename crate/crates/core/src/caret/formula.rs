use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tag of a position: the kind of rule fired from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Call,
    Ret,
    Int,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::Call, Tag::Ret, Tag::Int];

    pub fn name(self) -> &'static str {
        match self {
            Tag::Call => "call",
            Tag::Ret => "ret",
            Tag::Int => "int",
        }
    }

    pub fn from_name(s: &str) -> Option<Tag> {
        match s {
            "call" => Some(Tag::Call),
            "ret" => Some(Tag::Ret),
            "int" => Some(Tag::Int),
            _ => None,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Successor kind: global, abstract or caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    Global,
    Abstract,
    Caller,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::Global, Kind::Abstract, Kind::Caller];

    pub fn letter(self) -> char {
        match self {
            Kind::Global => 'g',
            Kind::Abstract => 'a',
            Kind::Caller => 'c',
        }
    }

    pub fn from_letter(c: char) -> Option<Kind> {
        match c {
            'g' => Some(Kind::Global),
            'a' => Some(Kind::Abstract),
            'c' => Some(Kind::Caller),
            _ => None,
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Prop(String),
    Tag(Tag),
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Next(Kind, Box<Formula>),
    Until(Kind, Box<Formula>, Box<Formula>),
    Eventually(Kind, Box<Formula>),
    Globally(Kind, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared proposition `{0}`")]
    Undeclared(String),
    #[error("atoms of different formulas compared")]
    Mismatch,
}

impl Formula {
    pub fn prop(name: &str) -> Formula {
        Formula::Prop(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn next(k: Kind, f: Formula) -> Formula {
        Formula::Next(k, Box::new(f))
    }

    pub fn until(k: Kind, a: Formula, b: Formula) -> Formula {
        Formula::Until(k, Box::new(a), Box::new(b))
    }

    pub fn eventually(k: Kind, f: Formula) -> Formula {
        Formula::Eventually(k, Box::new(f))
    }

    pub fn globally(k: Kind, f: Formula) -> Formula {
        Formula::Globally(k, Box::new(f))
    }

    /// Negation that never builds a double negation.
    pub fn negate(self) -> Formula {
        match self {
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    /// The core formula used for `true`.
    pub fn core_true() -> Formula {
        Formula::or(
            Formula::Tag(Tag::Call),
            Formula::not(Formula::Tag(Tag::Call)),
        )
    }

    /// Rewrite sugar (and, F, G, true, false) into or/not/next/until/atomic.
    pub fn desugar(&self) -> Formula {
        match self {
            Formula::True => Formula::core_true(),
            Formula::False => Formula::core_true().negate(),
            Formula::Prop(_) | Formula::Tag(_) => self.clone(),
            Formula::Not(f) => f.desugar().negate(),
            Formula::Or(a, b) => Formula::or(a.desugar(), b.desugar()),
            Formula::And(a, b) => Formula::or(a.desugar().negate(), b.desugar().negate()).negate(),
            Formula::Next(k, f) => Formula::next(*k, f.desugar()),
            Formula::Until(k, a, b) => Formula::until(*k, a.desugar(), b.desugar()),
            Formula::Eventually(k, f) => Formula::until(*k, Formula::core_true(), f.desugar()),
            Formula::Globally(k, f) => {
                Formula::until(*k, Formula::core_true(), f.desugar().negate()).negate()
            }
        }
    }

    pub fn is_core(&self) -> bool {
        match self {
            Formula::Prop(_) | Formula::Tag(_) => true,
            Formula::Not(f) => !matches!(**f, Formula::Not(_)) && f.is_core(),
            Formula::Or(a, b) | Formula::Until(_, a, b) => a.is_core() && b.is_core(),
            Formula::Next(_, f) => f.is_core(),
            _ => false,
        }
    }

    /// Atomic propositions occurring in the formula (tags excluded).
    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Prop(p) => {
                out.insert(p.clone());
            }
            Formula::True | Formula::False | Formula::Tag(_) => {}
            Formula::Not(f)
            | Formula::Next(_, f)
            | Formula::Eventually(_, f)
            | Formula::Globally(_, f) => f.collect_props(out),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Until(_, a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Prop(_) | Formula::Tag(_) => 1,
            Formula::Not(f)
            | Formula::Next(_, f)
            | Formula::Eventually(_, f)
            | Formula::Globally(_, f) => 1 + f.size(),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Until(_, a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Rename propositions through `f`; used by reductions adding fresh props.
    pub fn map_props(&self, f: &impl Fn(&str) -> String) -> Formula {
        match self {
            Formula::Prop(p) => Formula::Prop(f(p)),
            Formula::True | Formula::False | Formula::Tag(_) => self.clone(),
            Formula::Not(a) => Formula::not(a.map_props(f)),
            Formula::Next(k, a) => Formula::next(*k, a.map_props(f)),
            Formula::Eventually(k, a) => Formula::eventually(*k, a.map_props(f)),
            Formula::Globally(k, a) => Formula::globally(*k, a.map_props(f)),
            Formula::Or(a, b) => Formula::or(a.map_props(f), b.map_props(f)),
            Formula::And(a, b) => Formula::and(a.map_props(f), b.map_props(f)),
            Formula::Until(k, a, b) => Formula::until(*k, a.map_props(f), b.map_props(f)),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Prop(p) => write!(f, "{p}"),
            Formula::Tag(t) => write!(f, "{t}"),
            Formula::Not(a) => write!(f, "!{}", Paren(a)),
            Formula::Or(a, b) => write!(f, "{} || {}", Paren(a), Paren(b)),
            Formula::And(a, b) => write!(f, "{} && {}", Paren(a), Paren(b)),
            Formula::Next(k, a) => write!(f, "X{} {}", k.letter(), Paren(a)),
            Formula::Eventually(k, a) => write!(f, "F{} {}", k.letter(), Paren(a)),
            Formula::Globally(k, a) => write!(f, "G{} {}", k.letter(), Paren(a)),
            Formula::Until(k, a, b) => write!(f, "{} U{} {}", Paren(a), k.letter(), Paren(b)),
        }
    }
}

struct Paren<'a>(&'a Formula);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Formula::True | Formula::False | Formula::Prop(_) | Formula::Tag(_) => {
                write!(f, "{}", self.0)
            }
            other => write!(f, "({other})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
    Unary(char, Kind),
    Until(Kind),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, FormulaError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let two: String = chars[i..].iter().take(2).map(|x| x.1).collect();
        match c {
            '(' => out.push((pos, Tok::LParen)),
            ')' => out.push((pos, Tok::RParen)),
            '!' => out.push((pos, Tok::Not)),
            '&' if two == "&&" => {
                out.push((pos, Tok::And));
                i += 1;
            }
            '|' if two == "||" => {
                out.push((pos, Tok::Or));
                i += 1;
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut j = i;
                while j < chars.len()
                    && (chars[j].1.is_alphanumeric() || chars[j].1 == '_' || chars[j].1 == '\'')
                {
                    j += 1;
                }
                let word: String = chars[i..j].iter().map(|x| x.1).collect();
                out.push((pos, classify(&word, pos)?));
                i = j;
                continue;
            }
            other => {
                return Err(FormulaError::Syntax {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                });
            }
        }
        i += 1;
    }
    Ok(out)
}

fn classify(word: &str, pos: usize) -> Result<Tok, FormulaError> {
    let mut cs = word.chars();
    if let (Some(op @ ('X' | 'F' | 'G' | 'U')), Some(k), None) = (cs.next(), cs.next(), cs.next()) {
        if k.is_ascii_lowercase() {
            let kind = Kind::from_letter(k).ok_or_else(|| FormulaError::Syntax {
                pos,
                msg: format!("unknown successor kind `{k}` in `{word}`"),
            })?;
            return Ok(if op == 'U' {
                Tok::Until(kind)
            } else {
                Tok::Unary(op, kind)
            });
        }
    }
    Ok(Tok::Ident(word.to_string()))
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    ap: Option<&'a BTreeSet<String>>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn or(&mut self) -> Result<Formula, FormulaError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.at += 1;
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, FormulaError> {
        let mut lhs = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, FormulaError> {
        let lhs = self.unary()?;
        if let Some(Tok::Until(k)) = self.peek() {
            let k = *k;
            self.at += 1;
            let rhs = self.until()?;
            return Ok(Formula::until(k, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of formula");
        };
        self.at += 1;
        match tok {
            Tok::Not => Ok(Formula::not(self.unary()?)),
            Tok::Unary(op, k) => {
                let f = self.unary()?;
                Ok(match op {
                    'X' => Formula::next(k, f),
                    'F' => Formula::eventually(k, f),
                    _ => Formula::globally(k, f),
                })
            }
            Tok::LParen => {
                let f = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                self.at += 1;
                Ok(f)
            }
            Tok::Ident(w) => match w.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                _ => {
                    if let Some(t) = Tag::from_name(&w) {
                        return Ok(Formula::Tag(t));
                    }
                    if let Some(ap) = self.ap {
                        if !ap.contains(&w) {
                            return Err(FormulaError::Undeclared(w));
                        }
                    }
                    Ok(Formula::Prop(w))
                }
            },
            other => {
                self.at -= 1;
                self.err(format!("unexpected token {other:?}"))
            }
        }
    }
}

fn parse_with(text: &str, ap: Option<&BTreeSet<String>>) -> Result<Formula, FormulaError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
        ap,
    };
    let f = p.or()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(f)
}

/// Parse surface syntax without desugaring and without checking propositions.
pub fn parse_surface(text: &str) -> Result<Formula, FormulaError> {
    parse_with(text, None)
}

/// Parse, validate propositions against `ap`, and desugar.
pub fn parse_formula(text: &str, ap: &BTreeSet<String>) -> Result<Formula, FormulaError> {
    Ok(parse_with(text, Some(ap))?.desugar())
}
