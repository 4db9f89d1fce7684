use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use super::formula::{Formula, Kind, Tag};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TraceLetter {
    pub props: BTreeSet<String>,
    pub tag: Tag,
}

impl TraceLetter {
    pub fn new<'a>(props: impl IntoIterator<Item = &'a str>, tag: Tag) -> TraceLetter {
        TraceLetter {
            props: props.into_iter().map(str::to_string).collect(),
            tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("empty word")]
    Empty,
    #[error("empty period")]
    EmptyPeriod,
    #[error("period changes the call depth by {0}")]
    Unbalanced(i64),
    #[error("malformed successor map at position {0}")]
    Malformed(usize),
}

/// Finite word with a lasso back-edge and explicit abstract/caller successors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuredWord {
    letters: Vec<TraceLetter>,
    back: Option<usize>,
    abs: Vec<Option<usize>>,
    caller: Vec<Option<usize>>,
}

impl StructuredWord {
    pub fn new(
        letters: Vec<TraceLetter>,
        back: Option<usize>,
        abs: Vec<Option<usize>>,
        caller: Vec<Option<usize>>,
    ) -> Result<StructuredWord, WordError> {
        let n = letters.len();
        if n == 0 {
            return Err(WordError::Empty);
        }
        if abs.len() != n || caller.len() != n || back.is_some_and(|t| t >= n) {
            return Err(WordError::Malformed(n));
        }
        let w = StructuredWord {
            letters,
            back,
            abs,
            caller,
        };
        for i in 0..n {
            let ok_range = w.abs[i].is_none_or(|j| j < n) && w.caller[i].is_none_or(|j| j < n);
            let ok_tag = match w.letters[i].tag {
                Tag::Int => w.abs[i] == w.global(i),
                Tag::Ret => w.abs[i].is_none(),
                Tag::Call => true,
            };
            let ok_caller = w.caller[i].is_none_or(|c| w.letters[c].tag == Tag::Call);
            if !(ok_range && ok_tag && ok_caller) {
                return Err(WordError::Malformed(i));
            }
        }
        Ok(w)
    }

    /// Finite word without back-edge; successor maps from call/ret matching.
    pub fn finite(letters: Vec<TraceLetter>) -> Result<StructuredWord, WordError> {
        if letters.is_empty() {
            return Err(WordError::Empty);
        }
        let n = letters.len();
        let tags: Vec<Tag> = letters.iter().map(|l| l.tag).collect();
        let abs = (0..n)
            .map(|i| match tags[i] {
                Tag::Int => (i + 1 < n).then_some(i + 1),
                Tag::Ret => None,
                Tag::Call => matching_return(|j| (j < n).then(|| tags[j]), i).filter(|&j| j < n),
            })
            .collect();
        let caller = (0..n).map(|i| innermost_call(&tags, i)).collect();
        StructuredWord::new(letters, None, abs, caller)
    }

    /// The ultimately periodic word `prefix · period^ω`, laid out as
    /// prefix + two copies of the period with the back-edge into the second copy.
    pub fn lasso(
        prefix: Vec<TraceLetter>,
        period: Vec<TraceLetter>,
    ) -> Result<StructuredWord, WordError> {
        if period.is_empty() {
            return Err(WordError::EmptyPeriod);
        }
        let balance: i64 = period
            .iter()
            .map(|l| match l.tag {
                Tag::Call => 1,
                Tag::Ret => -1,
                Tag::Int => 0,
            })
            .sum();
        if balance != 0 {
            return Err(WordError::Unbalanced(balance));
        }
        let (u, v) = (prefix.len(), period.len());
        let n = u + 2 * v;
        let mut letters = prefix;
        letters.extend(period.iter().cloned());
        letters.extend(period);
        let fold = |j: usize| if j < n { j } else { u + v + (j - u - v) % v };
        let tags: Vec<Tag> = letters.iter().map(|l| l.tag).collect();
        let tag_at = |j: usize| {
            // the matching return of a call is at most one extra period past the structure
            (j < n + u + 2 * v + 2).then(|| tags[fold(j)])
        };
        let abs = (0..n)
            .map(|i| match tags[i] {
                Tag::Int => Some(fold(i + 1)),
                Tag::Ret => None,
                Tag::Call => matching_return(tag_at, i).map(fold),
            })
            .collect();
        let caller = (0..n).map(|i| innermost_call(&tags, i)).collect();
        StructuredWord::new(letters, Some(u + v), abs, caller)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letter(&self, i: usize) -> &TraceLetter {
        &self.letters[i]
    }

    pub fn letters(&self) -> &[TraceLetter] {
        &self.letters
    }

    pub fn back(&self) -> Option<usize> {
        self.back
    }

    pub fn global(&self, i: usize) -> Option<usize> {
        if i + 1 < self.letters.len() {
            Some(i + 1)
        } else {
            self.back
        }
    }

    pub fn succ(&self, kind: Kind, i: usize) -> Option<usize> {
        match kind {
            Kind::Global => self.global(i),
            Kind::Abstract => self.abs[i],
            Kind::Caller => self.caller[i],
        }
    }

    /// Truth of `f` at position 0.
    pub fn eval(&self, f: &Formula) -> bool {
        self.eval_all(f)[0]
    }

    /// Truth of `f` at every position.
    pub fn eval_all(&self, f: &Formula) -> Vec<bool> {
        let mut memo = HashMap::new();
        self.mark(f, &mut memo)
    }

    fn mark(&self, f: &Formula, memo: &mut HashMap<Formula, Vec<bool>>) -> Vec<bool> {
        if let Some(v) = memo.get(f) {
            return v.clone();
        }
        let n = self.letters.len();
        let out: Vec<bool> = match f {
            Formula::True => vec![true; n],
            Formula::False => vec![false; n],
            Formula::Prop(p) => self.letters.iter().map(|l| l.props.contains(p)).collect(),
            Formula::Tag(t) => self.letters.iter().map(|l| l.tag == *t).collect(),
            Formula::Not(a) => self.mark(a, memo).into_iter().map(|x| !x).collect(),
            Formula::Or(a, b) => {
                let (x, y) = (self.mark(a, memo), self.mark(b, memo));
                x.iter().zip(&y).map(|(p, q)| *p || *q).collect()
            }
            Formula::And(a, b) => {
                let (x, y) = (self.mark(a, memo), self.mark(b, memo));
                x.iter().zip(&y).map(|(p, q)| *p && *q).collect()
            }
            Formula::Next(k, a) => {
                let x = self.mark(a, memo);
                (0..n)
                    .map(|i| self.succ(*k, i).is_some_and(|j| x[j]))
                    .collect()
            }
            Formula::Until(k, a, b) => {
                let (x, y) = (self.mark(a, memo), self.mark(b, memo));
                self.least(*k, &x, &y)
            }
            Formula::Eventually(k, a) => {
                let y = self.mark(a, memo);
                self.least(*k, &vec![true; n], &y)
            }
            Formula::Globally(k, a) => {
                // greatest fixpoint: a holds here and along every existing k-successor
                let x = self.mark(a, memo);
                let mut val = x.clone();
                loop {
                    let mut changed = false;
                    for i in 0..n {
                        if val[i] && self.succ(*k, i).is_some_and(|j| !val[j]) {
                            val[i] = false;
                            changed = true;
                        }
                    }
                    if !changed {
                        break val;
                    }
                }
            }
        };
        memo.insert(f.clone(), out.clone());
        out
    }

    fn least(&self, k: Kind, x: &[bool], y: &[bool]) -> Vec<bool> {
        let n = self.letters.len();
        let mut val = y.to_vec();
        loop {
            let mut changed = false;
            for i in 0..n {
                if !val[i] && x[i] && self.succ(k, i).is_some_and(|j| val[j]) {
                    val[i] = true;
                    changed = true;
                }
            }
            if !changed {
                return val;
            }
        }
    }
}

/// Position after the return matching the call at `i`, scanning `tag_at` until it yields None.
fn matching_return(tag_at: impl Fn(usize) -> Option<Tag>, i: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut j = i + 1;
    while let Some(t) = tag_at(j) {
        match t {
            Tag::Call => depth += 1,
            Tag::Ret if depth == 0 => return Some(j + 1),
            Tag::Ret => depth -= 1,
            Tag::Int => {}
        }
        j += 1;
    }
    None
}

fn innermost_call(tags: &[Tag], i: usize) -> Option<usize> {
    let mut depth = 0usize;
    for j in (0..i).rev() {
        match tags[j] {
            Tag::Ret => depth += 1,
            Tag::Call if depth == 0 => return Some(j),
            Tag::Call => depth -= 1,
            Tag::Int => {}
        }
    }
    None
}

/// `(w, 0) ⊨ f`.
pub fn eval_structured_word(w: &StructuredWord, f: &Formula) -> bool {
    w.eval(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caret::formula::parse_surface;

    fn f(s: &str) -> Formula {
        parse_surface(s).unwrap()
    }

    fn l(props: &[&str], tag: Tag) -> TraceLetter {
        TraceLetter::new(props.iter().copied(), tag)
    }

    #[test]
    fn constant_word() {
        let w = StructuredWord::lasso(vec![], vec![l(&["a"], Tag::Int)]).unwrap();
        assert!(w.eval(&f("Gg a")));
        assert!(w.eval(&f("Gg a").desugar()));
    }

    #[test]
    fn unmatched_call_has_no_abstract_successor() {
        let w = StructuredWord::lasso(vec![l(&[], Tag::Call)], vec![l(&["b"], Tag::Int)]).unwrap();
        assert_eq!(w.succ(Kind::Abstract, 0), None);
        assert!(!w.eval(&f("Xa b")));
        assert!(w.eval(&f("Xg b")));
    }

    #[test]
    fn two_position_until() {
        let w =
            StructuredWord::lasso(vec![], vec![l(&["a"], Tag::Int), l(&["b"], Tag::Int)]).unwrap();
        assert!(w.eval(&f("a Ug b")));
        assert!(w.eval(&f("a Ug b").desugar()));
    }

    #[test]
    fn call_return_structure() {
        // call, int, ret, then the caller frame loops
        let w = StructuredWord::lasso(
            vec![l(&["c"], Tag::Call), l(&["x"], Tag::Int), l(&[], Tag::Ret)],
            vec![l(&["r"], Tag::Int)],
        )
        .unwrap();
        assert_eq!(w.succ(Kind::Abstract, 0), Some(3));
        assert_eq!(w.succ(Kind::Caller, 1), Some(0));
        assert_eq!(w.succ(Kind::Caller, 2), Some(0));
        assert_eq!(w.succ(Kind::Caller, 3), None);
        assert!(w.eval(&f("Xa r")));
        assert!(w.eval(&f("Xg Xc c")));
        assert!(!w.eval(&f("Fa x")));
        assert!(w.eval(&f("Fg x")));
    }

    #[test]
    fn unbalanced_period_rejected() {
        assert_eq!(
            StructuredWord::lasso(vec![], vec![l(&[], Tag::Call)]).unwrap_err(),
            WordError::Unbalanced(1)
        );
    }

    #[test]
    fn malformed_maps_rejected() {
        let r = StructuredWord::new(vec![l(&[], Tag::Ret)], Some(0), vec![Some(0)], vec![None]);
        assert_eq!(r.unwrap_err(), WordError::Malformed(0));
    }
}
