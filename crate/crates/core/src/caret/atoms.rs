use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use super::formula::{Formula, FormulaError, Kind, Tag};

/// Closure of a core formula, in deterministic insertion order.
#[derive(Clone, Debug)]
pub struct ClosureSet {
    items: Vec<Formula>,
    index: HashMap<Formula, usize>,
}

impl ClosureSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Formula] {
        &self.items
    }

    pub fn get(&self, ord: usize) -> &Formula {
        &self.items[ord]
    }

    pub fn ordinal(&self, f: &Formula) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.index.contains_key(f)
    }

    fn insert(&mut self, f: Formula) -> bool {
        if self.index.contains_key(&f) {
            return false;
        }
        self.index.insert(f.clone(), self.items.len());
        self.items.push(f);
        true
    }
}

/// Smallest set containing `f` and the three tags, closed under subformulas,
/// until unrolling and single negation. Sugar is desugared first.
pub fn closure(f: &Formula) -> ClosureSet {
    let f = if f.is_core() { f.clone() } else { f.desugar() };
    let mut set = ClosureSet {
        items: Vec::new(),
        index: HashMap::new(),
    };
    let mut queue = std::collections::VecDeque::new();
    for seed in [
        f,
        Formula::Tag(Tag::Call),
        Formula::Tag(Tag::Ret),
        Formula::Tag(Tag::Int),
    ] {
        if set.insert(seed.clone()) {
            queue.push_back(seed);
        }
    }
    while let Some(g) = queue.pop_front() {
        let mut derived = Vec::new();
        match &g {
            Formula::Not(x) | Formula::Next(_, x) => derived.push((**x).clone()),
            Formula::Or(a, b) => {
                derived.push((**a).clone());
                derived.push((**b).clone());
            }
            Formula::Until(k, a, b) => {
                derived.push((**a).clone());
                derived.push((**b).clone());
                derived.push(Formula::next(*k, g.clone()));
            }
            _ => {}
        }
        if !matches!(g, Formula::Not(_)) {
            derived.push(Formula::not(g.clone()));
        }
        for d in derived {
            if set.insert(d.clone()) {
                queue.push_back(d);
            }
        }
    }
    set
}

/// Maximal consistent subset of a closure with exactly one tag.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    fingerprint: u64,
    members: Vec<bool>,
    tag: Tag,
}

impl Atom {
    pub fn contains(&self, ord: usize) -> bool {
        self.members[ord]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| i)
    }

    pub fn tag(&self) -> Tag {
        self.tag
    }

    fn key(&self) -> impl Iterator<Item = bool> + '_ {
        self.members.iter().rev().copied()
    }
}

#[derive(Clone, Debug, Default)]
struct Sig {
    has: [u64; 3],
    arg: [u64; 3],
    props: u64,
}

/// Atoms of one formula together with the bit signatures the product needs.
#[derive(Clone, Debug)]
pub struct AtomTable {
    formula: Formula,
    closure: ClosureSet,
    fingerprint: u64,
    atoms: Vec<Atom>,
    nexts: [Vec<(usize, usize)>; 3],
    untils: [Vec<(usize, usize)>; 3],
    props: Vec<String>,
    sigs: Vec<Sig>,
}

fn neg_ord(cl: &ClosureSet, ord: usize) -> usize {
    let n = cl.get(ord).clone().negate();
    cl.ordinal(&n).expect("closure is closed under negation")
}

impl AtomTable {
    pub fn new(f: &Formula) -> AtomTable {
        let formula = if f.is_core() { f.clone() } else { f.desugar() };
        let closure = closure(&formula);
        let mut h = DefaultHasher::new();
        formula.hash(&mut h);
        let fingerprint = h.finish();

        let mut nexts: [Vec<(usize, usize)>; 3] = Default::default();
        let mut untils: [Vec<(usize, usize)>; 3] = Default::default();
        let mut props = BTreeSet::new();
        for (i, g) in closure.items().iter().enumerate() {
            match g {
                Formula::Next(k, x) => nexts[k.index()].push((i, closure.ordinal(x).unwrap())),
                Formula::Until(k, _, b) => untils[k.index()].push((i, closure.ordinal(b).unwrap())),
                Formula::Prop(p) => {
                    props.insert(p.clone());
                }
                _ => {}
            }
        }
        let props: Vec<String> = props.into_iter().collect();
        assert!(
            nexts.iter().all(|v| v.len() <= 64) && props.len() <= 64,
            "formula too large for atom signatures"
        );

        let mut table = AtomTable {
            formula,
            closure,
            fingerprint,
            atoms: Vec::new(),
            nexts,
            untils,
            props,
            sigs: Vec::new(),
        };
        table.enumerate();
        table
    }

    fn enumerate(&mut self) {
        let cl = &self.closure;
        let n = cl.len();
        let free: Vec<usize> = (0..n)
            .filter(|&i| matches!(cl.get(i), Formula::Prop(_) | Formula::Next(..)))
            .collect();
        // positives in an order where operands come first
        let mut derived: Vec<usize> = (0..n)
            .filter(|&i| matches!(cl.get(i), Formula::Or(..) | Formula::Until(..)))
            .collect();
        derived.sort_by_key(|&i| cl.get(i).size());
        let tag_ord = Tag::ALL.map(|t| cl.ordinal(&Formula::Tag(t)).unwrap());

        let mut atoms = Vec::new();
        for (ti, tag) in Tag::ALL.iter().enumerate() {
            for bits in 0u64..(1u64 << free.len()) {
                let mut val: Vec<Option<bool>> = vec![None; n];
                for (j, &ord) in free.iter().enumerate() {
                    val[ord] = Some(bits >> j & 1 == 1);
                }
                for (tj, &ord) in tag_ord.iter().enumerate() {
                    val[ord] = Some(tj == ti);
                }
                let lit = |val: &Vec<Option<bool>>, f: &Formula| -> bool {
                    match f {
                        Formula::Not(x) => !val[cl.ordinal(x).unwrap()].unwrap(),
                        other => val[cl.ordinal(other).unwrap()].unwrap(),
                    }
                };
                for &ord in &derived {
                    let v = match cl.get(ord) {
                        Formula::Or(a, b) => lit(&val, a) || lit(&val, b),
                        Formula::Until(k, a, b) => {
                            let x = Formula::next(*k, cl.get(ord).clone());
                            lit(&val, b) || (lit(&val, a) && val[cl.ordinal(&x).unwrap()].unwrap())
                        }
                        _ => unreachable!(),
                    };
                    val[ord] = Some(v);
                }
                let members: Vec<bool> = (0..n)
                    .map(|i| match cl.get(i) {
                        Formula::Not(x) => !val[cl.ordinal(x).unwrap()].unwrap(),
                        _ => val[i].unwrap(),
                    })
                    .collect();
                atoms.push(Atom {
                    fingerprint: self.fingerprint,
                    members,
                    tag: *tag,
                });
            }
        }
        atoms.sort_by(|a, b| a.key().cmp(b.key()));
        self.sigs = atoms.iter().map(|a| self.signature(a)).collect();
        self.atoms = atoms;
    }

    fn signature(&self, a: &Atom) -> Sig {
        let mut s = Sig::default();
        for k in 0..3 {
            for (bit, &(x, arg)) in self.nexts[k].iter().enumerate() {
                if a.contains(x) {
                    s.has[k] |= 1 << bit;
                }
                if a.contains(arg) {
                    s.arg[k] |= 1 << bit;
                }
            }
        }
        for (bit, p) in self.props.iter().enumerate() {
            if a.contains(self.closure.ordinal(&Formula::Prop(p.clone())).unwrap()) {
                s.props |= 1 << bit;
            }
        }
        s
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn closure(&self) -> &ClosureSet {
        &self.closure
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn tag(&self, i: usize) -> Tag {
        self.atoms[i].tag
    }

    /// Propositions of the closure, sorted; bit j of a prop mask is `props()[j]`.
    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn prop_mask(&self, i: usize) -> u64 {
        self.sigs[i].props
    }

    /// Restriction of a label set to the closure's propositions, as a mask.
    pub fn mask_of(&self, labels: &BTreeSet<String>) -> u64 {
        self.props
            .iter()
            .enumerate()
            .filter(|(_, p)| labels.contains(*p))
            .fold(0, |m, (j, _)| m | 1 << j)
    }

    /// `X^b` members of atom `i` as a bitmask over the kind's next-formulas.
    pub fn next_mask(&self, kind: Kind, i: usize) -> u64 {
        self.sigs[i].has[kind.index()]
    }

    /// Index-level successor predicate: for every `X^b φ`, `X^b φ ∈ A_i ⇔ φ ∈ A_j`.
    pub fn succ(&self, kind: Kind, i: usize, j: usize) -> bool {
        self.sigs[i].has[kind.index()] == self.sigs[j].arg[kind.index()]
    }

    pub fn gl_next(&self, i: usize, j: usize) -> bool {
        self.succ(Kind::Global, i, j)
    }

    pub fn abs_next(&self, i: usize, j: usize) -> bool {
        self.succ(Kind::Abstract, i, j)
    }

    /// `CallerNext(A_i, A_j)`: `X^c φ ∈ A_i ⇔ φ ∈ A_j`.
    pub fn caller_next(&self, i: usize, j: usize) -> bool {
        self.succ(Kind::Caller, i, j)
    }

    pub fn succ_predicate(&self, kind: Kind, a: &Atom, b: &Atom) -> Result<bool, FormulaError> {
        if a.fingerprint != self.fingerprint || b.fingerprint != self.fingerprint {
            return Err(FormulaError::Mismatch);
        }
        Ok(self.nexts[kind.index()]
            .iter()
            .all(|&(x, arg)| a.contains(x) == b.contains(arg)))
    }

    /// Members of `a` of the form `X^b φ`.
    pub fn nex_forms(&self, kind: Kind, a: &Atom) -> Vec<Formula> {
        self.nexts[kind.index()]
            .iter()
            .filter(|(x, _)| a.contains(*x))
            .map(|(x, _)| self.closure.get(*x).clone())
            .collect()
    }

    /// Until formulas of a kind, as (ordinal of the until, ordinal of its right operand).
    pub fn untils(&self, kind: Kind) -> &[(usize, usize)] {
        &self.untils[kind.index()]
    }

    /// Atoms containing the root formula and no caller-next formula.
    pub fn initial_atoms(&self) -> Vec<usize> {
        let root = self.closure.ordinal(&self.formula).unwrap();
        (0..self.atoms.len())
            .filter(|&i| {
                self.atoms[i].contains(root) && self.sigs[i].has[Kind::Caller.index()] == 0
            })
            .collect()
    }

    /// Whether atom `i` contains `f` (which must be a closure member).
    pub fn holds(&self, i: usize, f: &Formula) -> Option<bool> {
        self.closure.ordinal(f).map(|o| self.atoms[i].contains(o))
    }

    /// Check the four atom conditions directly on a membership vector.
    pub fn is_consistent(cl: &ClosureSet, members: &[bool]) -> bool {
        let n = cl.len();
        let has = |f: &Formula| cl.ordinal(f).map(|o| members[o]);
        for i in 0..n {
            if members[i] == members[neg_ord(cl, i)] {
                return false;
            }
            match cl.get(i) {
                Formula::Or(a, b) => {
                    if members[i] != (has(a).unwrap() || has(b).unwrap()) {
                        return false;
                    }
                }
                Formula::Until(k, a, b) => {
                    let x = Formula::next(*k, cl.get(i).clone());
                    let rhs = has(b).unwrap() || (has(a).unwrap() && has(&x).unwrap());
                    if members[i] != rhs {
                        return false;
                    }
                }
                _ => {}
            }
        }
        Tag::ALL
            .iter()
            .filter(|t| has(&Formula::Tag(**t)).unwrap())
            .count()
            == 1
    }
}

/// Convenience: the atom list of a formula.
pub fn atoms(f: &Formula) -> Vec<Atom> {
    AtomTable::new(f).atoms
}
