//! Closure and atoms by direct enumeration, written without the crate's own tables.

use std::collections::BTreeSet;

use crate::caret::{Formula, Tag};

fn neg(f: &Formula) -> Formula {
    match f {
        Formula::Not(x) => (**x).clone(),
        _ => Formula::Not(Box::new(f.clone())),
    }
}

fn collect(f: &Formula, out: &mut BTreeSet<Formula>) {
    if !out.insert(f.clone()) {
        return;
    }
    match f {
        Formula::Not(x) | Formula::Next(_, x) => collect(x, out),
        Formula::Or(a, b) => {
            collect(a, out);
            collect(b, out);
        }
        Formula::Until(k, a, b) => {
            collect(a, out);
            collect(b, out);
            collect(&Formula::Next(*k, Box::new(f.clone())), out);
        }
        _ => {}
    }
}

/// Closure of a core formula: subformulas, until unrollings, tags and single negations.
pub fn brute_closure(f: &Formula) -> BTreeSet<Formula> {
    let mut pos = BTreeSet::new();
    collect(f, &mut pos);
    for t in Tag::ALL {
        collect(&Formula::Tag(t), &mut pos);
    }
    pos.iter().flat_map(|g| [g.clone(), neg(g)]).collect()
}

/// Every subset of the closure meeting the atom conditions.
pub fn brute_atoms(f: &Formula) -> Vec<BTreeSet<Formula>> {
    let cl: Vec<Formula> = brute_closure(f).into_iter().collect();
    assert!(cl.len() < 28, "closure too large to enumerate");
    let mut out = Vec::new();
    for bits in 0u32..1 << cl.len() {
        let m: BTreeSet<Formula> = cl
            .iter()
            .enumerate()
            .filter(|(i, _)| bits >> i & 1 == 1)
            .map(|(_, g)| g.clone())
            .collect();
        let ok = cl.iter().all(|g| {
            let consistent = m.contains(g) != m.contains(&neg(g));
            let rule = match g {
                Formula::Or(a, b) => m.contains(g) == (m.contains(&**a) || m.contains(&**b)),
                Formula::Until(k, a, b) => {
                    let x = Formula::Next(*k, Box::new(g.clone()));
                    m.contains(g) == (m.contains(&**b) || (m.contains(&**a) && m.contains(&x)))
                }
                _ => true,
            };
            consistent && rule
        });
        let tags = Tag::ALL
            .iter()
            .filter(|t| m.contains(&Formula::Tag(**t)))
            .count();
        if ok && tags == 1 {
            out.push(m);
        }
    }
    out
}
