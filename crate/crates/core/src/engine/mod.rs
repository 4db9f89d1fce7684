//! Büchi pushdown emptiness and membership for networks of product systems.

mod check;
mod saturate;

use serde::Serialize;
use thiserror::Error;

use crate::product::{Gbdpds, Gbdpn};

pub use check::{check, CheckError, CheckOptions, ConfigWitness, Engine, GoodEntry, Verdict};
pub use saturate::{has_accepting_run, pre_star, repeating_heads, Analysis, PAutomaton};

/// A spawn target at the level of the system it lives in.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Target {
    pub process: usize,
    pub control: usize,
    pub word: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BRule {
    pub from: usize,
    pub top: usize,
    pub to: usize,
    pub push: Vec<usize>,
    pub spawn: Option<Target>,
}

/// Pushdown system with a family of acceptance sets over controls.
#[derive(Clone, Debug)]
pub struct GenBdpds {
    pub n_controls: usize,
    pub n_symbols: usize,
    pub rules: Vec<BRule>,
    pub sets: Vec<Vec<bool>>,
}

/// Pushdown system with a single set of accepting controls.
#[derive(Clone, Debug)]
pub struct Bdpds {
    pub n_controls: usize,
    pub n_symbols: usize,
    pub rules: Vec<BRule>,
    pub accepting: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct Bdpn {
    pub members: Vec<Bdpds>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("empty acceptance family")]
    EmptyFamily,
}

/// GBDPN member-wise, with one set per acceptance condition.
pub fn generalized(g: &Gbdpds) -> GenBdpds {
    let n = g.controls.len();
    let sets = g
        .acceptance
        .iter()
        .map(|s| {
            let mut v = vec![false; n];
            for &c in s {
                v[c] = true;
            }
            v
        })
        .collect();
    let rules = g
        .rules
        .iter()
        .map(|r| BRule {
            from: r.from,
            top: r.top,
            to: r.to,
            push: r.push.clone(),
            spawn: r.spawn.as_ref().map(|s| Target {
                process: s.process,
                control: s.control,
                word: s.word.clone(),
            }),
        })
        .collect();
    GenBdpds {
        n_controls: n,
        n_symbols: g.n_symbols(),
        rules,
        sets,
    }
}

/// Counter construction: control `(c, j)` is `c * k + j`; leaving an `F_j`
/// control at index `j` moves to `j + 1 mod k`; accepting are the `F_1` controls
/// at index 0. Spawn targets are re-pointed with `target_k(process)`.
fn degeneralize_with(
    g: &GenBdpds,
    target_k: &dyn Fn(usize) -> usize,
) -> Result<Bdpds, EngineError> {
    let k = g.sets.len();
    if k == 0 {
        return Err(EngineError::EmptyFamily);
    }
    let mut rules = Vec::with_capacity(g.rules.len() * k);
    for r in &g.rules {
        let spawn = r.spawn.as_ref().map(|t| Target {
            control: t.control * target_k(t.process),
            ..t.clone()
        });
        for j in 0..k {
            let j2 = if g.sets[j][r.from] { (j + 1) % k } else { j };
            rules.push(BRule {
                from: r.from * k + j,
                top: r.top,
                to: r.to * k + j2,
                push: r.push.clone(),
                spawn: spawn.clone(),
            });
        }
    }
    let accepting = (0..g.n_controls * k)
        .map(|c| c % k == 0 && g.sets[0][c / k])
        .collect();
    Ok(Bdpds {
        n_controls: g.n_controls * k,
        n_symbols: g.n_symbols,
        rules,
        accepting,
    })
}

/// Degeneralize one system whose spawns stay inside itself.
pub fn degeneralize_gbdpds(g: &GenBdpds) -> Result<Bdpds, EngineError> {
    let k = g.sets.len();
    degeneralize_with(g, &|_| k)
}

/// Member-wise degeneralization; returns the counter size of each member too.
pub fn degeneralize_gbdpn(g: &Gbdpn) -> Result<(Bdpn, Vec<usize>), EngineError> {
    let gens: Vec<GenBdpds> = g.members.iter().map(generalized).collect();
    let ks: Vec<usize> = gens.iter().map(|m| m.sets.len()).collect();
    let members = gens
        .iter()
        .map(|m| degeneralize_with(m, &|p| ks[p]))
        .collect::<Result<_, _>>()?;
    Ok((Bdpn { members }, ks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(sets: Vec<Vec<bool>>) -> GenBdpds {
        // two controls alternating on one symbol
        let rules = vec![
            BRule {
                from: 0,
                top: 0,
                to: 1,
                push: vec![0],
                spawn: None,
            },
            BRule {
                from: 1,
                top: 0,
                to: 0,
                push: vec![0],
                spawn: None,
            },
        ];
        GenBdpds {
            n_controls: 2,
            n_symbols: 1,
            rules,
            sets,
        }
    }

    #[test]
    fn single_set_is_isomorphic() {
        let g = sys(vec![vec![true, false]]);
        let b = degeneralize_gbdpds(&g).unwrap();
        assert_eq!(b.n_controls, 2);
        assert_eq!(b.accepting, vec![true, false]);
        assert_eq!(b.rules, g.rules);
    }

    #[test]
    fn counter_needs_every_set() {
        // control 1 is never in F_2: no accepting run
        let mut g = sys(vec![vec![true, false], vec![false, false]]);
        assert!(!has_accepting_run(
            &degeneralize_gbdpds(&g).unwrap(),
            0,
            &[0],
            None
        ));
        g.sets[1][1] = true;
        assert!(has_accepting_run(
            &degeneralize_gbdpds(&g).unwrap(),
            0,
            &[0],
            None
        ));
    }

    #[test]
    fn empty_family() {
        assert_eq!(
            degeneralize_gbdpds(&sys(vec![])).unwrap_err(),
            EngineError::EmptyFamily
        );
    }
}
