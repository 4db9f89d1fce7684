//! Random small instances for property tests and the acceptance suite.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::caret::{closure, Formula, Kind, Tag};
use crate::dpn::{Dpds, Dpn, LocalConfig, Rule, Spawn};
use crate::engine::{BRule, Bdpds, GenBdpds, PAutomaton};
use crate::reductions::{Action, Dfa, LDpn, RegularValuation, ValEntry};

mod brute;
mod search;

pub use brute::{brute_atoms, brute_closure};
pub use search::{bounded_lasso, bounded_reach, small_stacks};

pub const PROPS: [&str; 2] = ["a", "b"];

fn kind(rng: &mut impl Rng) -> Kind {
    *Kind::ALL.choose(rng).unwrap()
}

fn random_formula_raw(rng: &mut impl Rng, props: &[&str], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..10) {
            0 => Formula::Tag(*Tag::ALL.choose(rng).unwrap()),
            1 => Formula::True,
            _ => Formula::prop(props.choose(rng).unwrap()),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..9) {
        0 => Formula::not(random_formula_raw(rng, props, d)),
        1 => Formula::or(
            random_formula_raw(rng, props, d),
            random_formula_raw(rng, props, d),
        ),
        2 => Formula::and(
            random_formula_raw(rng, props, d),
            random_formula_raw(rng, props, d),
        ),
        3 => Formula::next(kind(rng), random_formula_raw(rng, props, d)),
        4 | 5 => Formula::until(
            kind(rng),
            random_formula_raw(rng, props, d),
            random_formula_raw(rng, props, d),
        ),
        6 => Formula::eventually(kind(rng), random_formula_raw(rng, props, d)),
        _ => Formula::globally(kind(rng), random_formula_raw(rng, props, d)),
    }
}

/// Random formula over `props` whose core closure has at most `max_closure` members.
pub fn random_formula(rng: &mut impl Rng, props: &[&str], max_closure: usize) -> Formula {
    loop {
        let f = random_formula_raw(rng, props, 3);
        if closure(&f.desugar()).len() <= max_closure {
            return f;
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub controls: usize,
    pub symbols: usize,
    pub rules: usize,
    /// spawn rules per process (networks only)
    pub spawns: usize,
}

impl Shape {
    pub fn single() -> Shape {
        Shape {
            controls: 3,
            symbols: 4,
            rules: 10,
            spawns: 0,
        }
    }

    pub fn network() -> Shape {
        Shape {
            controls: 2,
            symbols: 3,
            rules: 7,
            spawns: 2,
        }
    }
}

/// Rule with a shape matching its tag: calls push two symbols, returns
/// pop, internal steps replace the top symbol.
fn random_rule(rng: &mut impl Rng, nc: usize, ns: usize) -> Rule {
    let tag = *[Tag::Call, Tag::Ret, Tag::Int, Tag::Int]
        .choose(rng)
        .unwrap();
    let sym = |rng: &mut _| Rng::gen_range(rng, 0..ns as u32);
    let push = match tag {
        Tag::Call => vec![sym(rng), sym(rng)],
        Tag::Ret => vec![],
        Tag::Int => vec![sym(rng)],
    };
    Rule {
        from: rng.gen_range(0..nc as u32),
        top: sym(rng),
        tag,
        to: rng.gen_range(0..nc as u32),
        push,
        spawn: None,
    }
}

fn random_labels(rng: &mut impl Rng, nc: usize) -> Vec<BTreeSet<String>> {
    (0..nc)
        .map(|_| {
            PROPS
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .map(|p| p.to_string())
                .collect()
        })
        .collect()
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Random network of `n` processes; process `i` uses controls `p<i>_<k>`.
pub fn random_network(rng: &mut impl Rng, n: usize, shape: Shape) -> Dpn {
    let mut dpn = Dpn {
        ap: PROPS.iter().map(|s| s.to_string()).collect(),
        processes: Vec::new(),
        labels: Vec::new(),
    };
    let dims: Vec<(usize, usize)> = (0..n)
        .map(|_| {
            (
                rng.gen_range(1..=shape.controls),
                rng.gen_range(1..=shape.symbols),
            )
        })
        .collect();
    for (i, &(nc, ns)) in dims.iter().enumerate() {
        let mut rules: Vec<Rule> = (0..rng.gen_range(1..=shape.rules))
            .map(|_| random_rule(rng, nc, ns))
            .collect();
        for _ in 0..rng.gen_range(0..=shape.spawns) {
            let j = rng.gen_range(0..n);
            let (tc, ts) = dims[j];
            let word = (0..rng.gen_range(1..=2))
                .map(|_| rng.gen_range(0..ts as u32))
                .collect();
            let mut r = random_rule(rng, nc, ns);
            r.tag = Tag::Int;
            r.push = vec![rng.gen_range(0..ns as u32)];
            r.spawn = Some(Spawn {
                process: j,
                control: rng.gen_range(0..tc as u32),
                word,
            });
            rules.push(r);
        }
        rules.sort_by_key(|r| (r.from, r.top));
        dpn.processes.push(Dpds {
            name: format!("P{i}"),
            controls: names(&format!("p{i}_"), nc),
            symbols: names(&format!("g{i}_"), ns),
            rules,
        });
        dpn.labels.push(random_labels(rng, nc));
    }
    dpn
}

/// Random configuration of process `i` with a stack of 1 or 2 symbols.
pub fn random_config(rng: &mut impl Rng, dpn: &Dpn, i: usize) -> LocalConfig {
    let p = &dpn.processes[i];
    let stack = (0..rng.gen_range(1..=2))
        .map(|_| rng.gen_range(0..p.symbols.len() as u32))
        .collect();
    LocalConfig {
        process: i,
        control: rng.gen_range(0..p.controls.len() as u32),
        stack,
    }
}

/// Pushdown system with arbitrary push lengths up to 3 and no spawns.
pub fn random_bdpds(rng: &mut impl Rng, nc: usize, ns: usize, nrules: usize) -> Bdpds {
    let rules = (0..nrules)
        .map(|_| BRule {
            from: rng.gen_range(0..nc),
            top: rng.gen_range(0..ns),
            to: rng.gen_range(0..nc),
            push: (0..rng.gen_range(0..=3))
                .map(|_| rng.gen_range(0..ns))
                .collect(),
            spawn: None,
        })
        .collect();
    Bdpds {
        n_controls: nc,
        n_symbols: ns,
        rules,
        accepting: (0..nc).map(|_| rng.gen_bool(0.4)).collect(),
    }
}

/// Target automaton with one or two extra states and no transition into a control state.
pub fn random_target(rng: &mut impl Rng, nc: usize, ns: usize) -> PAutomaton {
    let mut a = PAutomaton::new(nc);
    let extra: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| a.add_state()).collect();
    for _ in 0..rng.gen_range(1..=5) {
        let from = rng.gen_range(0..a.n_states);
        a.add_trans(from, rng.gen_range(0..ns), *extra.choose(rng).unwrap());
    }
    for s in 0..a.n_states {
        if rng.gen_bool(0.3) {
            a.set_final(s);
        }
    }
    a.set_final(*extra.choose(rng).unwrap());
    a
}

/// Generalized system with `k` random acceptance sets.
pub fn random_gen_bdpds(
    rng: &mut impl Rng,
    nc: usize,
    ns: usize,
    nrules: usize,
    k: usize,
) -> GenBdpds {
    let b = random_bdpds(rng, nc, ns, nrules);
    let sets = (0..k)
        .map(|_| (0..nc).map(|_| rng.gen_bool(0.4)).collect())
        .collect();
    GenBdpds {
        n_controls: nc,
        n_symbols: ns,
        rules: b.rules,
        sets,
    }
}

/// One- or two-state complete automaton over `ns` symbols.
pub fn random_dfa(rng: &mut impl Rng, ns: usize) -> Dfa {
    let n = rng.gen_range(1..=2);
    let delta = (0..n)
        .map(|_| (0..ns).map(|_| rng.gen_range(0..n)).collect())
        .collect();
    let finals = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
    Dfa {
        states: names("s", n),
        initial: 0,
        finals,
        delta,
    }
}

/// One or two automata for proposition `a` on random controls.
pub fn random_valuation(rng: &mut impl Rng, dpn: &Dpn) -> RegularValuation {
    let entries = (0..rng.gen_range(1..=2))
        .map(|_| {
            let process = rng.gen_range(0..dpn.processes.len());
            let p = &dpn.processes[process];
            ValEntry {
                prop: "a".into(),
                process,
                control: rng.gen_range(0..p.controls.len() as u32),
                dfa: random_dfa(rng, p.symbols.len()),
            }
        })
        .collect();
    RegularValuation { entries }
}

/// Tiny lock network: internal rules only (stack height stays 1), one or two
/// locks, random actions, occasionally a spawn.
pub fn random_ldpn(rng: &mut impl Rng, n: usize) -> LDpn {
    let n_locks = rng.gen_range(1..=2);
    let mut dpn = Dpn {
        ap: PROPS.iter().map(|s| s.to_string()).collect(),
        processes: Vec::new(),
        labels: Vec::new(),
    };
    let mut actions = Vec::new();
    let dims: Vec<(usize, usize)> = (0..n)
        .map(|_| (rng.gen_range(2..=3), rng.gen_range(1..=2)))
        .collect();
    for (i, &(nc, ns)) in dims.iter().enumerate() {
        let mut rules = Vec::new();
        let mut acts = Vec::new();
        // every head gets a rule, so runs rarely die
        let heads: Vec<(u32, u32)> = (0..nc as u32)
            .flat_map(|c| (0..ns as u32).map(move |g| (c, g)))
            .collect();
        let extra = rng.gen_range(0..=3);
        for k in 0..heads.len() + extra {
            let (from, top) = heads
                .get(k)
                .copied()
                .unwrap_or_else(|| *heads.choose(rng).unwrap());
            let spawn = rng.gen_bool(0.1).then(|| {
                let j = rng.gen_range(0..n);
                let (tc, ts) = dims[j];
                Spawn {
                    process: j,
                    control: rng.gen_range(0..tc as u32),
                    word: vec![rng.gen_range(0..ts as u32)],
                }
            });
            rules.push(Rule {
                from,
                top,
                tag: Tag::Int,
                to: rng.gen_range(0..nc as u32),
                push: vec![rng.gen_range(0..ns as u32)],
                spawn,
            });
            let l = rng.gen_range(0..n_locks);
            acts.push(
                *[Action::Tau, Action::Acq(l), Action::Rel(l)]
                    .choose(rng)
                    .unwrap(),
            );
        }
        dpn.processes.push(Dpds {
            name: format!("P{i}"),
            controls: names(&format!("p{i}_"), nc),
            symbols: names(&format!("g{i}_"), ns),
            rules,
        });
        dpn.labels.push(random_labels(rng, nc));
        actions.push(acts);
    }
    LDpn {
        dpn,
        locks: names("l", n_locks),
        actions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn generated_models_validate() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            assert!(random_network(&mut rng, 2, Shape::network())
                .validate()
                .is_empty());
            assert!(random_ldpn(&mut rng, 2).dpn.validate().is_empty());
            let f = random_formula(&mut rng, &PROPS, 14);
            assert!(closure(&f.desugar()).len() <= 14);
        }
    }
}
