use std::collections::BTreeSet;

use dpncaret::caret::{parse_formula, Formula};
use dpncaret::dpn::parse_dpn;
use dpncaret::engine::{
    check, degeneralize_gbdpds, has_accepting_run, pre_star, repeating_heads, BRule, Bdpds,
    CheckOptions, Engine, PAutomaton, Target,
};
use dpncaret::testing::{
    bounded_lasso, bounded_reach, random_bdpds, random_formula, random_gen_bdpds, random_network,
    random_target, small_stacks, Shape, PROPS,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn rule(from: usize, top: usize, to: usize, push: &[usize]) -> BRule {
    BRule {
        from,
        top,
        to,
        push: push.to_vec(),
        spawn: None,
    }
}

fn system(n_controls: usize, n_symbols: usize, rules: Vec<BRule>, accepting: &[usize]) -> Bdpds {
    let accepting = (0..n_controls).map(|c| accepting.contains(&c)).collect();
    Bdpds {
        n_controls,
        n_symbols,
        rules,
        accepting,
    }
}

#[test]
fn pre_star_one_backward_step() {
    // p γ -> q ε, target {q ε}
    let b = system(2, 1, vec![rule(0, 0, 1, &[])], &[]);
    let mut a = PAutomaton::new(2);
    a.set_final(1);
    let pre = pre_star(&b, &a, None);
    assert!(pre.accepts(1, &[]));
    assert!(pre.accepts(0, &[0]));
    assert!(!pre.accepts(0, &[]));
}

#[test]
fn pre_star_push() {
    // p γ -> p γ γ, target {p γ γ}
    let b = system(1, 1, vec![rule(0, 0, 0, &[0, 0])], &[]);
    let mut a = PAutomaton::new(1);
    let s1 = a.add_state();
    let s2 = a.add_state();
    a.add_trans(0, 0, s1);
    a.add_trans(s1, 0, s2);
    a.set_final(s2);
    let pre = pre_star(&b, &a, None);
    assert!(pre.accepts(0, &[0]));
    assert!(pre.accepts(0, &[0, 0]));
    assert!(!pre.accepts(0, &[]));
}

#[test]
fn repeating_head_examples() {
    let looped = system(1, 1, vec![rule(0, 0, 0, &[0])], &[0]);
    assert_eq!(repeating_heads(&looped, None), [(0, 0)].into());
    let pops = system(2, 2, vec![rule(0, 0, 1, &[]), rule(1, 1, 0, &[])], &[0, 1]);
    assert!(repeating_heads(&pops, None).is_empty());
    // p γ -> q γ' γ ; q γ' -> p ε
    let cycle = system(2, 2, vec![rule(0, 0, 1, &[1, 0]), rule(1, 1, 0, &[])], &[0]);
    assert!(repeating_heads(&cycle, None).contains(&(0, 0)));
}

#[test]
fn accepting_run_examples() {
    let looped = system(1, 1, vec![rule(0, 0, 0, &[0])], &[0]);
    assert!(has_accepting_run(&looped, 0, &[0], None));
    assert!(has_accepting_run(&looped, 0, &[0, 0, 0], None));
    let pops = system(1, 1, vec![rule(0, 0, 0, &[])], &[0]);
    assert!(!has_accepting_run(&pops, 0, &[0, 0], None));
    // p a -> q a ; q a -> p a spawn t ; q a -> q ε : the cycle needs the spawn
    let t = Target {
        process: 1,
        control: 0,
        word: vec![0],
    };
    let mut spawning = system(
        2,
        1,
        vec![rule(0, 0, 1, &[0]), rule(1, 0, 0, &[0]), rule(1, 0, 1, &[])],
        &[0],
    );
    spawning.rules[1].spawn = Some(t.clone());
    assert!(has_accepting_run(&spawning, 0, &[0], Some(&[t].into())));
    assert!(!has_accepting_run(
        &spawning,
        0,
        &[0],
        Some(&BTreeSet::new())
    ));
}

fn formulas(dpn: &dpncaret::dpn::Dpn, texts: &[&str]) -> Vec<Formula> {
    texts
        .iter()
        .map(|t| parse_formula(t, &dpn.ap).unwrap())
        .collect()
}

#[test]
fn good_set_without_spawns_is_empty() {
    let dpn = parse_dpn("process P { controls p; rule p a -> p a [int]; }").unwrap();
    let e = Engine::new(&dpn, &formulas(&dpn, &["true"])).unwrap();
    assert!(e.good_targets().is_empty());
}

#[test]
fn good_set_keeps_target_with_spawn_free_run() {
    let dpn = parse_dpn(
        "process P1 { controls p; rule p a -> p a [int] spawn P2 q b; }
         process P2 { controls q; rule q b -> q b [int]; }",
    )
    .unwrap();
    let e = Engine::new(&dpn, &formulas(&dpn, &["true", "true"])).unwrap();
    let good = e.good_targets();
    assert!(!good.is_empty());
    let configs: BTreeSet<_> = good
        .iter()
        .map(|t| dpn.show(&e.target_config(t).0))
        .collect();
    assert_eq!(configs, ["P2: q b".to_string()].into());
}

#[test]
fn good_set_empties_when_grandchild_fails() {
    let dpn = parse_dpn(
        "process P1 { controls p; rule p a -> p a [int] spawn P2 q b; }
         process P2 { controls q; rule q b -> q b [int] spawn P3 r c; }
         process P3 { controls r; rule r c -> r [ret]; }",
    )
    .unwrap();
    let fs = formulas(&dpn, &["true", "true", "true"]);
    let e = Engine::new(&dpn, &fs).unwrap();
    assert!(e.good_targets().is_empty());
    let g = dpn.parse_global("P1: p a").unwrap();
    assert!(!check(&dpn, &fs, &g, CheckOptions::default()).unwrap().sat);
}

#[test]
fn one_loop_globally() {
    let dpn =
        parse_dpn("ap { a } process P { controls p; rule p g -> p g [int]; } labels { p: {a}; }")
            .unwrap();
    let g = dpn.parse_global("P: p g").unwrap();
    assert!(
        check(
            &dpn,
            &formulas(&dpn, &["Gg a"]),
            &g,
            CheckOptions::default()
        )
        .unwrap()
        .sat
    );
    assert!(
        !check(
            &dpn,
            &formulas(&dpn, &["Fg !a"]),
            &g,
            CheckOptions::default()
        )
        .unwrap()
        .sat
    );
}

#[test]
fn pre_star_matches_bounded_search() {
    let mut rng = StdRng::seed_from_u64(3);
    let (mut agree, mut unknown) = (0, 0);
    for _ in 0..200 {
        let (nc, ns) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let nr = rng.gen_range(1..=12);
        let b = random_bdpds(&mut rng, nc, ns, nr);
        let a = random_target(&mut rng, nc, ns);
        let pre = pre_star(&b, &a, None);
        for p in 0..nc {
            for w in small_stacks(ns) {
                match bounded_reach(&b.rules, &a, p, &w, &[4, 6, 8]) {
                    Some(r) => {
                        assert_eq!(pre.accepts(p, &w), r, "{b:?} {a:?} at {p} {w:?}");
                        agree += 1;
                    }
                    None => unknown += 1,
                }
            }
        }
    }
    assert!(agree > 2 * unknown, "{agree} agreements, {unknown} unknown");
}

#[test]
fn degeneralization_matches_lassos() {
    let mut rng = StdRng::seed_from_u64(4);
    let mut definite = 0;
    for _ in 0..100 {
        let (nc, ns) = (rng.gen_range(1..=3), rng.gen_range(1..=2));
        let k = rng.gen_range(1..=3);
        let nr = rng.gen_range(1..=8);
        let g = random_gen_bdpds(&mut rng, nc, ns, nr, k);
        let d = degeneralize_gbdpds(&g).unwrap();
        for p in 0..nc {
            for w in small_stacks(ns) {
                if let Some(r) = bounded_lasso(&g, p, &w, &[4, 6]) {
                    definite += 1;
                    assert_eq!(
                        has_accepting_run(&d, p * k, &w, None),
                        r,
                        "{g:?} at {p} {w:?}"
                    );
                }
            }
        }
    }
    assert!(definite > 500);
}

#[test]
fn good_set_is_order_independent() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..40 {
        let n = rng.gen_range(1..=2);
        let dpn = random_network(&mut rng, n, Shape::network());
        let fs: Vec<Formula> = (0..n)
            .map(|_| random_formula(&mut rng, &PROPS, 10))
            .collect();
        let e = Engine::new(&dpn, &fs).unwrap();
        let batch = e.good_targets();
        for _ in 0..3 {
            assert_eq!(e.good_targets_sequential(&mut rng), batch);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn more_spawns_never_hurt(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=2);
        let dpn = random_network(&mut rng, n, Shape::network());
        let fs: Vec<Formula> = (0..n).map(|_| random_formula(&mut rng, &PROPS, 10)).collect();
        let e = Engine::new(&dpn, &fs).unwrap();
        let all = e.spawn_targets();
        let small: BTreeSet<Target> = all.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        let (lo, hi) = (e.analyze(Some(&small)), e.analyze(Some(&all)));
        for t in &all {
            if lo[t.process].accepts(t.control, &t.word) {
                prop_assert!(hi[t.process].accepts(t.control, &t.word));
            }
        }
    }
}
