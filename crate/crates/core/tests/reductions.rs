use std::collections::{BTreeSet, VecDeque};

use dpncaret::caret::{parse_formula, Formula};
use dpncaret::dpn::{parse_dpn, parse_model, Dpn, GlobalConfig, LocalConfig};
use dpncaret::engine::{check, CheckOptions};
use dpncaret::oracle::{control_labels, oracle_check_global, oracle_check_ldpn, ExploreBounds};
use dpncaret::reductions::{check_ldpn, ldpn_to_dpn, regval_encode, Guess, LDpn};
use dpncaret::testing::{
    random_config, random_formula, random_ldpn, random_network, random_valuation, Shape, PROPS,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn bounds() -> ExploreBounds {
    ExploreBounds {
        steps: 400,
        stack: 4,
        lassos: 20_000,
        ..ExploreBounds::default()
    }
}

fn reachable(dpn: &Dpn, c0: &LocalConfig, limit: usize) -> Vec<LocalConfig> {
    let mut seen = BTreeSet::from([c0.clone()]);
    let mut queue = VecDeque::from([c0.clone()]);
    while let Some(c) = queue.pop_front() {
        for s in dpn.step(&c) {
            if s.next.stack.len() <= 5 && seen.len() < limit && seen.insert(s.next.clone()) {
                queue.push_back(s.next);
            }
        }
    }
    seen.into_iter().collect()
}

#[test]
fn regval_agrees_with_direct_labels() {
    let mut rng = StdRng::seed_from_u64(21);
    let mut definite = 0;
    for _ in 0..60 {
        let n = rng.gen_range(1..=2);
        let mut dpn = random_network(&mut rng, n, Shape::network());
        if rng.gen_bool(0.5) {
            dpn = dpn.with_stutter().dpn;
        }
        let nu = random_valuation(&mut rng, &dpn);
        let fs: Vec<Formula> = (0..n)
            .map(|_| random_formula(&mut rng, &PROPS, 12))
            .collect();
        let g = GlobalConfig::new((0..n).map(|i| random_config(&mut rng, &dpn, i)));
        let enc = regval_encode(&dpn, &nu);
        let v = check(
            &enc.dpn,
            &fs,
            &enc.encode_global(&g),
            CheckOptions::default(),
        )
        .unwrap();
        let labels = |c: &LocalConfig| nu.labels(&dpn, c);
        let o = oracle_check_global(&dpn, &fs, &g, &bounds(), &labels);
        if let Some(sat) = o.answer.definite() {
            definite += 1;
            assert_eq!(v.sat, sat, "{fs:?}\n{nu:?}\n{dpn:?}");
        }
    }
    assert!(definite >= 30, "only {definite} definite");
}

#[test]
fn regval_annotations_stay_coherent() {
    let mut rng = StdRng::seed_from_u64(22);
    for _ in 0..40 {
        let dpn = random_network(&mut rng, 2, Shape::network());
        let nu = random_valuation(&mut rng, &dpn);
        let enc = regval_encode(&dpn, &nu);
        for i in 0..2 {
            let c = random_config(&mut rng, &dpn, i);
            let encoded = reachable(&enc.dpn, &enc.encode_config(&c), 300);
            for e in &encoded {
                assert!(enc.coherent(e), "{e:?}");
            }
            let base: BTreeSet<_> = encoded.iter().map(|e| enc.decode_config(e)).collect();
            let direct: BTreeSet<_> = reachable(&dpn, &c, 300).into_iter().collect();
            if base.len() < 300 && direct.len() < 300 {
                assert_eq!(base, direct);
            }
        }
    }
}

#[test]
fn constant_valuation_labels_everything() {
    let dpn = parse_dpn(
        "ap { e } process P { controls p q; rule p x -> q y x [call]; rule q y -> p [ret]; }",
    )
    .unwrap();
    let src = "automaton e for P { states s; initial s; final s; s _ -> s; }";
    let nu = dpncaret::reductions::parse_valuation(src, &dpn).unwrap();
    let enc = regval_encode(&dpn, &nu);
    let c = dpn.parse_local("P: p x").unwrap();
    for e in reachable(&enc.dpn, &enc.encode_config(&c), 100) {
        assert!(enc.dpn.label(e.process, e.control).contains("e"));
    }
}

const HOLD: &str = "
    ap { crit }
    locks { l }
    process A { controls a0 a1; rule a0 g -> a1 g [int] [acq l]; rule a1 g -> a1 g [int]; }
    process B { controls b0 b1; rule b0 g -> b1 g [int] [acq l]; rule b1 g -> b1 g [int]; }
    labels { a1: {crit}; b1: {crit}; }
";

#[test]
fn hold_forever_is_unsat_both_ways() {
    let ld = parse_model(HOLD).unwrap();
    let f = parse_formula("Fg Gg crit", &ld.dpn.ap).unwrap();
    let fs = [f.clone(), f];
    let ab = ld.dpn.parse_global("A: a0 g, B: b0 g").unwrap();
    assert!(
        !check_ldpn(&ld, &fs, &ab, CheckOptions::default())
            .unwrap()
            .sat
    );
    let labels = control_labels(&ld.dpn);
    assert_eq!(
        oracle_check_ldpn(&ld, &fs, &ab, &ExploreBounds::default(), &labels)
            .answer
            .definite(),
        Some(false)
    );
    for single in ["A: a0 g", "B: b0 g"] {
        let g = ld.dpn.parse_global(single).unwrap();
        assert!(
            check_ldpn(&ld, &fs, &g, CheckOptions::default())
                .unwrap()
                .sat
        );
    }
}

#[test]
fn tau_only_is_the_plain_network() {
    let mut rng = StdRng::seed_from_u64(23);
    for _ in 0..20 {
        let dpn = random_network(&mut rng, 2, Shape::network());
        let actions = dpn
            .processes
            .iter()
            .map(|p| vec![dpncaret::reductions::Action::Tau; p.rules.len()])
            .collect();
        let ld = LDpn {
            dpn: dpn.clone(),
            locks: Vec::new(),
            actions,
        };
        let fs: Vec<Formula> = (0..2)
            .map(|_| random_formula(&mut rng, &PROPS, 10))
            .collect();
        let g = GlobalConfig::new((0..2).map(|i| random_config(&mut rng, &dpn, i)));
        let opts = CheckOptions { stutter: true };
        assert_eq!(
            check_ldpn(&ld, &fs, &g, opts).unwrap().sat,
            check(&dpn, &fs, &g, opts).unwrap().sat
        );
        let enc = ldpn_to_dpn(
            &ld,
            &Guess {
                tokens: vec![],
                owners: vec![],
            },
            &g,
        );
        // the encoding is the control-reachable part, one copy per control
        let mut live: BTreeSet<(usize, u32)> = g.iter().map(|c| (c.process, c.control)).collect();
        loop {
            let mut next = live.clone();
            for &(i, c) in &live {
                for r in dpn.processes[i].rules.iter().filter(|r| r.from == c) {
                    next.insert((i, r.to));
                    if let Some(sp) = &r.spawn {
                        next.insert((sp.process, sp.control));
                    }
                }
            }
            if next == live {
                break;
            }
            live = next;
        }
        for (i, p) in enc.dpn.processes.iter().enumerate() {
            assert_eq!(p.controls.len(), live.iter().filter(|l| l.0 == i).count());
            let base_of = |c: u32| enc.states[i][c as usize].0;
            let mut encoded: Vec<_> = p
                .rules
                .iter()
                .map(|r| (base_of(r.from), r.top, r.tag, base_of(r.to), r.push.clone()))
                .collect();
            let mut base: Vec<_> = dpn.processes[i]
                .rules
                .iter()
                .filter(|r| live.contains(&(i, r.from)))
                .map(|r| (r.from, r.top, r.tag, r.to, r.push.clone()))
                .collect();
            encoded.sort();
            base.sort();
            assert_eq!(encoded, base);
        }
    }
}

#[test]
fn random_lock_networks_agree_with_interleavings() {
    let mut rng = StdRng::seed_from_u64(24);
    let mut definite = 0;
    for _ in 0..40 {
        let n = rng.gen_range(1..=2);
        let ld = random_ldpn(&mut rng, n);
        let fs: Vec<Formula> = (0..n)
            .map(|_| random_formula(&mut rng, &PROPS, 8))
            .collect();
        let g = GlobalConfig::new((0..n).map(|i| random_config(&mut rng, &ld.dpn, i)));
        let v = check_ldpn(&ld, &fs, &g, CheckOptions::default()).unwrap();
        let labels = control_labels(&ld.dpn);
        let o = oracle_check_ldpn(&ld, &fs, &g, &ExploreBounds::default(), &labels);
        if let Some(sat) = o.answer.definite() {
            definite += 1;
            assert_eq!(v.sat, sat, "{fs:?}\n{ld:?}");
        }
    }
    assert!(definite >= 20, "only {definite} definite");
}
