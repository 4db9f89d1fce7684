use std::collections::BTreeSet;

use dpncaret::caret::parse_formula_file;
use dpncaret::dpn::parse_dpn;
use dpncaret::engine::{check, CheckOptions};
use dpncaret::oracle::{control_labels, explore_local, oracle_check_global, ExploreBounds};

const MODEL: &str = include_str!("../../cli/corpus/example1.dpn");

fn dclics(i: usize) -> BTreeSet<String> {
    let dpn = parse_dpn(MODEL).unwrap();
    dpn.dclics_of(i).iter().map(|c| dpn.show(c)).collect()
}

#[test]
fn dclics_per_process() {
    assert_eq!(
        dclics(0),
        ["P2: p2 m'1".to_string(), "P3: p3 g''1".to_string()].into()
    );
    assert_eq!(dclics(1), ["P1: p1 g0".to_string()].into());
    assert!(dclics(2).is_empty());
}

#[test]
fn p3_halts_without_stuttering() {
    let dpn = parse_dpn(MODEL).unwrap();
    let c = dpn.parse_local("P3: p3 g''1").unwrap();
    assert!(explore_local(&dpn, &c, &ExploreBounds::default())
        .lassos
        .is_empty());
    let s = dpn.with_stutter();
    assert!(
        !explore_local(&s.dpn, &s.lift(&c), &ExploreBounds::default())
            .lassos
            .is_empty()
    );
}

#[test]
fn trivial_formulas_hold_with_stuttering() {
    let dpn = parse_dpn(MODEL).unwrap();
    let names: Vec<String> = dpn.processes.iter().map(|p| p.name.clone()).collect();
    let fs = parse_formula_file("default: true", &names, &dpn.ap).unwrap();
    let g = dpn.parse_global("P1: p1 m0").unwrap();
    assert!(
        check(&dpn, &fs, &g, CheckOptions { stutter: true })
            .unwrap()
            .sat
    );
    // without stuttering the helper instances halt
    assert!(!check(&dpn, &fs, &g, CheckOptions::default()).unwrap().sat);
    let s = dpn.with_stutter();
    let labels = control_labels(&s.dpn);
    let o = oracle_check_global(
        &s.dpn,
        &fs,
        &s.lift_global(&g),
        &ExploreBounds::default(),
        &labels,
    );
    assert_eq!(o.answer.definite(), Some(true));
}

#[test]
fn false_for_main_is_unsat() {
    let dpn = parse_dpn(MODEL).unwrap();
    let names: Vec<String> = dpn.processes.iter().map(|p| p.name.clone()).collect();
    let fs = parse_formula_file(
        include_str!("../../cli/corpus/false.caret"),
        &names,
        &dpn.ap,
    )
    .unwrap();
    let g = dpn.parse_global("P1: p1 m0").unwrap();
    let v = check(&dpn, &fs, &g, CheckOptions { stutter: true }).unwrap();
    assert!(!v.sat);
    assert_eq!(v.per_config[0].atom_index, None);
}
