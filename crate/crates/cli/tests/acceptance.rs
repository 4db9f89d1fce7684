//! The ten acceptance criteria. Each prints one PASS/FAIL line; the test fails if any does.
//!
//! Run with `cargo test -p dpncaret-cli --test acceptance`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dpncaret::caret::{closure, parse_formula, parse_surface, AtomTable, Formula};
use dpncaret::dpn::{parse_dpn, parse_model, GlobalConfig, LocalConfig};
use dpncaret::engine::{check, degeneralize_gbdpds, has_accepting_run, pre_star, CheckOptions};
use dpncaret::oracle::{
    control_labels, oracle_check_global, oracle_check_ldpn, oracle_check_local, ExploreBounds,
};
use dpncaret::product::{audit, build_product};
use dpncaret::reductions::{check_ldpn, regval_encode, Action, LDpn};
use dpncaret::testing::{
    bounded_lasso, bounded_reach, brute_atoms, brute_closure, random_bdpds, random_config,
    random_formula, random_gen_bdpds, random_ldpn, random_network, random_target, random_valuation,
    small_stacks, Shape, PROPS,
};
use dpncaret_cli::session::{run_check, run_oracle, Model};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Res = Result<String, String>;

/// Name, body and optional time limit in seconds.
type Criterion = (&'static str, fn() -> Res, Option<u64>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(name)
}

fn text(name: &str) -> String {
    std::fs::read_to_string(corpus(name)).unwrap()
}

fn bounds() -> ExploreBounds {
    ExploreBounds {
        steps: 400,
        stack: 4,
        lassos: 20_000,
        ..ExploreBounds::default()
    }
}

fn atom_sets(core: &Formula) -> BTreeSet<BTreeSet<Formula>> {
    let t = AtomTable::new(core);
    t.atoms()
        .iter()
        .map(|a| a.members().map(|k| t.closure().get(k).clone()).collect())
        .collect()
}

fn c1_atoms() -> Res {
    for (s, cl, at) in [("e", 8, 6), ("Xg e", 10, 12), ("a Ug b", 14, 24)] {
        let core = parse_surface(s).unwrap().desugar();
        let mine: BTreeSet<Formula> = closure(&core).items().iter().cloned().collect();
        ensure(mine == brute_closure(&core), || {
            format!("closure of {s} differs from enumeration")
        })?;
        ensure(mine.len() == cl, || {
            format!("closure of {s} has {} members", mine.len())
        })?;
        let brute: BTreeSet<_> = brute_atoms(&core).into_iter().collect();
        ensure(atom_sets(&core) == brute, || {
            format!("atoms of {s} differ from enumeration")
        })?;
        ensure(brute.len() == at, || {
            format!("{s} has {} atoms", brute.len())
        })?;
    }
    let mut rng = StdRng::seed_from_u64(101);
    for _ in 0..20 {
        let core = random_formula(&mut rng, &PROPS, 12).desugar();
        ensure(
            atom_sets(&core) == brute_atoms(&core).into_iter().collect(),
            || format!("atoms of {core} differ"),
        )?;
    }
    Ok("closures 8/10/14, atoms 6/12/24, 20 random formulas match enumeration".into())
}

fn c2_example() -> Res {
    let dpn = parse_dpn(&text("example1.dpn")).unwrap();
    let d =
        |i: usize| -> BTreeSet<String> { dpn.dclics_of(i).iter().map(|c| dpn.show(c)).collect() };
    let want: [BTreeSet<String>; 3] = [
        ["P2: p2 m'1".into(), "P3: p3 g''1".into()].into(),
        ["P1: p1 g0".into()].into(),
        BTreeSet::new(),
    ];
    for (i, w) in want.iter().enumerate() {
        ensure(&d(i) == w, || format!("D{} = {:?}", i + 1, d(i)))?;
    }
    Ok("D1 = {p2 m'1, p3 g''1}, D2 = {p1 g0}, D3 = {}".into())
}

fn c3_audit() -> Res {
    let mut rng = StdRng::seed_from_u64(103);
    let (mut pairs, mut rules) = (0, 0);
    while pairs < 100 {
        let n = rng.gen_range(1..=2);
        let dpn = random_network(&mut rng, n, Shape::network());
        let fs: Vec<Formula> = (0..n)
            .map(|_| random_formula(&mut rng, &PROPS, 14).desugar())
            .collect();
        let g = build_product(&dpn, &fs).unwrap();
        let r = audit(&dpn, &g);
        ensure(r.is_clean(), || {
            format!("violations {:?} missing {:?}", r.violations, r.missing)
        })?;
        pairs += n;
        rules += r.checked;
    }
    Ok(format!(
        "{pairs} pairs, {rules} rules re-derived, 0 violations, 0 missing"
    ))
}

fn c4_single() -> Res {
    let mut rng = StdRng::seed_from_u64(104);
    let (mut definite, mut sat) = (0, 0);
    for _ in 0..200 {
        let dpn = random_network(&mut rng, 1, Shape::single());
        let f = random_formula(&mut rng, &PROPS, 14);
        let c = random_config(&mut rng, &dpn, 0);
        let v = check(
            &dpn,
            std::slice::from_ref(&f),
            &GlobalConfig::new([c.clone()]),
            CheckOptions::default(),
        )
        .unwrap();
        let o = oracle_check_local(&dpn, &c, &f, &bounds(), &control_labels(&dpn));
        if let Some(s) = o.answer.definite() {
            ensure(v.sat == s, || {
                format!("disagreement on {f} at {}\n{dpn:?}", dpn.show(&c))
            })?;
            definite += 1;
            sat += s as usize;
        }
    }
    ensure(definite >= 100, || {
        format!("only {definite} definite oracle answers")
    })?;
    Ok(format!(
        "200 instances, {definite} definite ({sat} sat), 0 disagreements"
    ))
}

fn c5_networks() -> Res {
    let mut rng = StdRng::seed_from_u64(105);
    let (mut definite, mut sat) = (0, 0);
    for _ in 0..200 {
        let n = rng.gen_range(1..=2);
        let dpn = random_network(&mut rng, n, Shape::network());
        let fs: Vec<Formula> = (0..n)
            .map(|_| random_formula(&mut rng, &PROPS, 14))
            .collect();
        let g = GlobalConfig::new((0..n).map(|i| random_config(&mut rng, &dpn, i)));
        let stutter = rng.gen_bool(0.5);
        let v = check(&dpn, &fs, &g, CheckOptions { stutter }).unwrap();
        let (model, g0) = if stutter {
            let s = dpn.with_stutter();
            let g0 = s.lift_global(&g);
            (s.dpn, g0)
        } else {
            (dpn.clone(), g.clone())
        };
        let o = oracle_check_global(&model, &fs, &g0, &bounds(), &control_labels(&model));
        if let Some(s) = o.answer.definite() {
            ensure(v.sat == s, || {
                format!("disagreement on {fs:?} stutter {stutter}\n{dpn:?}")
            })?;
            definite += 1;
            sat += s as usize;
        }
    }
    ensure(definite >= 100, || {
        format!("only {definite} definite oracle answers")
    })?;
    Ok(format!(
        "200 networks, {definite} definite ({sat} sat), 0 disagreements"
    ))
}

fn c6_pre_star() -> Res {
    let mut rng = StdRng::seed_from_u64(106);
    let (mut agree, mut unknown) = (0, 0);
    for _ in 0..500 {
        let (nc, ns) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let nr = rng.gen_range(1..=12);
        let b = random_bdpds(&mut rng, nc, ns, nr);
        let a = random_target(&mut rng, nc, ns);
        let pre = pre_star(&b, &a, None);
        for p in 0..nc {
            for w in small_stacks(ns) {
                match bounded_reach(&b.rules, &a, p, &w, &[4, 6, 8]) {
                    Some(r) => {
                        ensure(pre.accepts(p, &w) == r, || {
                            format!("{b:?} {a:?} at {p} {w:?}")
                        })?;
                        agree += 1;
                    }
                    None => unknown += 1,
                }
            }
        }
    }
    Ok(format!(
        "500 systems, {agree} memberships agree, {unknown} left open by the stack bound"
    ))
}

fn c7_degeneralize() -> Res {
    let mut rng = StdRng::seed_from_u64(107);
    let (mut definite, mut accepted, mut unknown) = (0, 0, 0);
    for _ in 0..100 {
        let (nc, ns) = (rng.gen_range(1..=3), rng.gen_range(1..=2));
        let k = rng.gen_range(1..=3);
        let nr = rng.gen_range(1..=8);
        let g = random_gen_bdpds(&mut rng, nc, ns, nr, k);
        let d = degeneralize_gbdpds(&g).unwrap();
        for p in 0..nc {
            for w in small_stacks(ns) {
                match bounded_lasso(&g, p, &w, &[4, 6]) {
                    Some(r) => {
                        ensure(has_accepting_run(&d, p * k, &w, None) == r, || {
                            format!("{g:?} at {p} {w:?}")
                        })?;
                        definite += 1;
                        accepted += r as usize;
                    }
                    None => unknown += 1,
                }
            }
        }
    }
    Ok(format!("100 instances, {definite} configurations agree ({accepted} accepting), {unknown} left open"))
}

fn c8_regval() -> Res {
    let mut rng = StdRng::seed_from_u64(108);
    let (mut definite, mut sat) = (0, 0);
    for _ in 0..80 {
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
        if let Some(s) = o.answer.definite() {
            ensure(v.sat == s, || format!("{fs:?}\n{nu:?}\n{dpn:?}"))?;
            definite += 1;
            sat += s as usize;
        }
    }
    ensure(definite >= 50, || {
        format!("only {definite} definite oracle answers")
    })?;
    Ok(format!(
        "80 instances, {definite} definite ({sat} sat), 0 disagreements"
    ))
}

fn c9_locks() -> Res {
    let ld = parse_model(&text("hold.dpn")).unwrap();
    let f = parse_formula("Fg Gg crit", &ld.dpn.ap).unwrap();
    let fs = [f.clone(), f];
    let ab = ld.dpn.parse_global("A: a0 g, B: b0 g").unwrap();
    ensure(
        !check_ldpn(&ld, &fs, &ab, CheckOptions::default())
            .unwrap()
            .sat,
        || "hold-forever checked sat".into(),
    )?;
    let o = oracle_check_ldpn(
        &ld,
        &fs,
        &ab,
        &ExploreBounds::default(),
        &control_labels(&ld.dpn),
    );
    ensure(o.answer.definite() == Some(false), || {
        format!("hold-forever oracle says {}", o.answer.verdict())
    })?;

    let mut rng = StdRng::seed_from_u64(109);
    for _ in 0..20 {
        let dpn = random_network(&mut rng, 2, Shape::network());
        let actions = dpn
            .processes
            .iter()
            .map(|p| vec![Action::Tau; p.rules.len()])
            .collect();
        let tau = LDpn {
            dpn: dpn.clone(),
            locks: Vec::new(),
            actions,
        };
        let fs: Vec<Formula> = (0..2)
            .map(|_| random_formula(&mut rng, &PROPS, 10))
            .collect();
        let g = GlobalConfig::new((0..2).map(|i| random_config(&mut rng, &dpn, i)));
        let opts = CheckOptions {
            stutter: rng.gen_bool(0.5),
        };
        let (a, b) = (
            check_ldpn(&tau, &fs, &g, opts).unwrap().sat,
            check(&dpn, &fs, &g, opts).unwrap().sat,
        );
        ensure(a == b, || {
            format!("tau-only verdict {a}, plain verdict {b}\n{dpn:?}")
        })?;
    }

    let (mut definite, mut sat) = (0, 0);
    for _ in 0..60 {
        let n = rng.gen_range(1..=2);
        let ld = random_ldpn(&mut rng, n);
        let fs: Vec<Formula> = (0..n)
            .map(|_| random_formula(&mut rng, &PROPS, 8))
            .collect();
        let g = GlobalConfig::new((0..n).map(|i| random_config(&mut rng, &ld.dpn, i)));
        let v = check_ldpn(&ld, &fs, &g, CheckOptions::default()).unwrap();
        let o = oracle_check_ldpn(
            &ld,
            &fs,
            &g,
            &ExploreBounds::default(),
            &control_labels(&ld.dpn),
        );
        if let Some(s) = o.answer.definite() {
            ensure(v.sat == s, || format!("{fs:?}\n{ld:?}"))?;
            definite += 1;
            sat += s as usize;
        }
    }
    ensure(definite >= 30, || {
        format!("only {definite} definite oracle answers")
    })?;
    Ok(format!("hold-forever unsat both ways, 20 tau-only networks identical, {definite}/60 lock networks agree ({sat} sat)"))
}

fn bagle(model: &str, formulas: &str) -> Result<bool, String> {
    let m = Model::load(
        &corpus(&format!("bagle/{model}")),
        Some(&corpus("bagle/bagle.val")),
    )
    .unwrap();
    let fs = m.formulas(&corpus(&format!("bagle/{formulas}"))).unwrap();
    let g = m.init("Main: m m0").unwrap();
    let v = run_check(&m, &fs, &g, false).unwrap().verdict.sat;
    let (o, _) = run_oracle(&m, &fs, &g, false, &ExploreBounds::default());
    ensure(o.answer.definite() == Some(v), || {
        format!(
            "{model} {formulas}: check {v}, oracle {}",
            o.answer.verdict()
        )
    })?;
    Ok(v)
}

fn c10_bagle() -> Res {
    let psi = ["psi1.caret", "psi2.caret", "psi3.caret", "psi4.caret"];
    ensure(bagle("bagle.dpn", "psi.caret")?, || {
        "worm fails the conjunction".into()
    })?;
    for p in psi {
        ensure(bagle("bagle.dpn", p)?, || format!("worm fails {p}"))?;
    }
    for i in 1..=4 {
        let m = format!("mutant{i}.dpn");
        ensure(!bagle(&m, "psi.caret")?, || {
            format!("{m} satisfies the conjunction")
        })?;
        for (j, p) in psi.iter().enumerate() {
            let sat = bagle(&m, p)?;
            ensure(sat == (j + 1 != i), || format!("{m} on {p}: sat = {sat}"))?;
        }
    }
    Ok("worm satisfies all four, mutant i fails exactly psi_i; checker and oracle agree on 25 runs".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("atom machinery", c1_atoms, Some(1)),
        ("example dclics", c2_example, None),
        ("product audit", c3_audit, Some(120)),
        ("single-process reflection", c4_single, Some(300)),
        ("network agreement", c5_networks, Some(600)),
        ("saturation", c6_pre_star, None),
        ("degeneralization", c7_degeneralize, None),
        ("regular valuations", c8_regval, None),
        ("locks", c9_locks, None),
        ("worm corpus", c10_bagle, None),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = t.elapsed();
        let r = match (r, limit) {
            (Ok(_), Some(s)) if took > Duration::from_secs(s) => {
                Err(format!("took {took:.2?}, limit {s} s"))
            }
            (r, _) => r,
        };
        match r {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why} [{took:.2?}]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
