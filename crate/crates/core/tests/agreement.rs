use dpncaret::caret::Formula;
use dpncaret::dpn::GlobalConfig;
use dpncaret::engine::{check, CheckOptions};
use dpncaret::oracle::{control_labels, oracle_check_global, oracle_check_local, ExploreBounds};
use dpncaret::testing::{random_config, random_formula, random_network, Shape, PROPS};
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

#[test]
fn single_process_agrees_with_oracle() {
    let mut rng = StdRng::seed_from_u64(11);
    let (mut definite, mut n) = (0, 0);
    while n < 100 {
        let dpn = random_network(&mut rng, 1, Shape::single());
        let f = random_formula(&mut rng, &PROPS, 14);
        let stutter = rng.gen_bool(0.5);
        let c = random_config(&mut rng, &dpn, 0);
        let g = GlobalConfig::new([c.clone()]);
        let v = check(&dpn, std::slice::from_ref(&f), &g, CheckOptions { stutter }).unwrap();
        let (model, c0) = if stutter {
            let s = dpn.with_stutter();
            let c0 = s.lift(&c);
            (s.dpn, c0)
        } else {
            (dpn.clone(), c.clone())
        };
        let labels = control_labels(&model);
        let o = oracle_check_local(&model, &c0, &f, &bounds(), &labels);
        n += 1;
        if let Some(sat) = o.answer.definite() {
            definite += 1;
            assert_eq!(
                v.sat,
                sat,
                "formula {f} stutter {stutter} config {}\n{dpn:?}",
                dpn.show(&c)
            );
        }
    }
    assert!(definite >= 30, "only {definite} definite");
}

#[test]
fn networks_agree_with_oracle() {
    let mut rng = StdRng::seed_from_u64(12);
    let mut definite = 0;
    for _ in 0..100 {
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
        let labels = control_labels(&model);
        let o = oracle_check_global(&model, &fs, &g0, &bounds(), &labels);
        if let Some(sat) = o.answer.definite() {
            definite += 1;
            assert_eq!(v.sat, sat, "formulas {fs:?} stutter {stutter}\n{dpn:?}");
        }
    }
    assert!(definite >= 30, "only {definite} definite");
}
