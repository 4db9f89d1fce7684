//! Loading inputs and running the checker or the oracle on them.

use std::path::Path;

use anyhow::{bail, Context, Result};
use dpncaret::caret::{parse_formula_file, Formula};
use dpncaret::dpn::{parse_model, Dpn, GlobalConfig, LocalConfig, Stuttered};
use dpncaret::engine::{check, CheckOptions, GoodEntry, Verdict};
use dpncaret::oracle::{
    control_labels, oracle_check_global, oracle_check_ldpn, ExploreBounds, OracleOutcome,
};
use dpncaret::reductions::{
    check_ldpn, parse_valuation, regval_encode, Action, Guess, LDpn, RegularValuation,
};

pub struct Model {
    pub ld: LDpn,
    pub nu: Option<RegularValuation>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

impl Model {
    pub fn load(model: &Path, valuation: Option<&Path>) -> Result<Model> {
        let ld = parse_model(&read(model)?).with_context(|| format!("in {}", model.display()))?;
        let nu = match valuation {
            Some(p) => Some(
                parse_valuation(&read(p)?, &ld.dpn)
                    .with_context(|| format!("in {}", p.display()))?,
            ),
            None => None,
        };
        if nu.is_some() && ld.uses_locks() {
            bail!("regular valuations cannot be combined with lock actions");
        }
        Ok(Model { ld, nu })
    }

    pub fn dpn(&self) -> &Dpn {
        &self.ld.dpn
    }

    pub fn formulas(&self, path: &Path) -> Result<Vec<Formula>> {
        self.formulas_from(&read(path)?)
            .with_context(|| format!("in {}", path.display()))
    }

    pub fn formulas_from(&self, src: &str) -> Result<Vec<Formula>> {
        let names: Vec<String> = self
            .dpn()
            .processes
            .iter()
            .map(|p| p.name.clone())
            .collect();
        Ok(parse_formula_file(src, &names, &self.dpn().ap)?)
    }

    pub fn init(&self, text: &str) -> Result<GlobalConfig> {
        self.dpn()
            .parse_global(text)
            .map_err(|e| anyhow::anyhow!("bad initial configuration: {e}"))
    }
}

/// Checker verdict with configurations named in the input model.
pub struct CheckResult {
    pub verdict: Verdict,
    pub guess: Option<(Guess, usize)>,
}

fn strip_marker(c: &mut LocalConfig, s: &Stuttered) {
    if c.stack.last() == Some(&s.markers[c.process]) {
        c.stack.pop();
    }
}

pub fn run_check(
    m: &Model,
    fs: &[Formula],
    g: &GlobalConfig,
    stutter: bool,
) -> Result<CheckResult> {
    let opts = CheckOptions { stutter };
    if m.ld.uses_locks() {
        let lv = check_ldpn(&m.ld, fs, g, opts)?;
        let verdict = lv
            .verdict
            .expect("lock check always runs at least one guess");
        return Ok(CheckResult {
            verdict,
            guess: lv.guess.map(|q| (q, lv.guesses_tried)),
        });
    }
    let Some(nu) = &m.nu else {
        return Ok(CheckResult {
            verdict: check(m.dpn(), fs, g, opts)?,
            guess: None,
        });
    };
    let s = m.dpn().with_stutter();
    let (base, nu, g0) = if stutter {
        (&s.dpn, nu.stuttered(&s), s.lift_global(g))
    } else {
        (m.dpn(), nu.clone(), g.clone())
    };
    let enc = regval_encode(base, &nu);
    let mut v = check(
        &enc.dpn,
        fs,
        &enc.encode_global(&g0),
        CheckOptions::default(),
    )?;
    let decode = |c: &LocalConfig| {
        let mut d = enc.decode_config(c);
        if stutter {
            strip_marker(&mut d, &s);
        }
        d
    };
    for w in &mut v.per_config {
        w.local = decode(&w.local);
        w.config = m.dpn().show(&w.local);
    }
    v.good_dclics = v
        .good_dclics
        .iter()
        .map(|e| {
            let local = decode(&e.local);
            GoodEntry {
                config: m.dpn().show(&local),
                local,
                atom_index: e.atom_index,
            }
        })
        .collect();
    v.good_dclics
        .sort_by(|a, b| (&a.config, a.atom_index).cmp(&(&b.config, b.atom_index)));
    v.good_dclics.dedup();
    Ok(CheckResult {
        verdict: v,
        guess: None,
    })
}

/// The lock network with a stuttering loop (a τ step) at each bottom marker.
fn stutter_ldpn(ld: &LDpn, s: &Stuttered) -> LDpn {
    let actions = ld
        .actions
        .iter()
        .zip(&s.dpn.processes)
        .map(|(a, p)| {
            let mut a = a.clone();
            a.resize(p.rules.len(), Action::Tau);
            a
        })
        .collect();
    LDpn {
        dpn: s.dpn.clone(),
        locks: ld.locks.clone(),
        actions,
    }
}

/// Oracle answer together with the network it explored (stuttered or not).
pub fn run_oracle(
    m: &Model,
    fs: &[Formula],
    g: &GlobalConfig,
    stutter: bool,
    bounds: &ExploreBounds,
) -> (OracleOutcome, Dpn) {
    let s = m.dpn().with_stutter();
    let (ld, g) = if stutter {
        (stutter_ldpn(&m.ld, &s), s.lift_global(g))
    } else {
        (m.ld.clone(), g.clone())
    };
    let outcome = if let Some(nu) = &m.nu {
        let nu = if stutter {
            nu.stuttered(&s)
        } else {
            nu.clone()
        };
        let labels = |c: &LocalConfig| nu.labels(&ld.dpn, c);
        oracle_check_global(&ld.dpn, fs, &g, bounds, &labels)
    } else if ld.uses_locks() {
        oracle_check_ldpn(&ld, fs, &g, bounds, &control_labels(&ld.dpn))
    } else {
        oracle_check_global(&ld.dpn, fs, &g, bounds, &control_labels(&ld.dpn))
    };
    (outcome, ld.dpn)
}
