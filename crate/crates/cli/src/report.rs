//! Report shapes. Field order is the serialization order.

use std::collections::BTreeMap;
use std::fmt::Write;

use dpncaret::dpn::{Dpn, LocalConfig};
use dpncaret::engine::{ConfigWitness, GoodEntry, Verdict};
use dpncaret::oracle::{OracleAnswer, OracleOutcome, Usage};
use dpncaret::product::Sizes;
use dpncaret::reductions::{Guess, LDpn};
use serde::Serialize;

#[derive(Serialize)]
pub struct LockGuess {
    /// locks held forever, in the order they are finally acquired
    pub tokens: Vec<String>,
    /// index in the initial configuration of the instance owning each token
    pub owners: Vec<usize>,
    pub guesses_tried: usize,
}

impl LockGuess {
    pub fn new(ld: &LDpn, g: &Guess, tried: usize) -> LockGuess {
        LockGuess {
            tokens: g.tokens.iter().map(|&l| ld.locks[l].clone()).collect(),
            owners: g.owners.clone(),
            guesses_tried: tried,
        }
    }
}

#[derive(Serialize)]
pub struct CheckReport<'a> {
    pub verdict: &'static str,
    pub per_config: &'a [ConfigWitness],
    pub good_dclics: &'a [GoodEntry],
    pub sizes: &'a [Sizes],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lock_guess: Option<LockGuess>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<&'static str, f64>>,
}

impl<'a> CheckReport<'a> {
    pub fn new(v: &'a Verdict) -> Self {
        CheckReport {
            verdict: if v.sat { "sat" } else { "unsat" },
            per_config: &v.per_config,
            good_dclics: &v.good_dclics,
            sizes: &v.sizes,
            lock_guess: None,
            timings: None,
        }
    }

    pub fn text(&self) -> String {
        let mut out = format!("verdict: {}\n", self.verdict);
        for w in self.per_config {
            match w.atom_index {
                Some(a) => writeln!(out, "  {}  accepted from atom {a}", w.config),
                None => writeln!(out, "  {}  no accepting run", w.config),
            }
            .unwrap();
        }
        writeln!(out, "good spawn targets: {}", self.good_dclics.len()).unwrap();
        for e in self.good_dclics {
            writeln!(out, "  {}  atom {}", e.config, e.atom_index).unwrap();
        }
        for s in self.sizes {
            writeln!(
                out,
                "product {}: {} atoms, {} controls (+{} popped), {} symbols, {} rules, {} acceptance sets",
                s.process, s.atoms, s.controls, s.popped_controls, s.symbols, s.rules, s.acceptance_sets
            )
            .unwrap();
        }
        if let Some(g) = &self.lock_guess {
            writeln!(
                out,
                "lock guess: [{}] owners {:?} ({} tried)",
                g.tokens.join(" "),
                g.owners,
                g.guesses_tried
            )
            .unwrap();
        }
        timings_text(&mut out, &self.timings);
        out
    }
}

fn timings_text(out: &mut String, t: &Option<BTreeMap<&'static str, f64>>) {
    if let Some(t) = t {
        for (k, v) in t {
            writeln!(out, "time {k}: {v:.3} ms").unwrap();
        }
    }
}

#[derive(Serialize)]
pub struct WitnessReport {
    pub config: String,
    pub prefix: Vec<String>,
    pub period: Vec<String>,
}

#[derive(Serialize)]
pub struct OracleReport {
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub witnesses: Vec<WitnessReport>,
    pub usage: Usage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<&'static str, f64>>,
}

impl OracleReport {
    pub fn new(o: &OracleOutcome, dpn: &Dpn) -> Self {
        let show = |cs: &[LocalConfig]| cs.iter().map(|c| dpn.show(c)).collect();
        let (reason, witnesses) = match &o.answer {
            OracleAnswer::Sat(ws) => (
                None,
                ws.iter()
                    .map(|w| WitnessReport {
                        config: dpn.show(&w.config),
                        prefix: show(&w.prefix),
                        period: show(&w.period),
                    })
                    .collect(),
            ),
            OracleAnswer::Unsat => (None, Vec::new()),
            OracleAnswer::Unknown(rs) => (
                Some(rs.iter().map(|r| r.name()).collect::<Vec<_>>().join(",")),
                Vec::new(),
            ),
        };
        OracleReport {
            verdict: o.answer.verdict(),
            reason,
            witnesses,
            usage: o.usage,
            timings: None,
        }
    }

    pub fn text(&self) -> String {
        let mut out = format!("verdict: {}\n", self.verdict);
        if let Some(r) = &self.reason {
            writeln!(out, "reason: {r}").unwrap();
        }
        for w in &self.witnesses {
            writeln!(out, "  {}", w.config).unwrap();
            writeln!(out, "    prefix: {}", w.prefix.join(" | ")).unwrap();
            writeln!(out, "    period: {}", w.period.join(" | ")).unwrap();
        }
        let u = &self.usage;
        writeln!(
            out,
            "usage: {} nodes, stack {}, {} instances, {} lasso steps, {} interleaving states",
            u.max_nodes, u.max_stack, u.instances, u.lasso_work, u.interleavings
        )
        .unwrap();
        timings_text(&mut out, &self.timings);
        out
    }
}

#[derive(Serialize)]
pub struct AtomReport {
    pub index: usize,
    pub tag: String,
    pub members: Vec<String>,
}

#[derive(Serialize)]
pub struct FormulaReport {
    pub formula: String,
    pub core: String,
    pub closure: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomReport>>,
}

impl FormulaReport {
    pub fn text(&self) -> String {
        let mut out = format!(
            "formula: {}\ncore: {}\nclosure ({}):\n",
            self.formula,
            self.core,
            self.closure.len()
        );
        for f in &self.closure {
            writeln!(out, "  {f}").unwrap();
        }
        if let Some(atoms) = &self.atoms {
            writeln!(out, "atoms ({}):", atoms.len()).unwrap();
            for a in atoms {
                writeln!(
                    out,
                    "  {} [{}] {{{}}}",
                    a.index,
                    a.tag,
                    a.members.join(", ")
                )
                .unwrap();
            }
        }
        out
    }
}

#[derive(Serialize)]
pub struct SizesReport<'a> {
    pub sizes: &'a [Sizes],
}
