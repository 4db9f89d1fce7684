//! Generalized Büchi product of each process with the atoms of its formula.

mod audit;
mod print;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::caret::{AtomTable, Formula, Kind, Tag};
use crate::dpn::{Dpn, GlobalConfig, LocalConfig, Rule};

pub use audit::{audit, AuditReport};
pub use print::{print_product, product_dpn};

/// Whether the current procedure is guessed to return (`Exit`) or not (`Unexit`).
/// `Popped` marks a control that just returned from a bottom-level frame; it only
/// moves on once the uncovered symbol is a plain one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Exit,
    Unexit,
    Popped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProdControl {
    pub base: u32,
    pub atom: usize,
    pub label: Label,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProdSym {
    Plain(u32),
    Annot(u32, usize, Label),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RuleClass {
    /// α1
    Call,
    /// α2.1
    Ret,
    /// α2.2
    Merge,
    /// α3
    Int,
    /// Return from a bottom-level frame.
    TopRet,
    /// Leave `Popped` on a plain symbol.
    Resume,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProdSpawn {
    pub process: usize,
    pub control: usize,
    pub word: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProdRule {
    pub from: usize,
    pub top: usize,
    pub to: usize,
    pub push: Vec<usize>,
    pub spawn: Option<ProdSpawn>,
    pub class: RuleClass,
    /// Index of the source rule (none for merge and resume rules).
    pub source: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductError {
    #[error("{formulas} formulas for {processes} processes")]
    Mismatch { formulas: usize, processes: usize },
    #[error("stack symbol outside the plain alphabet in {0}")]
    NotPlain(String),
}

/// Product sizes, reported by `inspect`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sizes {
    pub process: String,
    pub atoms: usize,
    pub controls: usize,
    pub popped_controls: usize,
    pub symbols: usize,
    pub rules: usize,
    pub acceptance_sets: usize,
}

#[derive(Clone, Debug)]
pub struct Gbdpds {
    pub process: usize,
    pub table: Arc<AtomTable>,
    pub controls: Vec<ProdControl>,
    index: HashMap<ProdControl, usize>,
    pub n_plain: usize,
    pub rules: Vec<ProdRule>,
    /// `F1`, then one set per global until, then one per abstract until.
    pub acceptance: Vec<BTreeSet<usize>>,
}

impl Gbdpds {
    pub fn control_id(&self, c: &ProdControl) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Size of `Γ ∪ Γ × Atoms × {exit, unexit}`.
    pub fn n_symbols(&self) -> usize {
        self.n_plain + self.n_plain * self.table.len() * 2
    }

    pub fn sym_id(&self, s: ProdSym) -> usize {
        match s {
            ProdSym::Plain(g) => g as usize,
            ProdSym::Annot(g, a, l) => {
                assert!(l != Label::Popped, "popped is not a stack label");
                self.n_plain
                    + (g as usize * self.table.len() + a) * 2
                    + (l == Label::Unexit) as usize
            }
        }
    }

    pub fn sym(&self, id: usize) -> ProdSym {
        if id < self.n_plain {
            return ProdSym::Plain(id as u32);
        }
        let k = id - self.n_plain;
        let l = if k % 2 == 1 {
            Label::Unexit
        } else {
            Label::Exit
        };
        let k = k / 2;
        ProdSym::Annot((k / self.table.len()) as u32, k % self.table.len(), l)
    }

    pub fn sizes(&self, dpn: &Dpn) -> Sizes {
        let popped = self
            .controls
            .iter()
            .filter(|c| c.label == Label::Popped)
            .count();
        Sizes {
            process: dpn.processes[self.process].name.clone(),
            atoms: self.table.len(),
            controls: self.controls.len() - popped,
            popped_controls: popped,
            symbols: self.n_symbols(),
            rules: self.rules.len(),
            acceptance_sets: self.acceptance.len(),
        }
    }

    /// Initial atoms whose propositions match the labelling of `control`.
    pub fn initial_for(&self, dpn: &Dpn, control: u32) -> Vec<usize> {
        let mask = self.table.mask_of(dpn.label(self.process, control));
        self.table
            .initial_atoms()
            .into_iter()
            .filter(|&a| self.table.prop_mask(a) == mask)
            .collect()
    }

    /// Product controls `⟨p, A, unexit⟩` for the initial atoms of `p`.
    pub fn initial_controls(&self, dpn: &Dpn, control: u32) -> Vec<(usize, usize)> {
        self.initial_for(dpn, control)
            .into_iter()
            .filter_map(|a| {
                self.control_id(&ProdControl {
                    base: control,
                    atom: a,
                    label: Label::Unexit,
                })
                .map(|id| (a, id))
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Gbdpn {
    pub members: Vec<Gbdpds>,
}

/// A product local configuration: control id and plain stack ids.
pub type ProdConfig = (usize, Vec<usize>);

impl Gbdpn {
    /// For each local configuration of `g`, the candidate product configurations.
    pub fn corresponding_configs(
        &self,
        dpn: &Dpn,
        g: &GlobalConfig,
    ) -> Vec<(LocalConfig, Vec<ProdConfig>)> {
        g.distinct()
            .map(|c| {
                let m = &self.members[c.process];
                let stack: Vec<usize> = c.stack.iter().map(|&s| s as usize).collect();
                let cands = m
                    .initial_controls(dpn, c.control)
                    .into_iter()
                    .map(|(_, id)| (id, stack.clone()))
                    .collect();
                (c.clone(), cands)
            })
            .collect()
    }

    /// All combinations of the per-configuration candidates.
    pub fn corresponding_globals(
        &self,
        dpn: &Dpn,
        g: &GlobalConfig,
    ) -> Vec<Vec<(usize, ProdConfig)>> {
        let mut out: Vec<Vec<(usize, ProdConfig)>> = vec![vec![]];
        for c in g.iter() {
            let cands = &self.corresponding_configs(dpn, &GlobalConfig::new([c.clone()]))[0].1;
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    cands.iter().map(move |cand| {
                        let mut v = prefix.clone();
                        v.push((c.process, cand.clone()));
                        v
                    })
                })
                .collect();
        }
        out
    }
}

struct Builder<'a> {
    dpn: &'a Dpn,
    tables: Vec<Arc<AtomTable>>,
    /// valid atoms per process and control
    valid: Vec<Vec<Vec<usize>>>,
    members: Vec<Gbdpds>,
}

/// Build the product of every process with its formula (one formula per process).
pub fn build_product(dpn: &Dpn, formulas: &[Formula]) -> Result<Gbdpn, ProductError> {
    if formulas.len() != dpn.processes.len() {
        return Err(ProductError::Mismatch {
            formulas: formulas.len(),
            processes: dpn.processes.len(),
        });
    }
    let tables: Vec<Arc<AtomTable>> = formulas
        .iter()
        .map(|f| Arc::new(AtomTable::new(f)))
        .collect();
    let valid = dpn
        .processes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = &tables[i];
            (0..p.controls.len() as u32)
                .map(|c| {
                    let mask = t.mask_of(dpn.label(i, c));
                    (0..t.len()).filter(|&a| t.prop_mask(a) == mask).collect()
                })
                .collect()
        })
        .collect();
    let mut b = Builder {
        dpn,
        tables,
        valid,
        members: Vec::new(),
    };
    b.controls();
    for i in 0..dpn.processes.len() {
        b.rules(i);
        b.acceptance(i);
    }
    Ok(Gbdpn { members: b.members })
}

impl Builder<'_> {
    fn controls(&mut self) {
        for (i, p) in self.dpn.processes.iter().enumerate() {
            let mut controls = Vec::new();
            for c in 0..p.controls.len() as u32 {
                for &a in &self.valid[i][c as usize] {
                    for label in [Label::Exit, Label::Unexit] {
                        controls.push(ProdControl {
                            base: c,
                            atom: a,
                            label,
                        });
                    }
                }
            }
            let index = controls.iter().enumerate().map(|(k, c)| (*c, k)).collect();
            self.members.push(Gbdpds {
                process: i,
                table: self.tables[i].clone(),
                controls,
                index,
                n_plain: p.symbols.len(),
                rules: Vec::new(),
                acceptance: Vec::new(),
            });
        }
    }

    fn spawns(&self, rule: &Rule) -> Option<Vec<Option<ProdSpawn>>> {
        let Some(sp) = &rule.spawn else {
            return Some(vec![None]);
        };
        let m = &self.members[sp.process];
        let word: Vec<usize> = sp.word.iter().map(|&g| g as usize).collect();
        let out: Vec<Option<ProdSpawn>> = m
            .initial_controls(self.dpn, sp.control)
            .into_iter()
            .map(|(_, id)| {
                Some(ProdSpawn {
                    process: sp.process,
                    control: id,
                    word: word.clone(),
                })
            })
            .collect();
        // no initial atom: the spawning rule has no product counterpart
        (!out.is_empty()).then_some(out)
    }

    fn rules(&mut self, i: usize) {
        let t = self.tables[i].clone();
        let dpds = &self.dpn.processes[i];
        let mut rules: Vec<ProdRule> = Vec::new();
        let mut popped: Vec<ProdControl> = Vec::new();
        let mut pushed: BTreeSet<(u32, usize, Label)> = BTreeSet::new();
        let id = |m: &Gbdpds, c: ProdControl| m.control_id(&c).unwrap();
        let xa = |a: usize| t.next_mask(Kind::Abstract, a);
        let xc = |a: usize| t.next_mask(Kind::Caller, a);
        let exit_unexit = [Label::Exit, Label::Unexit];
        for (k, r) in dpds.rules.iter().enumerate() {
            let Some(spawns) = self.spawns(r) else {
                continue;
            };
            let m = &self.members[i];
            let src_atoms: Vec<usize> = self.valid[i][r.from as usize]
                .iter()
                .copied()
                .filter(|&a| t.tag(a) == r.tag)
                .collect();
            let dst_atoms = &self.valid[i][r.to as usize];
            let mut emit = |from, to, push: Vec<usize>, class| {
                for sp in &spawns {
                    rules.push(ProdRule {
                        from,
                        top: r.top as usize,
                        to,
                        push: push.clone(),
                        spawn: sp.clone(),
                        class,
                        source: Some(k),
                    });
                }
            };
            match r.tag {
                Tag::Call => {
                    for &a in &src_atoms {
                        for l in exit_unexit {
                            for &a2 in dst_atoms {
                                if !(t.gl_next(a, a2) && t.caller_next(a2, a)) {
                                    continue;
                                }
                                for l2 in exit_unexit {
                                    if l2 == Label::Unexit && !(l == Label::Unexit && xa(a) == 0) {
                                        continue;
                                    }
                                    pushed.insert((r.push[1], a, l));
                                    let push = vec![
                                        r.push[0] as usize,
                                        m.sym_id(ProdSym::Annot(r.push[1], a, l)),
                                    ];
                                    let from = id(
                                        m,
                                        ProdControl {
                                            base: r.from,
                                            atom: a,
                                            label: l,
                                        },
                                    );
                                    let to = id(
                                        m,
                                        ProdControl {
                                            base: r.to,
                                            atom: a2,
                                            label: l2,
                                        },
                                    );
                                    emit(from, to, push, RuleClass::Call);
                                }
                            }
                        }
                    }
                }
                Tag::Ret => {
                    for &a in &src_atoms {
                        if xa(a) != 0 {
                            continue;
                        }
                        for &a2 in dst_atoms {
                            if !t.gl_next(a, a2) {
                                continue;
                            }
                            let from = id(
                                m,
                                ProdControl {
                                    base: r.from,
                                    atom: a,
                                    label: Label::Exit,
                                },
                            );
                            for l2 in exit_unexit {
                                let to = id(
                                    m,
                                    ProdControl {
                                        base: r.to,
                                        atom: a2,
                                        label: l2,
                                    },
                                );
                                emit(from, to, vec![], RuleClass::Ret);
                            }
                            if xc(a) == 0 && xc(a2) == 0 {
                                let from = id(
                                    m,
                                    ProdControl {
                                        base: r.from,
                                        atom: a,
                                        label: Label::Unexit,
                                    },
                                );
                                let target = ProdControl {
                                    base: r.to,
                                    atom: a2,
                                    label: Label::Popped,
                                };
                                let to = match popped.iter().position(|c| *c == target) {
                                    Some(p) => m.controls.len() + p,
                                    None => {
                                        popped.push(target);
                                        m.controls.len() + popped.len() - 1
                                    }
                                };
                                emit(from, to, vec![], RuleClass::TopRet);
                            }
                        }
                    }
                }
                Tag::Int => {
                    for &a in &src_atoms {
                        for &a2 in dst_atoms {
                            if !(t.gl_next(a, a2) && t.abs_next(a, a2) && xc(a) == xc(a2)) {
                                continue;
                            }
                            for l in exit_unexit {
                                let from = id(
                                    m,
                                    ProdControl {
                                        base: r.from,
                                        atom: a,
                                        label: l,
                                    },
                                );
                                let to = id(
                                    m,
                                    ProdControl {
                                        base: r.to,
                                        atom: a2,
                                        label: l,
                                    },
                                );
                                let push = r.push.iter().map(|&g| g as usize).collect();
                                emit(from, to, push, RuleClass::Int);
                            }
                        }
                    }
                }
            }
        }
        // return-point merges, for the annotated symbols that calls can push
        let m = &self.members[i];
        for (c, pc) in m.controls.iter().enumerate() {
            for &(g, a0, l0) in &pushed {
                if l0 == pc.label && t.abs_next(a0, pc.atom) && xc(a0) == xc(pc.atom) {
                    let top = m.sym_id(ProdSym::Annot(g, a0, l0));
                    rules.push(ProdRule {
                        from: c,
                        top,
                        to: c,
                        push: vec![g as usize],
                        spawn: None,
                        class: RuleClass::Merge,
                        source: None,
                    });
                }
            }
        }
        let base = m.controls.len();
        for (k, pc) in popped.iter().enumerate() {
            let to = id(
                m,
                ProdControl {
                    label: Label::Unexit,
                    ..*pc
                },
            );
            for g in 0..m.n_plain {
                rules.push(ProdRule {
                    from: base + k,
                    top: g,
                    to,
                    push: vec![g],
                    spawn: None,
                    class: RuleClass::Resume,
                    source: None,
                });
            }
        }
        let m = &mut self.members[i];
        for pc in popped {
            m.index.insert(pc, m.controls.len());
            m.controls.push(pc);
        }
        m.rules = rules;
    }

    fn acceptance(&mut self, i: usize) {
        let t = self.tables[i].clone();
        let m = &mut self.members[i];
        let ids = |pred: &dyn Fn(&ProdControl) -> bool| -> BTreeSet<usize> {
            m.controls
                .iter()
                .enumerate()
                .filter(|(_, c)| pred(c))
                .map(|(k, _)| k)
                .collect()
        };
        let mut sets = vec![ids(&|c| c.label == Label::Unexit)];
        let live = |c: &ProdControl, u: usize, chi: usize| {
            let a = t.atom(c.atom);
            !a.contains(u) || a.contains(chi)
        };
        for &(u, chi) in t.untils(Kind::Global) {
            sets.push(ids(&|c| c.label != Label::Popped && live(c, u, chi)));
        }
        for &(u, chi) in t.untils(Kind::Abstract) {
            sets.push(ids(&|c| c.label == Label::Unexit && live(c, u, chi)));
        }
        m.acceptance = sets;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caret::parse_surface;
    use crate::dpn::parse_dpn;

    fn f(s: &str) -> Formula {
        parse_surface(s).unwrap().desugar()
    }

    #[test]
    fn single_control_counts() {
        let dpn = parse_dpn("ap { e; } process P { controls p; } labels { p: {e}; }").unwrap();
        let g = build_product(&dpn, &[f("e")]).unwrap();
        assert_eq!(g.members[0].controls.len(), 6);
        assert_eq!(g.members[0].acceptance.len(), 1);
        let g = build_product(&dpn, &[f("e Ug e")]).unwrap();
        assert_eq!(g.members[0].acceptance.len(), 2);
    }

    #[test]
    fn candidate_configs() {
        let dpn = parse_dpn(
            "ap { e; } process P { controls p; rule p x -> p x [int]; } labels { p: {e}; }",
        )
        .unwrap();
        let g = build_product(&dpn, &[f("e")]).unwrap();
        let gc = dpn.parse_global("P: p x").unwrap();
        assert_eq!(g.corresponding_configs(&dpn, &gc)[0].1.len(), 3);
        assert_eq!(
            g.corresponding_globals(&dpn, &GlobalConfig::default()),
            vec![vec![]]
        );
        let two = dpn.parse_global("P: p x, P: p").unwrap();
        assert_eq!(g.corresponding_globals(&dpn, &two).len(), 9);
    }

    #[test]
    fn symbol_ids_round_trip() {
        let dpn = parse_dpn("ap { } process P { controls p; rule p x -> p y z [call]; }").unwrap();
        let g = &build_product(&dpn, &[f("Xa true")]).unwrap().members[0];
        for id in 0..g.n_symbols() {
            assert_eq!(g.sym_id(g.sym(id)), id);
        }
    }

    #[test]
    fn calls_never_go_from_exit_to_unexit() {
        let dpn = parse_dpn("ap { a; } process P { controls p q; rule p x -> q y z [call]; rule q y -> p [ret]; } labels { q: {a}; }").unwrap();
        let g = &build_product(&dpn, &[f("Fa a || Xg Xc !a")])
            .unwrap()
            .members[0];
        for r in g.rules.iter().filter(|r| r.class == RuleClass::Call) {
            assert!(
                !(g.controls[r.from].label == Label::Exit
                    && g.controls[r.to].label == Label::Unexit)
            );
        }
    }
}
