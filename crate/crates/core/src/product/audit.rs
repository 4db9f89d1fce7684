use std::collections::BTreeSet;

use super::{Gbdpds, Gbdpn, Label, ProdControl, ProdSpawn, ProdSym, RuleClass};
use crate::caret::{Atom, AtomTable, Formula, Kind, Tag};
use crate::dpn::Dpn;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub checked: usize,
    pub violations: Vec<String>,
    pub missing: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.missing.is_empty()
    }
}

type Key = (
    ProdControl,
    ProdSym,
    ProdControl,
    Vec<ProdSym>,
    Option<(usize, ProdControl, Vec<usize>)>,
    RuleClass,
);

struct Ctx<'a> {
    dpn: &'a Dpn,
    g: &'a Gbdpn,
    i: usize,
    t: &'a AtomTable,
}

impl Ctx<'_> {
    fn atom(&self, a: usize) -> &Atom {
        self.t.atom(a)
    }

    fn labels_match(&self, t: &AtomTable, process: usize, base: u32, a: usize) -> bool {
        let lambda = self.dpn.label(process, base);
        t.closure()
            .items()
            .iter()
            .enumerate()
            .all(|(o, f)| match f {
                Formula::Prop(p) => t.atom(a).contains(o) == lambda.contains(p),
                _ => true,
            })
    }

    fn succ(&self, k: Kind, a: usize, b: usize) -> bool {
        self.t
            .succ_predicate(k, self.atom(a), self.atom(b))
            .unwrap()
    }

    fn nex(&self, k: Kind, a: usize) -> BTreeSet<Formula> {
        self.t.nex_forms(k, self.atom(a)).into_iter().collect()
    }

    /// Valid product spawn targets for a source spawn.
    fn spawn_choices(
        &self,
        sp: &Option<crate::dpn::Spawn>,
    ) -> Vec<Option<(usize, ProdControl, Vec<usize>)>> {
        let Some(sp) = sp else { return vec![None] };
        let tj = &self.g.members[sp.process].table;
        let root = tj.closure().ordinal(tj.formula()).unwrap();
        (0..tj.len())
            .filter(|&a| {
                tj.atom(a).contains(root)
                    && tj.nex_forms(Kind::Caller, tj.atom(a)).is_empty()
                    && self.labels_match(tj, sp.process, sp.control, a)
            })
            .map(|a| {
                let c = ProdControl {
                    base: sp.control,
                    atom: a,
                    label: Label::Unexit,
                };
                Some((sp.process, c, sp.word.iter().map(|&g| g as usize).collect()))
            })
            .collect()
    }
}

fn key_of(m: &Gbdpds, g: &Gbdpn, r: &super::ProdRule) -> Key {
    let spawn = r.spawn.as_ref().map(
        |ProdSpawn {
             process,
             control,
             word,
         }| {
            (
                *process,
                g.members[*process].controls[*control],
                word.clone(),
            )
        },
    );
    (
        m.controls[r.from],
        m.sym(r.top),
        m.controls[r.to],
        r.push.iter().map(|&s| m.sym(s)).collect(),
        spawn,
        r.class,
    )
}

/// Re-derive every product rule by exhaustive scan and compare with the built product.
pub fn audit(dpn: &Dpn, g: &Gbdpn) -> AuditReport {
    let mut report = AuditReport::default();
    for (i, m) in g.members.iter().enumerate() {
        let cx = Ctx {
            dpn,
            g,
            i,
            t: &m.table,
        };
        let built: BTreeSet<Key> = m.rules.iter().map(|r| key_of(m, g, r)).collect();
        let expected = derive(&cx, m);
        report.checked += built.len();
        for k in built.difference(&expected) {
            report
                .violations
                .push(format!("process {}: unexpected rule {k:?}", cx.i));
        }
        for k in expected.difference(&built) {
            report
                .missing
                .push(format!("process {}: missing rule {k:?}", cx.i));
        }
        for c in &m.controls {
            if !cx.labels_match(cx.t, i, c.base, c.atom) {
                report
                    .violations
                    .push(format!("process {i}: control {c:?} violates its labelling"));
            }
        }
        if m.rules.iter().any(|r| {
            r.push.len() > 1
                && r.class != RuleClass::Call
                && matches!(m.sym(r.push[1]), ProdSym::Annot(..))
        }) {
            report.violations.push(format!(
                "process {i}: annotated symbol pushed outside a call"
            ));
        }
    }
    report
}

fn derive(cx: &Ctx<'_>, m: &Gbdpds) -> BTreeSet<Key> {
    let t = cx.t;
    let dpds = &cx.dpn.processes[cx.i];
    let atoms = 0..t.len();
    let eu = [Label::Exit, Label::Unexit];
    let mut out = BTreeSet::new();
    let mut pushed = BTreeSet::new();
    let pc = |base, atom, label| ProdControl { base, atom, label };
    for r in &dpds.rules {
        let spawns = cx.spawn_choices(&r.spawn);
        for a in atoms.clone() {
            if t.atom(a).tag() != r.tag || !cx.labels_match(t, cx.i, r.from, a) {
                continue;
            }
            for a2 in atoms.clone() {
                if !cx.labels_match(t, cx.i, r.to, a2) || !cx.succ(Kind::Global, a, a2) {
                    continue;
                }
                for l in [Label::Exit, Label::Unexit] {
                    for l2 in [Label::Exit, Label::Unexit, Label::Popped] {
                        let ok = match r.tag {
                            Tag::Call => {
                                l2 != Label::Popped
                                    && cx.succ(Kind::Caller, a2, a)
                                    && (l2 != Label::Unexit
                                        || (l == Label::Unexit
                                            && cx.nex(Kind::Abstract, a).is_empty()))
                            }
                            Tag::Ret if l2 == Label::Popped => {
                                l == Label::Unexit
                                    && cx.nex(Kind::Abstract, a).is_empty()
                                    && cx.nex(Kind::Caller, a).is_empty()
                                    && cx.nex(Kind::Caller, a2).is_empty()
                            }
                            Tag::Ret => l == Label::Exit && cx.nex(Kind::Abstract, a).is_empty(),
                            Tag::Int => {
                                l == l2
                                    && cx.succ(Kind::Abstract, a, a2)
                                    && cx.nex(Kind::Caller, a) == cx.nex(Kind::Caller, a2)
                            }
                        };
                        if !ok {
                            continue;
                        }
                        let (push, class) = match r.tag {
                            Tag::Call => {
                                pushed.insert((r.push[1], a, l));
                                (
                                    vec![
                                        ProdSym::Plain(r.push[0]),
                                        ProdSym::Annot(r.push[1], a, l),
                                    ],
                                    RuleClass::Call,
                                )
                            }
                            Tag::Ret if l2 == Label::Popped => (vec![], RuleClass::TopRet),
                            Tag::Ret => (vec![], RuleClass::Ret),
                            Tag::Int => (
                                r.push.iter().map(|&g| ProdSym::Plain(g)).collect(),
                                RuleClass::Int,
                            ),
                        };
                        for sp in &spawns {
                            out.insert((
                                pc(r.from, a, l),
                                ProdSym::Plain(r.top),
                                pc(r.to, a2, l2),
                                push.clone(),
                                sp.clone(),
                                class,
                            ));
                        }
                    }
                }
            }
        }
    }
    for c in m.controls.iter().filter(|c| eu.contains(&c.label)) {
        for &(g, a0, l0) in &pushed {
            if l0 == c.label
                && cx.succ(Kind::Abstract, a0, c.atom)
                && cx.nex(Kind::Caller, a0) == cx.nex(Kind::Caller, c.atom)
            {
                out.insert((
                    *c,
                    ProdSym::Annot(g, a0, l0),
                    *c,
                    vec![ProdSym::Plain(g)],
                    None,
                    RuleClass::Merge,
                ));
            }
        }
    }
    let popped: BTreeSet<ProdControl> = out
        .iter()
        .filter(|k| k.5 == RuleClass::TopRet)
        .map(|k| k.2)
        .collect();
    for c in popped {
        for g in 0..m.n_plain as u32 {
            let to = ProdControl {
                label: Label::Unexit,
                ..c
            };
            out.insert((
                c,
                ProdSym::Plain(g),
                to,
                vec![ProdSym::Plain(g)],
                None,
                RuleClass::Resume,
            ));
        }
    }
    out
}
