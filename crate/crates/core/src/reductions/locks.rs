use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::caret::{Formula, Kind};
use crate::dpn::{print_model, Dpds, Dpn, GlobalConfig, LocalConfig, Rule, Spawn};
use crate::engine::{check, CheckError, CheckOptions, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Tau,
    Acq(usize),
    Rel(usize),
}

/// A network whose rules carry lock actions; `actions[i][k]` belongs to rule `k` of process `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LDpn {
    pub dpn: Dpn,
    pub locks: Vec<String>,
    pub actions: Vec<Vec<Action>>,
}

impl fmt::Display for LDpn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_model(&self.dpn, &self.locks, &self.actions))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Error)]
pub enum LockViolation {
    #[error("step {step}: acquires lock {lock} it already holds")]
    Reentrant { step: usize, lock: usize },
    #[error("step {step}: releases lock {lock} which is not the innermost one held")]
    NotInnermost { step: usize, lock: usize },
}

impl LDpn {
    pub fn uses_locks(&self) -> bool {
        self.actions.iter().flatten().any(|a| *a != Action::Tau)
    }

    pub fn action(&self, process: usize, rule: usize) -> Action {
        self.actions[process][rule]
    }

    /// Locks acquired by some rule.
    pub fn acquired_locks(&self) -> BTreeSet<usize> {
        self.actions
            .iter()
            .flatten()
            .filter_map(|a| {
                if let Action::Acq(l) = a {
                    Some(*l)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Apply one action to a held-lock stack (innermost last) under the nested discipline.
pub fn apply_action(held: &[usize], a: Action, step: usize) -> Result<Vec<usize>, LockViolation> {
    let mut h = held.to_vec();
    match a {
        Action::Tau => {}
        Action::Acq(l) if h.contains(&l) => return Err(LockViolation::Reentrant { step, lock: l }),
        Action::Acq(l) => h.push(l),
        Action::Rel(l) if h.last() == Some(&l) => {
            h.pop();
        }
        Action::Rel(l) => return Err(LockViolation::NotInnermost { step, lock: l }),
    }
    Ok(h)
}

/// Violations of the nested, non-reentrant discipline along one action sequence.
pub fn validate_actions(run: &[Action]) -> Vec<LockViolation> {
    let mut held = Vec::new();
    let mut out = Vec::new();
    for (k, &a) in run.iter().enumerate() {
        match apply_action(&held, a, k) {
            Ok(h) => held = h,
            Err(v) => out.push(v),
        }
    }
    out
}

/// Violations reachable from `roots` within `max_nodes` explored configurations,
/// reported as `(configuration, held locks, violation)`.
pub fn validate_nested(
    ld: &LDpn,
    roots: &GlobalConfig,
    max_nodes: usize,
) -> Vec<(LocalConfig, Vec<usize>, LockViolation)> {
    let mut seen: BTreeSet<(LocalConfig, Vec<usize>)> = BTreeSet::new();
    let mut queue: VecDeque<(LocalConfig, Vec<usize>)> =
        roots.distinct().map(|c| (c.clone(), Vec::new())).collect();
    let mut out = Vec::new();
    while let Some((c, held)) = queue.pop_front() {
        if seen.len() >= max_nodes || !seen.insert((c.clone(), held.clone())) {
            continue;
        }
        for s in ld.dpn.step(&c) {
            match apply_action(&held, ld.action(c.process, s.rule), 0) {
                Ok(h) => queue.push_back((s.next, h)),
                Err(v) => out.push((c.clone(), held.clone(), v)),
            }
            if let Some(sp) = s.spawned {
                queue.push_back((sp, Vec::new()));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Locks that will be held forever, in the order they are finally acquired,
/// and for each the root instance whose spawn tree may acquire it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Guess {
    pub tokens: Vec<usize>,
    pub owners: Vec<usize>,
}

/// Per-instance lock bookkeeping carried in encoded controls.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LockState {
    /// number of tokens finally acquired so far, as seen by this instance
    pub stage: usize,
    /// held locks, innermost last, with the "held forever" flag
    pub held: Vec<(usize, bool)>,
    /// tokens this instance (or its future children) may still finally acquire
    pub resp: BTreeSet<usize>,
}

impl LockState {
    fn root(resp: BTreeSet<usize>) -> LockState {
        LockState {
            stage: 0,
            held: Vec::new(),
            resp,
        }
    }
}

/// The lock network turned into a plain network over controls `(p, state)`.
#[derive(Clone, Debug)]
pub struct LockEncoding {
    pub dpn: Dpn,
    pub ok_prop: String,
    pub guess: Guess,
    /// per process: base control and lock state of each encoded control
    pub states: Vec<Vec<(u32, LockState)>>,
    roots: Vec<LocalConfig>,
}

impl LockEncoding {
    /// Encoded root instances, in the order of the global configuration.
    pub fn roots(&self) -> GlobalConfig {
        GlobalConfig::new(self.roots.iter().cloned())
    }

    /// `f ∧ Gg Fg ok` for each process formula.
    pub fn formulas(&self, formulas: &[Formula]) -> Vec<Formula> {
        let live = Formula::globally(
            Kind::Global,
            Formula::eventually(Kind::Global, Formula::prop(&self.ok_prop)),
        );
        formulas
            .iter()
            .map(|f| Formula::and(f.clone(), live.clone()))
            .collect()
    }
}

struct Stages<'a> {
    ld: &'a LDpn,
    tokens: &'a [usize],
    /// 1-based finalization index of each lock that is a token
    index: HashMap<usize, usize>,
}

impl Stages<'_> {
    fn k(&self) -> usize {
        self.tokens.len()
    }

    fn ok(&self, st: &LockState) -> bool {
        st.stage == self.k() && st.held.iter().all(|h| h.1)
    }

    /// States after performing `a` from `st`, advancing the stage first if wanted.
    fn after(&self, st: &LockState, a: Action) -> BTreeSet<LockState> {
        let mut out = BTreeSet::new();
        for s2 in st.stage..=self.k() {
            let crossed = &self.tokens[st.stage..s2];
            if st.held.iter().any(|&(l, fin)| !fin && crossed.contains(&l)) {
                break;
            }
            let mut base = st.clone();
            base.stage = s2;
            for l in crossed {
                base.resp.remove(l);
            }
            match a {
                Action::Tau => {
                    out.insert(base);
                }
                Action::Rel(l) => {
                    if base.held.last() == Some(&(l, false)) {
                        base.held.pop();
                        out.insert(base);
                    }
                }
                Action::Acq(l) => {
                    if base.held.iter().any(|h| h.0 == l) {
                        continue;
                    }
                    let idx = self.index.get(&l).copied();
                    if idx.is_none_or(|j| j > s2) {
                        let mut t = base.clone();
                        t.held.push((l, false));
                        out.insert(t);
                    }
                    if idx == Some(s2 + 1)
                        && base.resp.contains(&l)
                        && base.held.iter().all(|h| h.1)
                    {
                        let mut t = base;
                        t.stage = s2 + 1;
                        t.resp.remove(&l);
                        t.held.push((l, true));
                        out.insert(t);
                    }
                }
            }
        }
        out
    }

    fn name(&self, base: &str, st: &LockState) -> String {
        let lock = |l: usize| self.ld.locks[l].clone();
        let held: Vec<String> = st
            .held
            .iter()
            .map(|&(l, f)| if f { format!("{}!", lock(l)) } else { lock(l) })
            .collect();
        let resp: Vec<String> = st.resp.iter().map(|&l| lock(l)).collect();
        let join = |v: Vec<String>| {
            if v.is_empty() {
                "-".to_string()
            } else {
                v.join(".")
            }
        };
        format!("{base}@{}@{}@{}", st.stage, join(held), join(resp))
    }
}

fn subsets(s: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let v: Vec<usize> = s.iter().copied().collect();
    (0..1u32 << v.len())
        .map(|m| {
            v.iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, &l)| l)
                .collect()
        })
        .collect()
}

fn fresh_prop(ap: &BTreeSet<String>) -> String {
    let mut p = String::from("lk_ok");
    while ap.contains(&p) {
        p.push('_');
    }
    p
}

/// Product of every process with the stage structure of `guess`, restricted to
/// the controls reachable from `roots` (taken with multiplicity) and spawns.
pub fn ldpn_to_dpn(ld: &LDpn, guess: &Guess, roots: &GlobalConfig) -> LockEncoding {
    let stages = Stages {
        ld,
        tokens: &guess.tokens,
        index: guess
            .tokens
            .iter()
            .enumerate()
            .map(|(j, &l)| (l, j + 1))
            .collect(),
    };
    let n = ld.dpn.processes.len();
    let ok_prop = fresh_prop(&ld.dpn.ap);
    let mut states: Vec<Vec<(u32, LockState)>> = vec![Vec::new(); n];
    let mut index: Vec<HashMap<(u32, LockState), u32>> = vec![HashMap::new(); n];
    let mut queue: VecDeque<(usize, u32)> = VecDeque::new();
    let mut intern = |i: usize,
                      key: (u32, LockState),
                      states: &mut Vec<Vec<(u32, LockState)>>,
                      queue: &mut VecDeque<(usize, u32)>| {
        *index[i].entry(key.clone()).or_insert_with(|| {
            states[i].push(key);
            let id = states[i].len() as u32 - 1;
            queue.push_back((i, id));
            id
        })
    };
    let mut encoded_roots = Vec::new();
    for (r, c) in roots.iter().enumerate() {
        let resp = guess
            .tokens
            .iter()
            .zip(&guess.owners)
            .filter(|(_, &o)| o == r)
            .map(|(&l, _)| l)
            .collect();
        let id = intern(
            c.process,
            (c.control, LockState::root(resp)),
            &mut states,
            &mut queue,
        );
        encoded_roots.push(LocalConfig {
            process: c.process,
            control: id,
            stack: c.stack.clone(),
        });
    }
    let mut rules: Vec<Vec<Rule>> = vec![Vec::new(); n];
    while let Some((i, id)) = queue.pop_front() {
        let (c, st) = states[i][id as usize].clone();
        for (k, r) in ld.dpn.processes[i]
            .rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.from == c)
        {
            for st2 in stages.after(&st, ld.action(i, k)) {
                let deleg = if r.spawn.is_some() {
                    subsets(&st2.resp)
                } else {
                    vec![BTreeSet::new()]
                };
                for d in deleg {
                    let mut parent = st2.clone();
                    parent.resp.retain(|l| !d.contains(l));
                    let spawn = r.spawn.as_ref().map(|sp| {
                        let child = LockState {
                            stage: st2.stage,
                            held: Vec::new(),
                            resp: d.clone(),
                        };
                        let cid = intern(sp.process, (sp.control, child), &mut states, &mut queue);
                        Spawn {
                            process: sp.process,
                            control: cid,
                            word: sp.word.clone(),
                        }
                    });
                    let to = intern(i, (r.to, parent), &mut states, &mut queue);
                    rules[i].push(Rule {
                        from: id,
                        top: r.top,
                        tag: r.tag,
                        to,
                        push: r.push.clone(),
                        spawn,
                    });
                }
            }
        }
    }
    let mut ap = ld.dpn.ap.clone();
    ap.insert(ok_prop.clone());
    let mut dpn = Dpn {
        ap,
        processes: Vec::new(),
        labels: Vec::new(),
    };
    for (i, p) in ld.dpn.processes.iter().enumerate() {
        let controls = states[i]
            .iter()
            .map(|(c, st)| stages.name(&p.controls[*c as usize], st))
            .collect();
        let labels = states[i]
            .iter()
            .map(|(c, st)| {
                let mut l = ld.dpn.label(i, *c).clone();
                if stages.ok(st) {
                    l.insert(ok_prop.clone());
                }
                l
            })
            .collect();
        dpn.processes.push(Dpds {
            name: p.name.clone(),
            controls,
            symbols: p.symbols.clone(),
            rules: std::mem::take(&mut rules[i]),
        });
        dpn.labels.push(labels);
    }
    LockEncoding {
        dpn,
        ok_prop,
        guess: guess.clone(),
        states,
        roots: encoded_roots,
    }
}

/// Every ordered selection of acquired locks with an owner among `n_roots` instances.
pub fn guesses(ld: &LDpn, n_roots: usize) -> Vec<Guess> {
    let locks: Vec<usize> = ld.acquired_locks().into_iter().collect();
    let mut seqs: Vec<Vec<usize>> = vec![vec![]];
    let mut frontier = seqs.clone();
    for _ in 0..locks.len() {
        let mut next = Vec::new();
        for s in &frontier {
            for &l in &locks {
                if !s.contains(&l) {
                    let mut t = s.clone();
                    t.push(l);
                    next.push(t);
                }
            }
        }
        seqs.extend(next.iter().cloned());
        frontier = next;
    }
    let mut out = Vec::new();
    for tokens in seqs {
        if n_roots == 0 && !tokens.is_empty() {
            continue;
        }
        let k = tokens.len();
        let total = n_roots.max(1).pow(k as u32);
        for code in 0..total {
            let mut c = code;
            let owners = (0..k)
                .map(|_| {
                    let o = c % n_roots.max(1);
                    c /= n_roots.max(1);
                    o
                })
                .collect();
            out.push(Guess {
                tokens: tokens.clone(),
                owners,
            });
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct LockVerdict {
    pub sat: bool,
    /// the guess behind a sat answer
    pub guess: Option<Guess>,
    pub guesses_tried: usize,
    /// verdict of the last guess tried (the satisfying one when sat)
    pub verdict: Option<Verdict>,
}

/// Check every guess; the network satisfies the formulas iff one guess does.
/// A network without lock actions is checked directly.
pub fn check_ldpn(
    ld: &LDpn,
    formulas: &[Formula],
    g: &GlobalConfig,
    opts: CheckOptions,
) -> Result<LockVerdict, CheckError> {
    if !ld.uses_locks() {
        let v = check(&ld.dpn, formulas, g, opts)?;
        return Ok(LockVerdict {
            sat: v.sat,
            guess: None,
            guesses_tried: 0,
            verdict: Some(v),
        });
    }
    let all = guesses(ld, g.len());
    let mut last = None;
    for (k, guess) in all.iter().enumerate() {
        let enc = ldpn_to_dpn(ld, guess, g);
        let v = check(&enc.dpn, &enc.formulas(formulas), &enc.roots(), opts)?;
        log::debug!("guess {:?}: {}", guess, if v.sat { "sat" } else { "unsat" });
        if v.sat {
            return Ok(LockVerdict {
                sat: true,
                guess: Some(guess.clone()),
                guesses_tried: k + 1,
                verdict: Some(v),
            });
        }
        last = Some(v);
    }
    Ok(LockVerdict {
        sat: false,
        guess: None,
        guesses_tried: all.len(),
        verdict: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpn::parse_model;

    #[test]
    fn nested_sequences() {
        let (a, r) = (Action::Acq, Action::Rel);
        assert!(validate_actions(&[a(0), a(1), r(1), r(0)]).is_empty());
        assert_eq!(
            validate_actions(&[a(0), a(1), r(0)]),
            vec![LockViolation::NotInnermost { step: 2, lock: 0 }]
        );
        assert_eq!(
            validate_actions(&[a(0), a(0)]),
            vec![LockViolation::Reentrant { step: 1, lock: 0 }]
        );
    }

    #[test]
    fn guess_counts() {
        let src = "locks { l m } process P { controls p; rule p g -> p g [int] [acq l]; rule p h -> p h [int] [acq m]; }";
        let ld = parse_model(src).unwrap();
        // sequences: [], [l], [m], [l m], [m l]; owners among two roots
        assert_eq!(guesses(&ld, 1).len(), 5);
        assert_eq!(guesses(&ld, 2).len(), 1 + 2 + 2 + 4 + 4);
    }

    #[test]
    fn final_acquisition_advances_stage() {
        let src = "locks { l } process P { controls p q; rule p g -> q g [int] [acq l]; rule q g -> q g [int]; }";
        let ld = parse_model(src).unwrap();
        let g = GlobalConfig::new([ld.dpn.parse_local("P: p g").unwrap()]);
        let enc = ldpn_to_dpn(
            &ld,
            &Guess {
                tokens: vec![0],
                owners: vec![0],
            },
            &g,
        );
        let names = &enc.dpn.processes[0].controls;
        assert!(names.contains(&"q@1@l!@-".to_string()), "{names:?}");
        assert!(enc.dpn.validate().is_empty());
    }
}
