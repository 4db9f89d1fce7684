use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{Bdpds, Target};

/// Finite automaton over stack words whose first `n_controls` states stand
/// for the controls. Transitions must not enter a control state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PAutomaton {
    pub n_controls: usize,
    pub n_states: usize,
    pub trans: BTreeSet<(usize, usize, usize)>,
    pub finals: BTreeSet<usize>,
}

impl PAutomaton {
    pub fn new(n_controls: usize) -> Self {
        PAutomaton {
            n_controls,
            n_states: n_controls,
            ..Default::default()
        }
    }

    pub fn add_state(&mut self) -> usize {
        self.n_states += 1;
        self.n_states - 1
    }

    pub fn add_trans(&mut self, from: usize, sym: usize, to: usize) {
        self.trans.insert((from, sym, to));
    }

    pub fn set_final(&mut self, s: usize) {
        self.finals.insert(s);
    }

    pub fn accepts(&self, control: usize, stack: &[usize]) -> bool {
        let mut cur: BTreeSet<usize> = [control].into();
        for &g in stack {
            cur = self
                .trans
                .iter()
                .filter(|(s, h, _)| *h == g && cur.contains(s))
                .map(|t| t.2)
                .collect();
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|s| self.finals.contains(s))
    }
}

#[derive(Clone, Debug)]
struct NRule {
    from: u32,
    top: u32,
    to: u32,
    push: Vec<u32>,
    orig: usize,
}

/// A system whose pushes have length at most two, extra controls appended.
#[derive(Clone, Debug)]
pub(crate) struct Prepared {
    n_orig: usize,
    n_controls: usize,
    n_symbols: usize,
    rules: Vec<NRule>,
    accepting: Vec<bool>,
    spawns: Vec<Option<Target>>,
    pops: Vec<usize>,
    by_rhs1: HashMap<(u32, u32), Vec<usize>>,
    by_rhs2: HashMap<(u32, u32), Vec<usize>>,
}

impl Prepared {
    pub(crate) fn new(b: &Bdpds) -> Self {
        let mut rules = Vec::new();
        let mut n_controls = b.n_controls;
        for (i, r) in b.rules.iter().enumerate() {
            let push: Vec<u32> = r.push.iter().map(|&g| g as u32).collect();
            if push.len() <= 2 {
                rules.push(NRule {
                    from: r.from as u32,
                    top: r.top as u32,
                    to: r.to as u32,
                    push,
                    orig: i,
                });
                continue;
            }
            // p g -> f1 w[n-2] w[n-1]; f1 w[n-2] -> f2 w[n-3] w[n-2]; ...; -> q w[0] w[1]
            let n = push.len();
            let mut from = r.from as u32;
            let mut top = r.top as u32;
            for k in (1..n).rev() {
                let to = if k == 1 {
                    r.to as u32
                } else {
                    n_controls += 1;
                    (n_controls - 1) as u32
                };
                rules.push(NRule {
                    from,
                    top,
                    to,
                    push: vec![push[k - 1], push[k]],
                    orig: i,
                });
                from = to;
                top = push[k - 1];
            }
        }
        let mut accepting = b.accepting.clone();
        accepting.resize(n_controls, false);
        let mut pops = Vec::new();
        let mut by_rhs1: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        let mut by_rhs2: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        for (k, r) in rules.iter().enumerate() {
            match r.push.len() {
                0 => pops.push(k),
                1 => by_rhs1.entry((r.to, r.push[0])).or_default().push(k),
                _ => by_rhs2.entry((r.to, r.push[0])).or_default().push(k),
            }
        }
        Prepared {
            n_orig: b.n_controls,
            n_controls,
            n_symbols: b.n_symbols,
            rules,
            accepting,
            spawns: b.rules.iter().map(|r| r.spawn.clone()).collect(),
            pops,
            by_rhs1,
            by_rhs2,
        }
    }

    pub(crate) fn enabled(&self, allowed: Option<&BTreeSet<Target>>) -> Vec<bool> {
        self.spawns
            .iter()
            .map(|s| match (s, allowed) {
                (Some(t), Some(a)) => a.contains(t),
                _ => true,
            })
            .collect()
    }

    fn saturate(
        &self,
        enabled: &[bool],
        flags: bool,
        init: impl IntoIterator<Item = (u32, u32, u32)>,
    ) -> Sat {
        let mut sat = Sat::default();
        for (p, g, q) in init {
            sat.add(p, g, q, false);
        }
        for &k in &self.pops {
            let r = &self.rules[k];
            if enabled[r.orig] {
                sat.add(
                    r.from,
                    r.top,
                    r.to,
                    flags && self.accepting[r.from as usize],
                );
            }
        }
        while let Some((q, g, s, b)) = sat.work.pop() {
            if let Some(ks) = self.by_rhs1.get(&(q, g)) {
                for &k in ks {
                    let r = &self.rules[k];
                    if enabled[r.orig] {
                        sat.add(
                            r.from,
                            r.top,
                            s,
                            b || (flags && self.accepting[r.from as usize]),
                        );
                    }
                }
            }
            if let Some(ks) = self.by_rhs2.get(&(q, g)) {
                for &k in ks {
                    let r = &self.rules[k];
                    if !enabled[r.orig] {
                        continue;
                    }
                    let f0 = b || (flags && self.accepting[r.from as usize]);
                    let key = (s, r.push[1]);
                    let m = sat.pseudo.entry(key).or_default();
                    if m.get(&(r.from, r.top)).is_some_and(|&old| old || !f0) {
                        continue;
                    }
                    m.insert((r.from, r.top), f0);
                    let dests: Vec<(u32, bool)> = sat
                        .out
                        .get(&key)
                        .map(|v| {
                            v.iter()
                                .map(|&d| (d, sat.rel[&(key.0, key.1, d)]))
                                .collect()
                        })
                        .unwrap_or_default();
                    for (d, b2) in dests {
                        sat.add(r.from, r.top, d, f0 || b2);
                    }
                }
            }
            let pseudo: Vec<((u32, u32), bool)> = sat
                .pseudo
                .get(&(q, g))
                .map(|m| m.iter().map(|(&k, &v)| (k, v)).collect())
                .unwrap_or_default();
            for ((p1, g1), f0) in pseudo {
                sat.add(p1, g1, s, f0 || b);
            }
        }
        sat
    }

    /// Heads `(p, g)` from which some run visits an accepting control infinitely often.
    fn repeating(&self, enabled: &[bool]) -> BTreeSet<(u32, u32)> {
        let summaries = self.saturate(enabled, true, []);
        let mut graph: DiGraph<(u32, u32), bool> = DiGraph::new();
        let mut nodes: HashMap<(u32, u32), NodeIndex> = HashMap::new();
        let mut node = |graph: &mut DiGraph<(u32, u32), bool>, h: (u32, u32)| {
            *nodes.entry(h).or_insert_with(|| graph.add_node(h))
        };
        for r in &self.rules {
            if !enabled[r.orig] || r.push.is_empty() {
                continue;
            }
            let acc = self.accepting[r.from as usize];
            let src = node(&mut graph, (r.from, r.top));
            let dst = node(&mut graph, (r.to, r.push[0]));
            graph.add_edge(src, dst, acc);
            if r.push.len() == 2 {
                if let Some(ds) = summaries.out.get(&(r.to, r.push[0])) {
                    for &q2 in ds {
                        let b = summaries.rel[&(r.to, r.push[0], q2)];
                        let dst = node(&mut graph, (q2, r.push[1]));
                        graph.add_edge(src, dst, acc || b);
                    }
                }
            }
        }
        let sccs = tarjan_scc(&graph);
        let mut comp = vec![0usize; graph.node_count()];
        for (c, scc) in sccs.iter().enumerate() {
            for n in scc {
                comp[n.index()] = c;
            }
        }
        let mut good = vec![false; sccs.len()];
        for e in graph.edge_indices() {
            let (a, b) = graph.edge_endpoints(e).unwrap();
            if graph[e] && comp[a.index()] == comp[b.index()] {
                good[comp[a.index()]] = true;
            }
        }
        graph
            .node_indices()
            .filter(|n| good[comp[n.index()]])
            .map(|n| graph[n])
            .collect()
    }

    pub(crate) fn analyze(&self, enabled: &[bool]) -> Analysis {
        let heads = self.repeating(enabled);
        let f = self.n_controls as u32;
        let mut init: Vec<(u32, u32, u32)> = heads.iter().map(|&(p, g)| (p, g, f)).collect();
        init.extend((0..self.n_symbols as u32).map(|g| (f, g, f)));
        let sat = self.saturate(enabled, false, init);
        let heads = heads
            .into_iter()
            .filter(|h| (h.0 as usize) < self.n_orig)
            .map(|(p, g)| (p as usize, g as usize))
            .collect();
        Analysis {
            final_state: f,
            out: sat.out,
            heads,
        }
    }
}

#[derive(Default)]
struct Sat {
    rel: HashMap<(u32, u32, u32), bool>,
    out: HashMap<(u32, u32), Vec<u32>>,
    pseudo: HashMap<(u32, u32), BTreeMap<(u32, u32), bool>>,
    work: Vec<(u32, u32, u32, bool)>,
}

impl Sat {
    fn add(&mut self, p: u32, g: u32, q: u32, b: bool) {
        match self.rel.get_mut(&(p, g, q)) {
            None => {
                self.rel.insert((p, g, q), b);
                self.out.entry((p, g)).or_default().push(q);
                self.work.push((p, g, q, b));
            }
            Some(old) if b && !*old => {
                *old = true;
                self.work.push((p, g, q, true));
            }
            _ => {}
        }
    }
}

/// Automaton for the configurations that have an accepting run.
#[derive(Clone, Debug)]
pub struct Analysis {
    final_state: u32,
    out: HashMap<(u32, u32), Vec<u32>>,
    heads: BTreeSet<(usize, usize)>,
}

impl Analysis {
    pub fn new(b: &Bdpds, allowed: Option<&BTreeSet<Target>>) -> Self {
        let prep = Prepared::new(b);
        prep.analyze(&prep.enabled(allowed))
    }

    pub fn accepts(&self, control: usize, stack: &[usize]) -> bool {
        let mut cur: BTreeSet<u32> = [control as u32].into();
        for &g in stack {
            if cur.contains(&self.final_state) {
                return true;
            }
            cur = cur
                .iter()
                .filter_map(|&s| self.out.get(&(s, g as u32)))
                .flatten()
                .copied()
                .collect();
            if cur.is_empty() {
                return false;
            }
        }
        cur.contains(&self.final_state)
    }

    /// Repeating heads over the original controls.
    pub fn heads(&self) -> &BTreeSet<(usize, usize)> {
        &self.heads
    }
}

/// Saturate `a` backwards under the rules of `b`; spawning rules whose target
/// is outside `allowed` are ignored. State numbering is preserved.
pub fn pre_star(b: &Bdpds, a: &PAutomaton, allowed: Option<&BTreeSet<Target>>) -> PAutomaton {
    assert_eq!(
        a.n_controls, b.n_controls,
        "automaton and system disagree on controls"
    );
    assert!(
        a.trans.iter().all(|t| t.2 >= a.n_controls),
        "transition into a control state"
    );
    let prep = Prepared::new(b);
    let shift = (prep.n_controls - b.n_controls) as u32;
    let n = b.n_controls as u32;
    let fwd = |s: usize| {
        if (s as u32) < n {
            s as u32
        } else {
            s as u32 + shift
        }
    };
    let init = a.trans.iter().map(|&(p, g, q)| (fwd(p), g as u32, fwd(q)));
    let sat = prep.saturate(&prep.enabled(allowed), false, init);
    let back = |s: u32| {
        if s < n {
            Some(s as usize)
        } else if s < n + shift {
            None
        } else {
            Some((s - shift) as usize)
        }
    };
    let mut res = PAutomaton {
        n_controls: a.n_controls,
        n_states: a.n_states,
        trans: BTreeSet::new(),
        finals: a.finals.clone(),
    };
    for &(p, g, q) in sat.rel.keys() {
        if let (Some(p), Some(q)) = (back(p), back(q)) {
            res.trans.insert((p, g as usize, q));
        }
    }
    res
}

pub fn has_accepting_run(
    b: &Bdpds,
    control: usize,
    stack: &[usize],
    allowed: Option<&BTreeSet<Target>>,
) -> bool {
    Analysis::new(b, allowed).accepts(control, stack)
}

pub fn repeating_heads(b: &Bdpds, allowed: Option<&BTreeSet<Target>>) -> BTreeSet<(usize, usize)> {
    Analysis::new(b, allowed).heads
}
