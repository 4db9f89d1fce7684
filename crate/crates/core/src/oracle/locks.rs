//! Interleaving oracle for lock networks: satisfying lassos per instance over
//! (configuration, held locks), combined under mutual exclusion and fairness.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::ops::ControlFlow;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::{
    for_each_lasso, ExploreBounds, GEdge, Labeler, Lasso, LocalGraph, OracleAnswer, OracleOutcome,
    Reason, Usage, Witness,
};
use crate::caret::Formula;
use crate::dpn::{GlobalConfig, LocalConfig};
use crate::reductions::{apply_action, Action, LDpn};

/// Local graph whose nodes also record the held locks (innermost last).
pub struct LockGraph {
    pub graph: LocalGraph,
    pub held: Vec<Vec<usize>>,
}

pub fn explore_locked(ld: &LDpn, c0: &LocalConfig, bounds: &ExploreBounds) -> LockGraph {
    let mut graph = LocalGraph::default();
    let mut held: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<(LocalConfig, Vec<usize>), usize> = HashMap::new();
    index.insert((c0.clone(), vec![]), 0);
    graph.nodes.push(c0.clone());
    graph.edges.push(Vec::new());
    held.push(Vec::new());
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let c = graph.nodes[u].clone();
        graph.usage.max_stack = graph.usage.max_stack.max(c.stack.len());
        for s in ld.dpn.step(&c) {
            // steps breaking the nested discipline are not part of any run
            let Ok(h) = apply_action(&held[u], ld.action(c.process, s.rule), 0) else {
                continue;
            };
            if s.next.stack.len() > bounds.stack {
                graph.hit.insert(Reason::StackBound);
                continue;
            }
            let key = (s.next.clone(), h.clone());
            let v = match index.get(&key) {
                Some(&v) => v,
                None if graph.nodes.len() >= bounds.steps => {
                    graph.hit.insert(Reason::StepBound);
                    continue;
                }
                None => {
                    let v = graph.nodes.len();
                    index.insert(key, v);
                    graph.nodes.push(s.next);
                    graph.edges.push(Vec::new());
                    held.push(h);
                    queue.push_back(v);
                    v
                }
            };
            graph.edges[u].push(GEdge {
                to: v,
                tag: s.tag,
                rule: s.rule,
                spawned: s.spawned,
            });
        }
    }
    graph.usage.max_nodes = graph.nodes.len();
    LockGraph { graph, held }
}

/// What the interleaving sees of one position of a lasso.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Pos {
    held: Vec<usize>,
    action: Action,
    spawned: Option<LocalConfig>,
}

#[derive(Clone, Debug)]
struct Shape {
    positions: Vec<Pos>,
    back: usize,
    lasso: Lasso,
}

struct Facts {
    graph: LockGraph,
    shapes: Vec<Shape>,
    complete: bool,
}

fn facts(
    ld: &LDpn,
    c: &LocalConfig,
    f: &Formula,
    bounds: &ExploreBounds,
    labels: Labeler<'_>,
    reasons: &mut BTreeSet<Reason>,
    usage: &mut Usage,
) -> Facts {
    let lg = explore_locked(ld, c, bounds);
    let mut local = lg.graph.hit.clone();
    let mut seen: BTreeSet<(Vec<Pos>, usize)> = BTreeSet::new();
    let mut shapes = Vec::new();
    let mut work = 0;
    let done = for_each_lasso(&lg.graph, bounds.lassos, &mut work, &mut |l| {
        match l.word(&lg.graph, labels) {
            Ok(w) if w.eval(f) => {
                if l.spawns_in_period() {
                    local.insert(Reason::SpawnInCycle);
                    return ControlFlow::Continue(());
                }
                let positions: Vec<Pos> = l
                    .path
                    .iter()
                    .zip(&l.edges)
                    .map(|(&n, e)| Pos {
                        held: lg.held[n].clone(),
                        action: ld.action(c.process, e.rule),
                        spawned: e.spawned.clone(),
                    })
                    .collect();
                if seen.insert((positions.clone(), l.back)) {
                    shapes.push(Shape {
                        positions,
                        back: l.back,
                        lasso: l.clone(),
                    });
                }
            }
            Ok(_) => {}
            Err(_) => {
                local.insert(Reason::UnbalancedCycle);
            }
        }
        ControlFlow::Continue(())
    });
    if matches!(done, ControlFlow::Continue(false)) {
        local.insert(Reason::LassoBound);
    }
    let mut u = lg.graph.usage;
    u.lasso_work = work;
    usage.merge(&u);
    reasons.extend(local.iter().copied());
    Facts {
        graph: lg,
        complete: local.is_empty(),
        shapes,
    }
}

/// One instance of the chosen combination.
struct Inst<'a> {
    shape: &'a Shape,
    /// children activated when this instance leaves prefix position `k`
    children: BTreeMap<usize, usize>,
}

/// Is there a fair, mutually exclusive interleaving of the chosen lassos?
/// Instance 0.. are the roots; children start inactive.
fn interleavable(insts: &[Inst<'_>], n_roots: usize, budget: &mut usize) -> Option<bool> {
    let n = insts.len();
    let start: Vec<Option<usize>> = (0..n).map(|i| (i < n_roots).then_some(0)).collect();
    let mut index: HashMap<Vec<Option<usize>>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut states = vec![start];
    let mut graph: DiGraph<(), usize> = DiGraph::new();
    graph.add_node(());
    let mut k = 0;
    while k < states.len() {
        let st = states[k].clone();
        for i in 0..n {
            let Some(j) = st[i] else { continue };
            let p = &insts[i].shape.positions[j];
            if let Action::Acq(l) = p.action {
                let taken = (0..n).any(|o| {
                    o != i && st[o].is_some_and(|jo| insts[o].shape.positions[jo].held.contains(&l))
                });
                if taken {
                    continue;
                }
            }
            let mut next = st.clone();
            next[i] = Some(if j + 1 < insts[i].shape.positions.len() {
                j + 1
            } else {
                insts[i].shape.back
            });
            if let Some(&child) = insts[i].children.get(&j) {
                next[child] = Some(0);
            }
            let v = match index.get(&next) {
                Some(&v) => v,
                None => {
                    if *budget == 0 {
                        return None;
                    }
                    *budget -= 1;
                    index.insert(next.clone(), states.len());
                    states.push(next);
                    graph.add_node(());
                    states.len() - 1
                }
            };
            graph.add_edge((k as u32).into(), (v as u32).into(), i);
        }
        k += 1;
    }
    for scc in tarjan_scc(&graph) {
        let members: BTreeSet<usize> = scc.iter().map(|n| n.index()).collect();
        let mut movers = BTreeSet::new();
        for e in graph.edge_indices() {
            let (a, b) = graph.edge_endpoints(e).unwrap();
            if members.contains(&a.index()) && members.contains(&b.index()) {
                movers.insert(graph[e]);
            }
        }
        if movers.len() == n {
            return Some(true);
        }
    }
    Some(false)
}

struct Search<'a> {
    ld: &'a LDpn,
    formulas: &'a [Formula],
    bounds: &'a ExploreBounds,
    labels: Labeler<'a>,
    cache: BTreeMap<LocalConfig, Facts>,
    reasons: BTreeSet<Reason>,
    usage: Usage,
    budget: usize,
    n_roots: usize,
    /// false once some branch was cut by a bound
    exhaustive: bool,
}

impl Search<'_> {
    fn ensure(&mut self, c: &LocalConfig) {
        if !self.cache.contains_key(c) {
            let f = facts(
                self.ld,
                c,
                &self.formulas[c.process],
                self.bounds,
                self.labels,
                &mut self.reasons,
                &mut self.usage,
            );
            self.cache.insert(c.clone(), f);
        }
    }

    /// Depth-first over lasso choices, instances in creation order.
    fn go(
        &mut self,
        configs: &mut Vec<LocalConfig>,
        choice: &mut Vec<usize>,
    ) -> ControlFlow<Vec<Witness>> {
        if choice.len() == configs.len() {
            self.usage.interleavings += 1;
            let insts = build_insts(configs, choice, &self.cache, self.n_roots);
            return match interleavable(&insts, self.n_roots, &mut self.budget) {
                Some(true) => ControlFlow::Break(
                    configs
                        .iter()
                        .zip(choice.iter())
                        .map(|(c, &k)| {
                            let f = &self.cache[c];
                            f.shapes[k].lasso.witness(&f.graph.graph)
                        })
                        .collect(),
                ),
                Some(false) => ControlFlow::Continue(()),
                None => {
                    self.reasons.insert(Reason::InterleavingBound);
                    self.exhaustive = false;
                    ControlFlow::Continue(())
                }
            };
        }
        let c = configs[choice.len()].clone();
        self.ensure(&c);
        for k in 0..self.cache[&c].shapes.len() {
            if self.budget == 0 {
                self.reasons.insert(Reason::InterleavingBound);
                self.exhaustive = false;
                return ControlFlow::Continue(());
            }
            let spawned: Vec<LocalConfig> = self.cache[&c].shapes[k]
                .positions
                .iter()
                .filter_map(|p| p.spawned.clone())
                .collect();
            if configs.len() + spawned.len() > self.bounds.instances {
                self.reasons.insert(Reason::InstanceBound);
                self.exhaustive = false;
                continue;
            }
            let keep = configs.len();
            configs.extend(spawned);
            choice.push(k);
            let r = self.go(configs, choice);
            choice.pop();
            configs.truncate(keep);
            r?;
        }
        ControlFlow::Continue(())
    }
}

/// Global check for lock networks: per-instance satisfying lassos (one instance
/// per spawn occurrence in a prefix) that interleave fairly under mutual exclusion.
pub fn oracle_check_ldpn(
    ld: &LDpn,
    formulas: &[Formula],
    g: &GlobalConfig,
    bounds: &ExploreBounds,
    labels: Labeler<'_>,
) -> OracleOutcome {
    let mut configs: Vec<LocalConfig> = g.iter().cloned().collect();
    let mut s = Search {
        ld,
        formulas,
        bounds,
        labels,
        cache: BTreeMap::new(),
        reasons: BTreeSet::new(),
        usage: Usage::default(),
        budget: bounds.interleavings,
        n_roots: configs.len(),
        exhaustive: true,
    };
    let found = s.go(&mut configs, &mut Vec::new());
    s.usage.instances = s.cache.len();
    let complete = s.exhaustive && s.cache.values().all(|f| f.complete);
    let answer = match found {
        ControlFlow::Break(w) => OracleAnswer::Sat(w),
        ControlFlow::Continue(()) if complete => OracleAnswer::Unsat,
        ControlFlow::Continue(()) => OracleAnswer::Unknown(s.reasons),
    };
    OracleOutcome {
        answer,
        usage: s.usage,
    }
}

/// Instance list for a complete choice: roots first, children in creation order.
fn build_insts<'a>(
    configs: &[LocalConfig],
    choice: &[usize],
    cache: &'a BTreeMap<LocalConfig, Facts>,
    n_roots: usize,
) -> Vec<Inst<'a>> {
    let mut next_child = n_roots;
    let mut insts = Vec::new();
    for (c, &k) in configs.iter().zip(choice) {
        let shape = &cache[c].shapes[k];
        let mut children = BTreeMap::new();
        for (j, p) in shape.positions.iter().enumerate() {
            if p.spawned.is_some() {
                children.insert(j, next_child);
                next_child += 1;
            }
        }
        insts.push(Inst { shape, children });
    }
    insts
}
