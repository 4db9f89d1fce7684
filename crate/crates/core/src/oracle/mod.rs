//! Brute-force oracle: bounded exploration of local runs, lasso enumeration
//! and direct CARET evaluation on the resulting structured words.

mod locks;

pub use locks::{explore_locked, oracle_check_ldpn, LockGraph};

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::ops::ControlFlow;

use serde::Serialize;

use crate::caret::{Formula, StructuredWord, Tag, TraceLetter, WordError};
use crate::dpn::{Dpn, GlobalConfig, LocalConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExploreBounds {
    /// Configurations explored per local run graph.
    pub steps: usize,
    pub stack: usize,
    pub instances: usize,
    pub interleavings: usize,
    /// Path extensions tried while enumerating lassos of one graph.
    pub lassos: usize,
}

impl Default for ExploreBounds {
    fn default() -> Self {
        ExploreBounds {
            steps: 2000,
            stack: 6,
            instances: 8,
            interleavings: 100_000,
            lassos: 200_000,
        }
    }
}

impl ExploreBounds {
    /// Parse `steps=..,stack=..,instances=..,interleavings=..,lassos=..` over the defaults.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut b = ExploreBounds::default();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            let v: usize = v
                .trim()
                .parse()
                .map_err(|_| format!("bad number in `{part}`"))?;
            if v == 0 {
                return Err(format!("bound `{k}` must be positive"));
            }
            match k.trim() {
                "steps" => b.steps = v,
                "stack" => b.stack = v,
                "instances" => b.instances = v,
                "interleavings" => b.interleavings = v,
                "lassos" => b.lassos = v,
                other => return Err(format!("unknown bound `{other}`")),
            }
        }
        Ok(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    StepBound,
    StackBound,
    InstanceBound,
    InterleavingBound,
    LassoBound,
    UnbalancedCycle,
    SpawnInCycle,
}

impl Reason {
    pub fn name(self) -> &'static str {
        match self {
            Reason::StepBound => "step_bound",
            Reason::StackBound => "stack_bound",
            Reason::InstanceBound => "instance_bound",
            Reason::InterleavingBound => "interleaving_bound",
            Reason::LassoBound => "lasso_bound",
            Reason::UnbalancedCycle => "unbalanced_cycle",
            Reason::SpawnInCycle => "spawn_in_cycle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub config: LocalConfig,
    pub prefix: Vec<LocalConfig>,
    pub period: Vec<LocalConfig>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum OracleAnswer {
    Sat(Vec<Witness>),
    Unsat,
    Unknown(BTreeSet<Reason>),
}

impl OracleAnswer {
    pub fn definite(&self) -> Option<bool> {
        match self {
            OracleAnswer::Sat(_) => Some(true),
            OracleAnswer::Unsat => Some(false),
            OracleAnswer::Unknown(_) => None,
        }
    }

    pub fn verdict(&self) -> &'static str {
        match self {
            OracleAnswer::Sat(_) => "sat",
            OracleAnswer::Unsat => "unsat",
            OracleAnswer::Unknown(_) => "unknown",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Usage {
    pub max_nodes: usize,
    pub max_stack: usize,
    pub instances: usize,
    pub lasso_work: usize,
    pub interleavings: usize,
}

impl Usage {
    fn merge(&mut self, o: &Usage) {
        self.max_nodes = self.max_nodes.max(o.max_nodes);
        self.max_stack = self.max_stack.max(o.max_stack);
        self.lasso_work += o.lasso_work;
        self.interleavings += o.interleavings;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleOutcome {
    pub answer: OracleAnswer,
    pub usage: Usage,
}

/// Propositions holding at a configuration.
pub type Labeler<'a> = &'a dyn Fn(&LocalConfig) -> BTreeSet<String>;

pub fn control_labels(dpn: &Dpn) -> impl Fn(&LocalConfig) -> BTreeSet<String> + '_ {
    move |c| dpn.label(c.process, c.control).clone()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GEdge {
    pub to: usize,
    pub tag: Tag,
    pub rule: usize,
    pub spawned: Option<LocalConfig>,
}

/// Reachable configuration graph of one instance, cut at the bounds.
#[derive(Clone, Debug, Default)]
pub struct LocalGraph {
    pub nodes: Vec<LocalConfig>,
    pub edges: Vec<Vec<GEdge>>,
    pub hit: BTreeSet<Reason>,
    pub usage: Usage,
}

impl LocalGraph {
    pub fn closed(&self) -> bool {
        self.hit.is_empty()
    }
}

pub fn explore_graph(dpn: &Dpn, c0: &LocalConfig, bounds: &ExploreBounds) -> LocalGraph {
    let mut g = LocalGraph::default();
    let mut index: HashMap<LocalConfig, usize> = HashMap::new();
    index.insert(c0.clone(), 0);
    g.nodes.push(c0.clone());
    g.edges.push(Vec::new());
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let c = g.nodes[u].clone();
        g.usage.max_stack = g.usage.max_stack.max(c.stack.len());
        for s in dpn.step(&c) {
            if s.next.stack.len() > bounds.stack {
                g.hit.insert(Reason::StackBound);
                continue;
            }
            let v = match index.get(&s.next) {
                Some(&v) => v,
                None if g.nodes.len() >= bounds.steps => {
                    g.hit.insert(Reason::StepBound);
                    continue;
                }
                None => {
                    let v = g.nodes.len();
                    index.insert(s.next.clone(), v);
                    g.nodes.push(s.next);
                    g.edges.push(Vec::new());
                    queue.push_back(v);
                    v
                }
            };
            g.edges[u].push(GEdge {
                to: v,
                tag: s.tag,
                rule: s.rule,
                spawned: s.spawned,
            });
        }
    }
    g.usage.max_nodes = g.nodes.len();
    g
}

/// A path `path[0] .. path[n-1]` followed by a back edge to `path[back]`;
/// `edges[i]` is the edge leaving position `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lasso {
    pub path: Vec<usize>,
    pub edges: Vec<GEdge>,
    pub back: usize,
}

impl Lasso {
    pub fn spawned(&self) -> BTreeSet<LocalConfig> {
        self.edges
            .iter()
            .filter_map(|e| e.spawned.clone())
            .collect()
    }

    pub fn spawns_in_period(&self) -> bool {
        self.edges[self.back..].iter().any(|e| e.spawned.is_some())
    }

    pub fn word(&self, g: &LocalGraph, labels: Labeler<'_>) -> Result<StructuredWord, WordError> {
        let letters: Vec<TraceLetter> = self
            .path
            .iter()
            .zip(&self.edges)
            .map(|(&n, e)| TraceLetter {
                props: labels(&g.nodes[n]),
                tag: e.tag,
            })
            .collect();
        let period = letters[self.back..].to_vec();
        let mut prefix = letters;
        prefix.truncate(self.back);
        StructuredWord::lasso(prefix, period)
    }

    pub fn witness(&self, g: &LocalGraph) -> Witness {
        let cfg = |i: &usize| g.nodes[*i].clone();
        Witness {
            config: g.nodes[self.path[0]].clone(),
            prefix: self.path[..self.back].iter().map(cfg).collect(),
            period: self.path[self.back..].iter().map(cfg).collect(),
        }
    }
}

/// Maximal visits of one configuration along an enumerated lasso.
const REVISITS: usize = 2;

/// Shortest prefix and primitive period, so each ultimately periodic run is
/// reported once.
fn canonical(path: &[usize], edges: &[GEdge], back: usize) -> bool {
    let n = path.len();
    let same = |i: usize, j: usize| path[i] == path[j] && edges[i] == edges[j];
    if back > 0 && same(back - 1, n - 1) {
        return false;
    }
    let v = n - back;
    !(1..v).any(|d| v.is_multiple_of(d) && (back..n - d).all(|i| same(i, i + d)))
}

/// Calls `f` on every lasso from node 0 that visits each configuration at most
/// twice. Returns false when the work bound stopped the enumeration early.
pub fn for_each_lasso(
    g: &LocalGraph,
    work_bound: usize,
    work: &mut usize,
    f: &mut dyn FnMut(&Lasso) -> ControlFlow<()>,
) -> ControlFlow<(), bool> {
    struct Dfs<'a> {
        g: &'a LocalGraph,
        bound: usize,
        work: &'a mut usize,
        path: Vec<usize>,
        edges: Vec<GEdge>,
        visits: Vec<usize>,
        cut: bool,
    }
    impl Dfs<'_> {
        fn go(&mut self, f: &mut dyn FnMut(&Lasso) -> ControlFlow<()>) -> ControlFlow<()> {
            let u = *self.path.last().unwrap();
            for e in &self.g.edges[u] {
                if *self.work >= self.bound {
                    self.cut = true;
                    return ControlFlow::Continue(());
                }
                *self.work += 1;
                self.edges.push(e.clone());
                for k in 0..self.path.len() {
                    if self.path[k] == e.to && canonical(&self.path, &self.edges, k) {
                        f(&Lasso {
                            path: self.path.clone(),
                            edges: self.edges.clone(),
                            back: k,
                        })?;
                    }
                }
                if self.visits[e.to] < REVISITS {
                    self.visits[e.to] += 1;
                    self.path.push(e.to);
                    let r = self.go(f);
                    self.path.pop();
                    self.visits[e.to] -= 1;
                    r?;
                }
                self.edges.pop();
            }
            ControlFlow::Continue(())
        }
    }
    if g.nodes.is_empty() {
        return ControlFlow::Continue(true);
    }
    let mut visits = vec![0; g.nodes.len()];
    visits[0] = 1;
    let mut dfs = Dfs {
        g,
        bound: work_bound,
        work,
        path: vec![0],
        edges: vec![],
        visits,
        cut: false,
    };
    dfs.go(f)?;
    ControlFlow::Continue(!dfs.cut)
}

/// Explored graph plus every lasso found within the bounds.
#[derive(Clone, Debug)]
pub struct Exploration {
    pub graph: LocalGraph,
    pub lassos: Vec<Lasso>,
    pub exhaustive: bool,
}

pub fn explore_local(dpn: &Dpn, c0: &LocalConfig, bounds: &ExploreBounds) -> Exploration {
    let graph = explore_graph(dpn, c0, bounds);
    let mut lassos = Vec::new();
    let mut work = 0;
    let done = for_each_lasso(&graph, bounds.lassos, &mut work, &mut |l| {
        lassos.push(l.clone());
        ControlFlow::Continue(())
    });
    let exhaustive = matches!(done, ControlFlow::Continue(true));
    Exploration {
        graph,
        lassos,
        exhaustive,
    }
}

/// Satisfying lassos of one configuration, grouped by the DCLICs they spawn.
struct LocalFacts {
    /// spawn set -> witness lasso; only minimal sets are kept
    sat: BTreeMap<BTreeSet<LocalConfig>, Lasso>,
    graph: LocalGraph,
    complete: bool,
    reasons: BTreeSet<Reason>,
}

fn local_facts(
    dpn: &Dpn,
    c0: &LocalConfig,
    f: &Formula,
    bounds: &ExploreBounds,
    labels: Labeler<'_>,
    stop_at_first: bool,
) -> LocalFacts {
    let graph = explore_graph(dpn, c0, bounds);
    let mut reasons = graph.hit.clone();
    let mut sat: BTreeMap<BTreeSet<LocalConfig>, Lasso> = BTreeMap::new();
    let mut work = 0;
    let done = for_each_lasso(&graph, bounds.lassos, &mut work, &mut |l| {
        match l.word(&graph, labels) {
            Ok(w) if w.eval(f) => {
                let s = l.spawned();
                if !sat.keys().any(|k| k.is_subset(&s)) {
                    sat.retain(|k, _| !s.is_subset(k));
                    let empty = s.is_empty();
                    sat.insert(s, l.clone());
                    if stop_at_first || empty {
                        return ControlFlow::Break(());
                    }
                }
            }
            Ok(_) => {}
            Err(_) => {
                reasons.insert(Reason::UnbalancedCycle);
            }
        }
        ControlFlow::Continue(())
    });
    if matches!(done, ControlFlow::Continue(false)) {
        reasons.insert(Reason::LassoBound);
    }
    let mut graph = graph;
    graph.usage.lasso_work = work;
    LocalFacts {
        sat,
        graph,
        complete: reasons.is_empty(),
        reasons,
    }
}

/// Sat iff some explored lasso of `c0` satisfies `f`; Unsat only on a closed graph
/// whose lassos were all enumerated.
pub fn oracle_check_local(
    dpn: &Dpn,
    c0: &LocalConfig,
    f: &Formula,
    bounds: &ExploreBounds,
    labels: Labeler<'_>,
) -> OracleOutcome {
    let facts = local_facts(dpn, c0, f, bounds, labels, true);
    let usage = facts.graph.usage;
    let answer = match facts.sat.values().next() {
        Some(l) => OracleAnswer::Sat(vec![l.witness(&facts.graph)]),
        None if facts.complete => OracleAnswer::Unsat,
        None => OracleAnswer::Unknown(facts.reasons),
    };
    OracleOutcome { answer, usage }
}

/// Every instance of `g`, and recursively every DCLIC spawned by the chosen
/// lassos, must have a satisfying lasso.
pub fn oracle_check_global(
    dpn: &Dpn,
    formulas: &[Formula],
    g: &GlobalConfig,
    bounds: &ExploreBounds,
    labels: Labeler<'_>,
) -> OracleOutcome {
    let mut usage = Usage::default();
    let mut facts: BTreeMap<LocalConfig, LocalFacts> = BTreeMap::new();
    let mut unexplored: BTreeSet<LocalConfig> = BTreeSet::new();
    let mut reasons = BTreeSet::new();
    let mut queue: VecDeque<LocalConfig> = g.distinct().cloned().collect();
    while let Some(c) = queue.pop_front() {
        if facts.contains_key(&c) || unexplored.contains(&c) {
            continue;
        }
        if facts.len() >= bounds.instances {
            reasons.insert(Reason::InstanceBound);
            unexplored.insert(c);
            continue;
        }
        let lf = local_facts(dpn, &c, &formulas[c.process], bounds, labels, false);
        usage.merge(&lf.graph.usage);
        reasons.extend(lf.reasons.iter().copied());
        for s in lf.sat.keys() {
            queue.extend(s.iter().cloned());
        }
        facts.insert(c, lf);
    }
    usage.instances = facts.len();
    // lower fixpoint: explored configurations with a witness spawning only inside
    let mut lo: BTreeSet<LocalConfig> = facts.keys().cloned().collect();
    loop {
        let next: BTreeSet<LocalConfig> = lo
            .iter()
            .filter(|c| facts[*c].sat.keys().any(|s| s.is_subset(&lo)))
            .cloned()
            .collect();
        if next.len() == lo.len() {
            break;
        }
        lo = next;
    }
    // upper fixpoint: incompletely explored configurations may still be good
    let mut up: BTreeSet<LocalConfig> = facts.keys().chain(&unexplored).cloned().collect();
    loop {
        let next: BTreeSet<LocalConfig> = up
            .iter()
            .filter(|c| match facts.get(*c) {
                Some(lf) if lf.complete => lf.sat.keys().any(|s| s.is_subset(&up)),
                _ => true,
            })
            .cloned()
            .collect();
        if next.len() == up.len() {
            break;
        }
        up = next;
    }
    let answer = if g.distinct().all(|c| lo.contains(c)) {
        let mut witnesses = Vec::new();
        let mut seen = BTreeSet::new();
        let mut todo: Vec<LocalConfig> = g.distinct().cloned().collect();
        while let Some(c) = todo.pop() {
            if !seen.insert(c.clone()) {
                continue;
            }
            let lf = &facts[&c];
            let (s, l) = lf.sat.iter().find(|(s, _)| s.is_subset(&lo)).unwrap();
            witnesses.push(l.witness(&lf.graph));
            todo.extend(s.iter().cloned());
        }
        OracleAnswer::Sat(witnesses)
    } else if g.distinct().any(|c| !up.contains(c)) {
        OracleAnswer::Unsat
    } else {
        OracleAnswer::Unknown(reasons)
    };
    OracleOutcome { answer, usage }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caret::parse_formula;
    use crate::dpn::parse_dpn;

    fn labels_of(dpn: &Dpn) -> impl Fn(&LocalConfig) -> BTreeSet<String> + '_ {
        control_labels(dpn)
    }

    #[test]
    fn self_loop_has_one_lasso() {
        let dpn = parse_dpn(
            "ap { a } process P { controls p; rule p g -> p g [int]; } labels { p: {a}; }",
        )
        .unwrap();
        let c = dpn.parse_local("P: p g").unwrap();
        let ex = explore_local(&dpn, &c, &ExploreBounds::default());
        assert_eq!(ex.lassos.len(), 1);
        assert_eq!(ex.lassos[0].path.len(), 1);
        let l = labels_of(&dpn);
        let ga = parse_formula("Gg a", &dpn.ap).unwrap();
        assert_eq!(
            oracle_check_local(&dpn, &c, &ga, &ExploreBounds::default(), &l)
                .answer
                .definite(),
            Some(true)
        );
        let fb = parse_formula("Fg !a", &dpn.ap).unwrap();
        assert_eq!(
            oracle_check_local(&dpn, &c, &fb, &ExploreBounds::default(), &l).answer,
            OracleAnswer::Unsat
        );
    }

    #[test]
    fn growing_stack_hits_bound() {
        let dpn = parse_dpn("process P { controls p; rule p g -> p g g [call]; }").unwrap();
        let c = dpn.parse_local("P: p g").unwrap();
        let l = labels_of(&dpn);
        let out = oracle_check_local(&dpn, &c, &Formula::False, &ExploreBounds::default(), &l);
        assert_eq!(
            out.answer,
            OracleAnswer::Unknown([Reason::StackBound].into())
        );
    }

    #[test]
    fn empty_global_is_sat() {
        let dpn = parse_dpn("process P { controls p; rule p g -> p g [int]; }").unwrap();
        let l = labels_of(&dpn);
        let out = oracle_check_global(
            &dpn,
            &[Formula::False],
            &GlobalConfig::new([]),
            &ExploreBounds::default(),
            &l,
        );
        assert_eq!(out.answer.definite(), Some(true));
    }

    #[test]
    fn bounds_parse() {
        let b = ExploreBounds::parse("steps=10, stack=3").unwrap();
        assert_eq!((b.steps, b.stack, b.instances), (10, 3, 8));
        assert!(ExploreBounds::parse("stack=0").is_err());
        assert!(ExploreBounds::parse("depth=1").is_err());
    }
}
