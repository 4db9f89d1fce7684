//! Three-valued answers by explicit search of the configuration graph under a stack bound.

use std::collections::{HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::engine::{BRule, GenBdpds, PAutomaton};

type Config = (usize, Vec<usize>);

fn successors(rules: &[BRule], (p, w): &Config) -> Vec<Config> {
    let Some((&top, rest)) = w.split_first() else {
        return Vec::new();
    };
    rules
        .iter()
        .filter(|r| r.from == *p && r.top == top)
        .map(|r| (r.to, r.push.iter().chain(rest).copied().collect()))
        .collect()
}

struct Explored {
    nodes: Vec<Config>,
    edges: Vec<(usize, usize)>,
    /// some successor was dropped for exceeding the bound
    cut: bool,
}

fn explore(rules: &[BRule], c: &Config, bound: usize) -> Explored {
    let mut nodes = vec![c.clone()];
    let mut index = HashMap::from([(c.clone(), 0)]);
    let mut edges = Vec::new();
    let mut cut = false;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for s in successors(rules, &nodes[i]) {
            if s.1.len() > bound {
                cut = true;
                continue;
            }
            let j = *index.entry(s.clone()).or_insert_with(|| {
                nodes.push(s.clone());
                queue.push_back(nodes.len() - 1);
                nodes.len() - 1
            });
            edges.push((i, j));
        }
    }
    Explored { nodes, edges, cut }
}

/// Whether `p w` reaches the language of `a`; `None` when every bound cut the search.
pub fn bounded_reach(
    rules: &[BRule],
    a: &PAutomaton,
    p: usize,
    w: &[usize],
    bounds: &[usize],
) -> Option<bool> {
    for &bound in bounds {
        let e = explore(rules, &(p, w.to_vec()), bound);
        if e.nodes.iter().any(|(q, v)| a.accepts(*q, v)) {
            return Some(true);
        }
        if !e.cut {
            return Some(false);
        }
    }
    None
}

/// Whether some reachable cycle of the configuration graph meets every acceptance set.
pub fn bounded_lasso(g: &GenBdpds, p: usize, w: &[usize], bounds: &[usize]) -> Option<bool> {
    for &bound in bounds {
        let e = explore(&g.rules, &(p, w.to_vec()), bound);
        let mut graph = DiGraph::<usize, ()>::new();
        let ids: Vec<_> = e.nodes.iter().map(|(q, _)| graph.add_node(*q)).collect();
        for &(i, j) in &e.edges {
            graph.add_edge(ids[i], ids[j], ());
        }
        for scc in tarjan_scc(&graph) {
            let cyclic = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
            if cyclic && g.sets.iter().all(|f| scc.iter().any(|&n| f[graph[n]])) {
                return Some(true);
            }
        }
        if !e.cut {
            return Some(false);
        }
    }
    None
}

/// All stacks of length at most two.
pub fn small_stacks(ns: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for a in 0..ns {
        out.push(vec![a]);
        for b in 0..ns {
            out.push(vec![a, b]);
        }
    }
    out
}
