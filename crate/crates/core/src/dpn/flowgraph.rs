use std::collections::{BTreeSet, VecDeque};

use super::model::{Dpds, Dpn, Rule, Spawn};
use super::text::{Cursor, ModelError};
use crate::caret::Tag;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Simple,
    Call(String),
    Spawn(String),
    Ret,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: String,
    /// `None` only for return edges.
    pub to: Option<String>,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Procedure {
    pub name: String,
    pub entry: String,
    pub edges: Vec<Edge>,
}

impl Procedure {
    pub fn nodes(&self) -> BTreeSet<&str> {
        let mut s: BTreeSet<&str> = [self.entry.as_str()].into();
        for e in &self.edges {
            s.insert(&e.from);
            if let Some(t) = &e.to {
                s.insert(t);
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowGraphSystem {
    pub main: String,
    pub procedures: Vec<Procedure>,
}

impl FlowGraphSystem {
    fn proc(&self, name: &str) -> Option<&Procedure> {
        self.procedures.iter().find(|p| p.name == name)
    }
}

/// `main <name>;` is optional and defaults to `main`, else the first procedure.
pub fn parse_flowgraph(src: &str) -> Result<FlowGraphSystem, ModelError> {
    let mut cur = Cursor::new(src);
    let mut main = None;
    let mut procedures = Vec::new();
    while !cur.done() {
        match cur.ident()?.as_str() {
            "main" => {
                main = Some(cur.ident()?);
                cur.expect(";")?;
            }
            "proc" => {
                let name = cur.ident()?;
                cur.expect("entry")?;
                let entry = cur.ident()?;
                cur.expect("{")?;
                let mut edges = Vec::new();
                while !cur.eat("}") {
                    cur.expect("edge")?;
                    let words = cur.names_until_semi()?;
                    let w: Vec<&str> = words.iter().map(String::as_str).collect();
                    let edge = match w.as_slice() {
                        [a, "ret"] => Edge {
                            from: a.to_string(),
                            to: None,
                            kind: EdgeKind::Ret,
                        },
                        [a, b] => Edge {
                            from: a.to_string(),
                            to: Some(b.to_string()),
                            kind: EdgeKind::Simple,
                        },
                        [a, b, "call", p] => Edge {
                            from: a.to_string(),
                            to: Some(b.to_string()),
                            kind: EdgeKind::Call(p.to_string()),
                        },
                        [a, b, "spawn", p] => Edge {
                            from: a.to_string(),
                            to: Some(b.to_string()),
                            kind: EdgeKind::Spawn(p.to_string()),
                        },
                        _ => return cur.err(format!("malformed edge `{}`", words.join(" "))),
                    };
                    edges.push(edge);
                }
                procedures.push(Procedure { name, entry, edges });
            }
            other => return cur.err(format!("unexpected `{other}`")),
        }
    }
    let main = match main {
        Some(m) => m,
        None if procedures.iter().any(|p: &Procedure| p.name == "main") => "main".into(),
        None => procedures
            .first()
            .map(|p| p.name.clone())
            .ok_or(ModelError::Parse {
                line: 0,
                msg: "no procedures".into(),
            })?,
    };
    let sys = FlowGraphSystem { main, procedures };
    if sys.proc(&sys.main).is_none() {
        return Err(ModelError::Parse {
            line: 0,
            msg: format!("unknown main procedure `{}`", sys.main),
        });
    }
    Ok(sys)
}

/// One process per spawnable entry (main first, then spawn targets in discovery
/// order), each with a single control `*<proc>` and program points as stack symbols.
pub fn flowgraph_to_dpn(sys: &FlowGraphSystem) -> Result<Dpn, ModelError> {
    let undeclared = |p: &str| ModelError::Parse {
        line: 0,
        msg: format!("undeclared procedure `{p}`"),
    };
    // spawnable entries
    let mut roots = vec![sys.main.clone()];
    let mut i = 0;
    while i < roots.len() {
        for p in reachable(sys, &roots[i])? {
            for e in &sys.proc(&p).unwrap().edges {
                if let EdgeKind::Spawn(t) = &e.kind {
                    sys.proc(t).ok_or_else(|| undeclared(t))?;
                    if !roots.contains(t) {
                        roots.push(t.clone());
                    }
                }
            }
        }
        i += 1;
    }
    let mut dpn = Dpn::default();
    for r in &roots {
        dpn.processes.push(Dpds {
            name: r.clone(),
            controls: vec![format!("*{r}")],
            ..Dpds::default()
        });
    }
    for (k, r) in roots.iter().enumerate() {
        let procs = reachable(sys, r)?;
        let entry = sys.proc(r).unwrap().entry.clone();
        dpn.processes[k].intern_symbol(&entry);
        for pname in &procs {
            let p = sys.proc(pname).unwrap();
            for n in p.nodes() {
                dpn.processes[k].intern_symbol(n);
            }
        }
        for pname in &procs {
            let p = sys.proc(pname).unwrap();
            for e in &p.edges {
                let d = &mut dpn.processes[k];
                let from = d.symbol(&e.from).unwrap();
                let to = e.to.as_ref().map(|t| d.symbol(t).unwrap());
                let rule = match &e.kind {
                    EdgeKind::Simple => Rule {
                        from: 0,
                        top: from,
                        tag: Tag::Int,
                        to: 0,
                        push: vec![to.unwrap()],
                        spawn: None,
                    },
                    EdgeKind::Ret => Rule {
                        from: 0,
                        top: from,
                        tag: Tag::Ret,
                        to: 0,
                        push: vec![],
                        spawn: None,
                    },
                    EdgeKind::Call(c) => {
                        let callee = sys.proc(c).ok_or_else(|| undeclared(c))?;
                        let e_proc = d.symbol(&callee.entry).unwrap();
                        Rule {
                            from: 0,
                            top: from,
                            tag: Tag::Call,
                            to: 0,
                            push: vec![e_proc, to.unwrap()],
                            spawn: None,
                        }
                    }
                    EdgeKind::Spawn(t) => {
                        // the spawn word is filled in once every process has its symbols
                        let j = roots.iter().position(|x| x == t).unwrap();
                        let spawn = Spawn {
                            process: j,
                            control: 0,
                            word: vec![],
                        };
                        Rule {
                            from: 0,
                            top: from,
                            tag: Tag::Int,
                            to: 0,
                            push: vec![to.unwrap()],
                            spawn: Some(spawn),
                        }
                    }
                };
                dpn.processes[k].rules.push(rule);
            }
        }
    }
    let entries: Vec<u32> = roots
        .iter()
        .enumerate()
        .map(|(j, r)| {
            dpn.processes[j]
                .symbol(&sys.proc(r).unwrap().entry)
                .unwrap()
        })
        .collect();
    for p in dpn.processes.iter_mut() {
        for r in p.rules.iter_mut() {
            if let Some(sp) = r.spawn.as_mut() {
                sp.word = vec![entries[sp.process]];
            }
        }
    }
    dpn.labels = dpn
        .processes
        .iter()
        .map(|p| vec![BTreeSet::new(); p.controls.len()])
        .collect();
    let diags = dpn.validate();
    if !diags.is_empty() {
        return Err(ModelError::Invalid(diags));
    }
    Ok(dpn)
}

/// Procedures reachable from `root` through call edges, root first.
fn reachable(sys: &FlowGraphSystem, root: &str) -> Result<Vec<String>, ModelError> {
    let mut seen = vec![root.to_string()];
    let mut queue = VecDeque::from([root.to_string()]);
    while let Some(p) = queue.pop_front() {
        let proc = sys.proc(&p).ok_or_else(|| ModelError::Parse {
            line: 0,
            msg: format!("undeclared procedure `{p}`"),
        })?;
        for e in &proc.edges {
            if let EdgeKind::Call(c) = &e.kind {
                if !seen.contains(c) {
                    seen.push(c.clone());
                    queue.push_back(c.clone());
                }
            }
        }
    }
    Ok(seen)
}
