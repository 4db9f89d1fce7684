use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::caret::Tag;

/// Target of a spawn suffix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spawn {
    pub process: usize,
    pub control: u32,
    pub word: Vec<u32>,
}

impl Spawn {
    pub fn config(&self) -> LocalConfig {
        LocalConfig {
            process: self.process,
            control: self.control,
            stack: self.word.clone(),
        }
    }
}

/// `p γ →tag q ω (▷ spawn)?`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub from: u32,
    pub top: u32,
    pub tag: Tag,
    pub to: u32,
    pub push: Vec<u32>,
    pub spawn: Option<Spawn>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Dpds {
    pub name: String,
    pub controls: Vec<String>,
    pub symbols: Vec<String>,
    pub rules: Vec<Rule>,
}

impl Dpds {
    pub fn control(&self, name: &str) -> Option<u32> {
        self.controls
            .iter()
            .position(|c| c == name)
            .map(|i| i as u32)
    }

    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols
            .iter()
            .position(|c| c == name)
            .map(|i| i as u32)
    }

    /// Add a symbol if missing; returns its index.
    pub fn intern_symbol(&mut self, name: &str) -> u32 {
        match self.symbol(name) {
            Some(i) => i,
            None => {
                self.symbols.push(name.to_string());
                (self.symbols.len() - 1) as u32
            }
        }
    }

    pub fn rules_from(&self, p: u32, g: u32) -> impl Iterator<Item = (usize, &Rule)> {
        self.rules
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.from == p && r.top == g)
    }
}

/// A network of pushdown processes with a control labelling.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Dpn {
    pub ap: BTreeSet<String>,
    pub processes: Vec<Dpds>,
    /// `labels[i][p]` is λ of control `p` of process `i`.
    pub labels: Vec<Vec<BTreeSet<String>>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LocalConfig {
    pub process: usize,
    pub control: u32,
    pub stack: Vec<u32>,
}

/// Multiset of local configurations, kept sorted with multiplicities.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GlobalConfig {
    entries: Vec<(LocalConfig, usize)>,
}

impl GlobalConfig {
    pub fn new(configs: impl IntoIterator<Item = LocalConfig>) -> GlobalConfig {
        let mut m: BTreeMap<LocalConfig, usize> = BTreeMap::new();
        for c in configs {
            *m.entry(c).or_default() += 1;
        }
        GlobalConfig {
            entries: m.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &[(LocalConfig, usize)] {
        &self.entries
    }

    /// Distinct local configurations.
    pub fn distinct(&self) -> impl Iterator<Item = &LocalConfig> {
        self.entries.iter().map(|(c, _)| c)
    }

    /// Every local configuration, repeated by multiplicity.
    pub fn iter(&self) -> impl Iterator<Item = &LocalConfig> {
        self.entries
            .iter()
            .flat_map(|(c, n)| std::iter::repeat_n(c, *n))
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub next: LocalConfig,
    pub spawned: Option<LocalConfig>,
    pub tag: Tag,
    pub rule: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    NoProcesses,
    Arity {
        process: String,
        rule: usize,
        tag: Tag,
        len: usize,
    },
    UnknownControl {
        process: String,
        rule: usize,
    },
    UnknownSymbol {
        process: String,
        rule: usize,
    },
    UnknownProcess {
        process: String,
        rule: usize,
    },
    OverlappingControl(String),
    Labels {
        process: String,
    },
    UndeclaredProp {
        control: String,
        prop: String,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoProcesses => write!(f, "no processes"),
            Diagnostic::Arity {
                process,
                rule,
                tag,
                len,
            } => {
                write!(
                    f,
                    "{process}: rule {rule} tagged {tag} pushes {len} symbols"
                )
            }
            Diagnostic::UnknownControl { process, rule } => {
                write!(f, "{process}: rule {rule} uses an unknown control")
            }
            Diagnostic::UnknownSymbol { process, rule } => {
                write!(f, "{process}: rule {rule} uses an unknown symbol")
            }
            Diagnostic::UnknownProcess { process, rule } => {
                write!(f, "{process}: rule {rule} spawns an unknown process")
            }
            Diagnostic::OverlappingControl(c) => {
                write!(f, "control `{c}` declared by several processes")
            }
            Diagnostic::Labels { process } => {
                write!(f, "{process}: labelling does not cover the controls")
            }
            Diagnostic::UndeclaredProp { control, prop } => {
                write!(f, "label of `{control}` uses undeclared `{prop}`")
            }
        }
    }
}

impl Dpn {
    pub fn process_index(&self, name: &str) -> Option<usize> {
        self.processes.iter().position(|p| p.name == name)
    }

    /// Process and index of a control name (control names are network-unique).
    pub fn find_control(&self, name: &str) -> Option<(usize, u32)> {
        self.processes
            .iter()
            .enumerate()
            .find_map(|(i, p)| p.control(name).map(|c| (i, c)))
    }

    pub fn label(&self, process: usize, control: u32) -> &BTreeSet<String> {
        &self.labels[process][control as usize]
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.processes.is_empty() {
            out.push(Diagnostic::NoProcesses);
        }
        let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, p) in self.processes.iter().enumerate() {
            for c in &p.controls {
                if owner.insert(c, i).is_some_and(|j| j != i) {
                    out.push(Diagnostic::OverlappingControl(c.clone()));
                }
            }
        }
        for (i, p) in self.processes.iter().enumerate() {
            let nc = p.controls.len() as u32;
            let ns = p.symbols.len() as u32;
            for (k, r) in p.rules.iter().enumerate() {
                let arity_ok = match r.tag {
                    Tag::Call => r.push.len() == 2,
                    Tag::Ret => r.push.is_empty(),
                    Tag::Int => true,
                };
                if !arity_ok {
                    out.push(Diagnostic::Arity {
                        process: p.name.clone(),
                        rule: k,
                        tag: r.tag,
                        len: r.push.len(),
                    });
                }
                if r.from >= nc || r.to >= nc {
                    out.push(Diagnostic::UnknownControl {
                        process: p.name.clone(),
                        rule: k,
                    });
                }
                if r.top >= ns || r.push.iter().any(|&g| g >= ns) {
                    out.push(Diagnostic::UnknownSymbol {
                        process: p.name.clone(),
                        rule: k,
                    });
                }
                if let Some(sp) = &r.spawn {
                    match self.processes.get(sp.process) {
                        None => out.push(Diagnostic::UnknownProcess {
                            process: p.name.clone(),
                            rule: k,
                        }),
                        Some(t) => {
                            if sp.control as usize >= t.controls.len() {
                                out.push(Diagnostic::UnknownControl {
                                    process: p.name.clone(),
                                    rule: k,
                                });
                            }
                            if sp.word.iter().any(|&g| g as usize >= t.symbols.len()) {
                                out.push(Diagnostic::UnknownSymbol {
                                    process: p.name.clone(),
                                    rule: k,
                                });
                            }
                        }
                    }
                }
            }
            match self.labels.get(i) {
                Some(l) if l.len() == p.controls.len() => {
                    for (c, set) in l.iter().enumerate() {
                        for e in set.iter().filter(|e| !self.ap.contains(*e)) {
                            out.push(Diagnostic::UndeclaredProp {
                                control: p.controls[c].clone(),
                                prop: e.clone(),
                            });
                        }
                    }
                }
                _ => out.push(Diagnostic::Labels {
                    process: p.name.clone(),
                }),
            }
        }
        out
    }

    /// All one-step successors of `c`.
    pub fn step(&self, c: &LocalConfig) -> Vec<Step> {
        let Some((&top, rest)) = c.stack.split_first() else {
            return Vec::new();
        };
        let mut out: Vec<Step> = self.processes[c.process]
            .rules_from(c.control, top)
            .map(|(k, r)| {
                let mut stack = r.push.clone();
                stack.extend_from_slice(rest);
                Step {
                    next: LocalConfig {
                        process: c.process,
                        control: r.to,
                        stack,
                    },
                    spawned: r.spawn.as_ref().map(Spawn::config),
                    tag: r.tag,
                    rule: k,
                }
            })
            .collect();
        out.sort();
        out
    }

    /// Spawn targets occurring in the rules of process `i`.
    pub fn dclics_of(&self, i: usize) -> BTreeSet<LocalConfig> {
        self.processes[i]
            .rules
            .iter()
            .filter_map(|r| r.spawn.as_ref().map(Spawn::config))
            .collect()
    }

    pub fn all_dclics(&self) -> BTreeSet<LocalConfig> {
        (0..self.processes.len())
            .flat_map(|i| self.dclics_of(i))
            .collect()
    }

    pub fn show(&self, c: &LocalConfig) -> String {
        let p = &self.processes[c.process];
        let mut s = format!("{}: {}", p.name, p.controls[c.control as usize]);
        for &g in &c.stack {
            s.push(' ');
            s.push_str(&p.symbols[g as usize]);
        }
        s
    }

    /// Parse `Proc: control sym sym` (the process prefix is optional).
    pub fn parse_local(&self, text: &str) -> Result<LocalConfig, String> {
        let (proc_name, body) = match text.split_once(':') {
            Some((a, b)) => (Some(a.trim()), b),
            None => (None, text),
        };
        let mut words = body.split_whitespace();
        let ctrl = words
            .next()
            .ok_or_else(|| format!("empty configuration `{text}`"))?;
        let (i, c) = self
            .find_control(ctrl)
            .ok_or_else(|| format!("unknown control `{ctrl}`"))?;
        if let Some(name) = proc_name {
            if self.processes[i].name != name {
                return Err(format!(
                    "control `{ctrl}` does not belong to process `{name}`"
                ));
            }
        }
        let stack = words
            .map(|w| {
                self.processes[i]
                    .symbol(w)
                    .ok_or_else(|| format!("unknown stack symbol `{w}`"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LocalConfig {
            process: i,
            control: c,
            stack,
        })
    }

    /// Parse a comma-separated multiset of local configurations.
    pub fn parse_global(&self, text: &str) -> Result<GlobalConfig, String> {
        let parts = text.split(',').map(str::trim).filter(|s| !s.is_empty());
        Ok(GlobalConfig::new(
            parts
                .map(|p| self.parse_local(p))
                .collect::<Result<Vec<_>, _>>()?,
        ))
    }

    /// Stuttering variant: a fresh bottom marker per process with an int self-loop
    /// on it for every control, appended under every initial and spawned stack.
    pub fn with_stutter(&self) -> Stuttered {
        let mut dpn = self.clone();
        let mut markers = Vec::new();
        for p in dpn.processes.iter_mut() {
            let mut name = String::from("_bot");
            while p.symbol(&name).is_some() {
                name.push('_');
            }
            markers.push(p.intern_symbol(&name));
        }
        for p in dpn.processes.iter_mut() {
            for r in p.rules.iter_mut() {
                if let Some(sp) = r.spawn.as_mut() {
                    sp.word.push(markers[sp.process]);
                }
            }
        }
        for (i, p) in dpn.processes.iter_mut().enumerate() {
            for c in 0..p.controls.len() as u32 {
                p.rules.push(Rule {
                    from: c,
                    top: markers[i],
                    tag: Tag::Int,
                    to: c,
                    push: vec![markers[i]],
                    spawn: None,
                });
            }
        }
        Stuttered { dpn, markers }
    }
}

/// A network transformed by [`Dpn::with_stutter`].
#[derive(Clone, Debug)]
pub struct Stuttered {
    pub dpn: Dpn,
    pub markers: Vec<u32>,
}

impl Stuttered {
    pub fn lift(&self, c: &LocalConfig) -> LocalConfig {
        let mut c = c.clone();
        c.stack.push(self.markers[c.process]);
        c
    }

    pub fn lift_global(&self, g: &GlobalConfig) -> GlobalConfig {
        GlobalConfig::new(g.iter().map(|c| self.lift(c)))
    }
}
