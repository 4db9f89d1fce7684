use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::dpn::{
    Cursor, Dpds, Dpn, GlobalConfig, LocalConfig, ModelError, Rule, Spawn, Stuttered,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegvalError {
    #[error(transparent)]
    Parse(#[from] ModelError),
    #[error("unknown process `{0}`")]
    UnknownProcess(String),
    #[error("unknown control `{control}` in process `{process}`")]
    UnknownControl { process: String, control: String },
    #[error("automaton for `{prop}`: unknown stack symbol `{symbol}`")]
    UnknownSymbol { prop: String, symbol: String },
    #[error("automaton for `{prop}`: unknown state `{state}`")]
    UnknownState { prop: String, state: String },
    #[error("automaton for `{prop}`: two transitions from `{state}` on `{symbol}`")]
    Nondeterministic {
        prop: String,
        state: String,
        symbol: String,
    },
    #[error("automaton for `{prop}`: no transition from `{state}` on `{symbol}`")]
    Incomplete {
        prop: String,
        state: String,
        symbol: String,
    },
    #[error("proposition `{0}` is not declared by the model")]
    UndeclaredProp(String),
}

/// Complete deterministic automaton over the stack symbols of one process,
/// reading a stack from the top down.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    pub states: Vec<String>,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
    /// `delta[state][symbol]`
    pub delta: Vec<Vec<usize>>,
}

impl Dfa {
    pub fn accepts(&self, stack: &[u32]) -> bool {
        let s = stack
            .iter()
            .fold(self.initial, |s, &g| self.delta[s][g as usize]);
        self.finals.contains(&s)
    }

    /// Automaton accepting every stack.
    pub fn universal(n_symbols: usize) -> Dfa {
        Dfa {
            states: vec!["s".into()],
            initial: 0,
            finals: [0].into(),
            delta: vec![vec![0; n_symbols]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValEntry {
    pub prop: String,
    pub process: usize,
    pub control: u32,
    pub dfa: Dfa,
}

/// `e` holds at `p w` iff some entry for `(e, p)` accepts `w`. Propositions
/// with no entry at all keep their simple labelling.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RegularValuation {
    pub entries: Vec<ValEntry>,
}

impl RegularValuation {
    pub fn props(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.prop.as_str()).collect()
    }

    /// The same valuation on a stuttered network: bottom markers are skipped.
    pub fn stuttered(&self, s: &Stuttered) -> RegularValuation {
        let mut out = self.clone();
        for e in &mut out.entries {
            let m = s.markers[e.process] as usize;
            for (q, row) in e.dfa.delta.iter_mut().enumerate() {
                row.resize(row.len().max(m + 1), q);
                row[m] = q;
            }
        }
        out
    }

    /// Direct evaluation on a configuration.
    pub fn labels(&self, dpn: &Dpn, c: &LocalConfig) -> BTreeSet<String> {
        let regular = self.props();
        let mut out: BTreeSet<String> = dpn
            .label(c.process, c.control)
            .iter()
            .filter(|p| !regular.contains(p.as_str()))
            .cloned()
            .collect();
        for e in &self.entries {
            if e.process == c.process && e.control == c.control && e.dfa.accepts(&c.stack) {
                out.insert(e.prop.clone());
            }
        }
        out
    }
}

/// ```text
/// automaton <prop> for <Process> [<control>] {
///   states s0 s1; initial s0; final s1;
///   s0 x -> s1;  s0 _ -> s0;   # `_`: every symbol without its own transition
/// }
/// ```
/// Without a control the automaton applies to every control of the process.
pub fn parse_valuation(src: &str, dpn: &Dpn) -> Result<RegularValuation, RegvalError> {
    let mut cur = Cursor::new(src);
    let mut entries = Vec::new();
    while !cur.done() {
        cur.expect("automaton")?;
        let prop = cur.ident()?;
        if !dpn.ap.contains(&prop) {
            return Err(RegvalError::UndeclaredProp(prop));
        }
        cur.expect("for")?;
        let pname = cur.ident()?;
        let process = dpn
            .process_index(&pname)
            .ok_or_else(|| RegvalError::UnknownProcess(pname.clone()))?;
        let proc = &dpn.processes[process];
        let controls: Vec<u32> = if cur.peek() == Some("{") {
            (0..proc.controls.len() as u32).collect()
        } else {
            let c = cur.ident()?;
            vec![proc
                .control(&c)
                .ok_or_else(|| RegvalError::UnknownControl {
                    process: pname.clone(),
                    control: c,
                })?]
        };
        let dfa = parse_dfa(&mut cur, &prop, proc)?;
        for c in controls {
            entries.push(ValEntry {
                prop: prop.clone(),
                process,
                control: c,
                dfa: dfa.clone(),
            });
        }
    }
    Ok(RegularValuation { entries })
}

fn parse_dfa(cur: &mut Cursor, prop: &str, proc: &Dpds) -> Result<Dfa, RegvalError> {
    cur.expect("{")?;
    let mut states: Vec<String> = Vec::new();
    let mut initial = None;
    let mut finals = Vec::new();
    let mut trans: Vec<(String, String, String)> = Vec::new();
    while !cur.eat("}") {
        match cur.peek() {
            Some("states") => {
                cur.next()?;
                states.extend(cur.names_until_semi()?);
            }
            Some("initial") => {
                cur.next()?;
                initial = Some(cur.ident()?);
                cur.expect(";")?;
            }
            Some("final") => {
                cur.next()?;
                finals.extend(cur.names_until_semi()?);
            }
            _ => {
                let s = cur.ident()?;
                let g = cur.ident()?;
                cur.expect("->")?;
                let t = cur.ident()?;
                cur.expect(";")?;
                trans.push((s, g, t));
            }
        }
    }
    let state = |s: &str| {
        states
            .iter()
            .position(|x| x == s)
            .ok_or_else(|| RegvalError::UnknownState {
                prop: prop.into(),
                state: s.into(),
            })
    };
    let initial = match initial {
        Some(s) => state(&s)?,
        None => {
            return Err(ModelError::Parse {
                line: cur.line(),
                msg: format!("automaton for `{prop}` has no initial state"),
            }
            .into())
        }
    };
    let finals = finals
        .iter()
        .map(|s| state(s))
        .collect::<Result<BTreeSet<_>, _>>()?;
    let n = proc.symbols.len();
    let mut delta: Vec<Vec<Option<usize>>> = vec![vec![None; n]; states.len()];
    let mut wild: Vec<Option<usize>> = vec![None; states.len()];
    for (s, g, t) in &trans {
        let (si, ti) = (state(s)?, state(t)?);
        let slot = if g == "_" {
            &mut wild[si]
        } else {
            let gi = proc.symbol(g).ok_or_else(|| RegvalError::UnknownSymbol {
                prop: prop.into(),
                symbol: g.clone(),
            })?;
            &mut delta[si][gi as usize]
        };
        if slot.is_some_and(|old| old != ti) {
            return Err(RegvalError::Nondeterministic {
                prop: prop.into(),
                state: s.clone(),
                symbol: g.clone(),
            });
        }
        *slot = Some(ti);
    }
    let mut full = Vec::with_capacity(states.len());
    for (si, row) in delta.into_iter().enumerate() {
        let mut r = Vec::with_capacity(n);
        for (gi, t) in row.into_iter().enumerate() {
            match t.or(wild[si]) {
                Some(t) => r.push(t),
                None => {
                    return Err(RegvalError::Incomplete {
                        prop: prop.into(),
                        state: states[si].clone(),
                        symbol: proc.symbols[gi].clone(),
                    })
                }
            }
        }
        full.push(r);
    }
    Ok(Dfa {
        states,
        initial,
        finals,
        delta: full,
    })
}

/// Reverse of a top-down automaton, determinized: reads a stack bottom-up and
/// accepts iff the original accepts it top-down.
#[derive(Clone, Debug)]
struct BottomUp {
    accepting: Vec<bool>,
    delta: Vec<Vec<usize>>,
}

#[allow(clippy::needless_range_loop)]
fn bottom_up(d: &Dfa) -> BottomUp {
    let n = d.delta.first().map_or(0, Vec::len);
    let mut pre: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n]; d.states.len()];
    for (s, row) in d.delta.iter().enumerate() {
        for (g, &t) in row.iter().enumerate() {
            pre[t][g].push(s);
        }
    }
    let start: BTreeSet<usize> = d.finals.clone();
    let mut index: HashMap<BTreeSet<usize>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut subsets = vec![start];
    let mut delta: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < subsets.len() {
        let mut row = Vec::with_capacity(n);
        for g in 0..n {
            let next: BTreeSet<usize> = subsets[i]
                .iter()
                .flat_map(|&t| pre[t][g].iter().copied())
                .collect();
            let k = match index.get(&next) {
                Some(&k) => k,
                None => {
                    index.insert(next.clone(), subsets.len());
                    subsets.push(next);
                    subsets.len() - 1
                }
            };
            row.push(k);
        }
        delta.push(row);
        i += 1;
    }
    let accepting = subsets.iter().map(|s| s.contains(&d.initial)).collect();
    BottomUp { accepting, delta }
}

struct ProcEncoding {
    autos: Vec<(usize, BottomUp)>,
    vectors: Vec<Vec<usize>>,
    /// `step[v][g]`: vector index after reading `g` on top of `v`
    step: Vec<Vec<usize>>,
}

/// A network whose symbols carry the valuation state below them and whose
/// controls carry the state of the whole stack.
#[derive(Clone, Debug)]
pub struct RegvalEncoding {
    pub dpn: Dpn,
    /// per process: base symbol and vector of each encoded symbol
    pub symbols: Vec<Vec<(u32, usize)>>,
    /// per process: base control and vector of each encoded control
    pub controls: Vec<Vec<(u32, usize)>>,
    sym_index: Vec<HashMap<(u32, usize), u32>>,
    ctl_index: Vec<HashMap<(u32, usize), u32>>,
    steps: Vec<Vec<Vec<usize>>>,
}

impl RegvalEncoding {
    pub fn encode_config(&self, c: &LocalConfig) -> LocalConfig {
        let step = &self.steps[c.process];
        let mut v = 0;
        let mut stack = vec![0; c.stack.len()];
        for (k, &g) in c.stack.iter().enumerate().rev() {
            stack[k] = self.sym_index[c.process][&(g, v)];
            v = step[v][g as usize];
        }
        LocalConfig {
            process: c.process,
            control: self.ctl_index[c.process][&(c.control, v)],
            stack,
        }
    }

    pub fn encode_global(&self, g: &GlobalConfig) -> GlobalConfig {
        GlobalConfig::new(g.iter().map(|c| self.encode_config(c)))
    }

    pub fn decode_config(&self, c: &LocalConfig) -> LocalConfig {
        LocalConfig {
            process: c.process,
            control: self.controls[c.process][c.control as usize].0,
            stack: c
                .stack
                .iter()
                .map(|&s| self.symbols[c.process][s as usize].0)
                .collect(),
        }
    }

    /// Every annotation equals the valuation run over the base stack below it.
    pub fn coherent(&self, c: &LocalConfig) -> bool {
        let base = self.decode_config(c);
        self.encode_config(&base) == *c
    }
}

fn fresh_name(base: String, taken: &BTreeSet<String>) -> String {
    let mut n = base;
    while taken.contains(&n) {
        n.push('\'');
    }
    n
}

/// Encode a regular valuation into stack annotations and a simple labelling of controls.
pub fn regval_encode(dpn: &Dpn, nu: &RegularValuation) -> RegvalEncoding {
    let regular = nu.props();
    let mut encs = Vec::new();
    for (i, p) in dpn.processes.iter().enumerate() {
        let autos: Vec<(usize, BottomUp)> = nu
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.process == i)
            .map(|(k, e)| (k, bottom_up(&e.dfa)))
            .collect();
        let n = p.symbols.len();
        let start = vec![0; autos.len()];
        let mut index = HashMap::from([(start.clone(), 0)]);
        let mut vectors = vec![start];
        let mut step = Vec::new();
        let mut k = 0;
        while k < vectors.len() {
            let mut row = Vec::with_capacity(n);
            for g in 0..n {
                let next: Vec<usize> = vectors[k]
                    .iter()
                    .zip(&autos)
                    .map(|(&s, (_, a))| a.delta[s][g])
                    .collect();
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        index.insert(next.clone(), vectors.len());
                        vectors.push(next);
                        vectors.len() - 1
                    }
                };
                row.push(id);
            }
            step.push(row);
            k += 1;
        }
        encs.push(ProcEncoding {
            autos,
            vectors,
            step,
        });
    }
    let taken: BTreeSet<String> = dpn
        .processes
        .iter()
        .flat_map(|p| p.controls.iter().cloned())
        .collect();
    let mut out = Dpn {
        ap: dpn.ap.clone(),
        processes: Vec::new(),
        labels: Vec::new(),
    };
    let mut symbols = Vec::new();
    let mut controls = Vec::new();
    let mut sym_index = Vec::new();
    let mut ctl_index = Vec::new();
    for (i, p) in dpn.processes.iter().enumerate() {
        let e = &encs[i];
        let nv = e.vectors.len();
        let mut d = Dpds {
            name: p.name.clone(),
            ..Dpds::default()
        };
        let mut syms = Vec::new();
        let mut sidx = HashMap::new();
        for g in 0..p.symbols.len() as u32 {
            for v in 0..nv {
                sidx.insert((g, v), syms.len() as u32);
                syms.push((g, v));
                d.symbols.push(format!("{}.{v}", p.symbols[g as usize]));
            }
        }
        let mut ctls = Vec::new();
        let mut cidx = HashMap::new();
        let mut labels = Vec::new();
        for c in 0..p.controls.len() as u32 {
            for v in 0..nv {
                cidx.insert((c, v), ctls.len() as u32);
                ctls.push((c, v));
                d.controls.push(fresh_name(
                    format!("{}.{v}", p.controls[c as usize]),
                    &taken,
                ));
                let mut l: BTreeSet<String> = dpn
                    .label(i, c)
                    .iter()
                    .filter(|x| !regular.contains(x.as_str()))
                    .cloned()
                    .collect();
                for (slot, (k, a)) in e.autos.iter().enumerate() {
                    let entry = &nu.entries[*k];
                    if entry.control == c && a.accepting[e.vectors[v][slot]] {
                        l.insert(entry.prop.clone());
                    }
                }
                labels.push(l);
            }
        }
        out.processes.push(d);
        out.labels.push(labels);
        symbols.push(syms);
        controls.push(ctls);
        sym_index.push(sidx);
        ctl_index.push(cidx);
    }
    let steps: Vec<Vec<Vec<usize>>> = encs.iter().map(|e| e.step.clone()).collect();
    let partial = RegvalEncoding {
        dpn: out,
        symbols,
        controls,
        sym_index,
        ctl_index,
        steps,
    };
    let mut rules = vec![Vec::new(); dpn.processes.len()];
    for (i, p) in dpn.processes.iter().enumerate() {
        let e = &encs[i];
        for r in &p.rules {
            let spawn = r.spawn.as_ref().map(|s| {
                let c = partial.encode_config(&s.config());
                Spawn {
                    process: s.process,
                    control: c.control,
                    word: c.stack,
                }
            });
            for v in 0..e.vectors.len() {
                let u = e.step[v][r.top as usize];
                let mut push = vec![0; r.push.len()];
                let mut w = v;
                for (k, &g) in r.push.iter().enumerate().rev() {
                    push[k] = partial.sym_index[i][&(g, w)];
                    w = e.step[w][g as usize];
                }
                rules[i].push(Rule {
                    from: partial.ctl_index[i][&(r.from, u)],
                    top: partial.sym_index[i][&(r.top, v)],
                    tag: r.tag,
                    to: partial.ctl_index[i][&(r.to, w)],
                    push,
                    spawn: spawn.clone(),
                });
            }
        }
    }
    let mut enc = partial;
    for (d, rs) in enc.dpn.processes.iter_mut().zip(rules) {
        d.rules = rs;
    }
    enc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpn::parse_dpn;

    const MODEL: &str = "
        ap { top_x }
        process P {
          controls p;
          symbols x y;
          rule p x -> p y x [call];
          rule p y -> p [ret];
        }
    ";

    #[test]
    fn top_symbol_idiom() {
        let dpn = parse_dpn(MODEL).unwrap();
        let nu = parse_valuation("automaton top_x for P { states s t z; initial s; final t; s x -> t; s _ -> z; t _ -> t; z _ -> z; }", &dpn).unwrap();
        let enc = regval_encode(&dpn, &nu);
        for stack in [vec![0u32], vec![1, 0], vec![0, 1, 0], vec![1, 1]] {
            let c = LocalConfig {
                process: 0,
                control: 0,
                stack,
            };
            let e = enc.encode_config(&c);
            assert!(enc.coherent(&e));
            assert_eq!(enc.decode_config(&e), c);
            let holds = enc.dpn.label(0, e.control).contains("top_x");
            assert_eq!(holds, c.stack[0] == 0);
            assert_eq!(holds, nu.labels(&dpn, &c).contains("top_x"));
        }
        assert!(enc.dpn.validate().is_empty());
    }

    #[test]
    fn errors() {
        let dpn = parse_dpn(MODEL).unwrap();
        let nondet = "automaton top_x for P { states s t; initial s; final t; s x -> t; s x -> s; s _ -> s; t _ -> t; }";
        assert!(matches!(
            parse_valuation(nondet, &dpn),
            Err(RegvalError::Nondeterministic { .. })
        ));
        let incomplete = "automaton top_x for P { states s; initial s; final s; s x -> s; }";
        assert!(matches!(
            parse_valuation(incomplete, &dpn),
            Err(RegvalError::Incomplete { .. })
        ));
        assert!(matches!(
            parse_valuation("automaton q for P { }", &dpn),
            Err(RegvalError::UndeclaredProp(_))
        ));
    }

    #[test]
    fn constant_valuation() {
        let dpn = parse_dpn(MODEL).unwrap();
        let nu = RegularValuation {
            entries: vec![ValEntry {
                prop: "top_x".into(),
                process: 0,
                control: 0,
                dfa: Dfa::universal(2),
            }],
        };
        let enc = regval_encode(&dpn, &nu);
        assert!(enc.dpn.labels[0].iter().all(|l| l.contains("top_x")));
    }
}
