use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::model::{Diagnostic, Dpds, Dpn, Rule, Spawn};
use crate::caret::Tag;
use crate::reductions::{Action, LDpn};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("model uses lock actions; translate it first")]
    HasLocks,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub text: String,
    pub line: usize,
}

pub(crate) fn tokenize(src: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (ln, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let line = line.split("//").next().unwrap_or("");
        let mut cur = String::new();
        let flush = |cur: &mut String, out: &mut Vec<Token>| {
            if !cur.is_empty() {
                out.push(Token {
                    text: std::mem::take(cur),
                    line: ln + 1,
                });
            }
        };
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                flush(&mut cur, &mut out);
            } else if c == '-' && chars.get(i + 1) == Some(&'>') {
                flush(&mut cur, &mut out);
                out.push(Token {
                    text: "->".into(),
                    line: ln + 1,
                });
                i += 1;
            } else if "{};:,[]".contains(c) {
                flush(&mut cur, &mut out);
                out.push(Token {
                    text: c.to_string(),
                    line: ln + 1,
                });
            } else {
                cur.push(c);
            }
            i += 1;
        }
        flush(&mut cur, &mut out);
    }
    out
}

pub(crate) struct Cursor {
    toks: Vec<Token>,
    at: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Cursor {
        Cursor {
            toks: tokenize(src),
            at: 0,
        }
    }

    pub fn peek(&self) -> Option<&str> {
        self.toks.get(self.at).map(|t| t.text.as_str())
    }

    pub fn line(&self) -> usize {
        self.toks
            .get(self.at)
            .or(self.toks.last())
            .map_or(0, |t| t.line)
    }

    pub fn err<T>(&self, msg: impl Into<String>) -> Result<T, ModelError> {
        Err(ModelError::Parse {
            line: self.line(),
            msg: msg.into(),
        })
    }

    pub fn next(&mut self) -> Result<String, ModelError> {
        match self.toks.get(self.at) {
            Some(t) => {
                self.at += 1;
                Ok(t.text.clone())
            }
            None => self.err("unexpected end of input"),
        }
    }

    pub fn ident(&mut self) -> Result<String, ModelError> {
        let t = self.next()?;
        if t.len() == 1 && "{};:,[]".contains(t.as_str()) || t == "->" {
            self.at -= 1;
            return self.err(format!("expected a name, found `{t}`"));
        }
        Ok(t)
    }

    pub fn expect(&mut self, s: &str) -> Result<(), ModelError> {
        let t = self.next()?;
        if t != s {
            self.at -= 1;
            return self.err(format!("expected `{s}`, found `{t}`"));
        }
        Ok(())
    }

    pub fn eat(&mut self, s: &str) -> bool {
        if self.peek() == Some(s) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub fn done(&self) -> bool {
        self.at >= self.toks.len()
    }

    /// Names up to `;`.
    pub fn names_until_semi(&mut self) -> Result<Vec<String>, ModelError> {
        let mut v = Vec::new();
        while !self.eat(";") {
            v.push(self.ident()?);
        }
        Ok(v)
    }

    /// `{ a; b, c }` as a list of names.
    pub fn name_block(&mut self) -> Result<Vec<String>, ModelError> {
        self.expect("{")?;
        let mut v = Vec::new();
        while !self.eat("}") {
            if self.eat(";") || self.eat(",") {
                continue;
            }
            v.push(self.ident()?);
        }
        Ok(v)
    }
}

struct RawRule {
    line: usize,
    from: String,
    top: String,
    to: String,
    push: Vec<String>,
    tag: Tag,
    action: Option<(String, Option<String>)>,
    spawn: Option<(String, String, Vec<String>)>,
}

struct RawProcess {
    name: String,
    controls: Vec<String>,
    symbols: Vec<String>,
    rules: Vec<RawRule>,
}

fn parse_rule(cur: &mut Cursor) -> Result<RawRule, ModelError> {
    let line = cur.line();
    let from = cur.ident()?;
    let top = cur.ident()?;
    cur.expect("->")?;
    let to = cur.ident()?;
    let mut push = Vec::new();
    while cur.peek().is_some_and(|t| t != "[") {
        push.push(cur.ident()?);
    }
    cur.expect("[")?;
    let t = cur.ident()?;
    let tag = Tag::from_name(&t).map_or_else(|| cur.err(format!("unknown tag `{t}`")), Ok)?;
    cur.expect("]")?;
    let mut action = None;
    if cur.eat("[") {
        let a = cur.ident()?;
        let lock = if a == "tau" { None } else { Some(cur.ident()?) };
        if !matches!(a.as_str(), "tau" | "acq" | "rel") {
            return cur.err(format!("unknown action `{a}`"));
        }
        cur.expect("]")?;
        action = Some((a, lock));
    }
    let mut spawn = None;
    if cur.eat("spawn") {
        let proc_name = cur.ident()?;
        let ctrl = cur.ident()?;
        let word = cur.names_until_semi()?;
        spawn = Some((proc_name, ctrl, word));
    } else {
        cur.expect(";")?;
    }
    Ok(RawRule {
        line,
        from,
        top,
        to,
        push,
        tag,
        action,
        spawn,
    })
}

/// Parse the model format, lock extensions included. The result is validated.
pub fn parse_model(src: &str) -> Result<LDpn, ModelError> {
    let mut cur = Cursor::new(src);
    let mut ap = BTreeSet::new();
    let mut locks: Vec<String> = Vec::new();
    let mut raw: Vec<RawProcess> = Vec::new();
    let mut raw_labels: Vec<(usize, String, Vec<String>)> = Vec::new();
    while !cur.done() {
        let kw = cur.ident()?;
        match kw.as_str() {
            "ap" => ap.extend(cur.name_block()?),
            "locks" => {
                for l in cur.name_block()? {
                    if !locks.contains(&l) {
                        locks.push(l);
                    }
                }
            }
            "labels" => {
                cur.expect("{")?;
                while !cur.eat("}") {
                    let line = cur.line();
                    let c = cur.ident()?;
                    cur.expect(":")?;
                    let props = cur.name_block()?;
                    cur.eat(";");
                    raw_labels.push((line, c, props));
                }
            }
            "process" => {
                let name = cur.ident()?;
                cur.expect("{")?;
                let mut p = RawProcess {
                    name,
                    controls: Vec::new(),
                    symbols: Vec::new(),
                    rules: Vec::new(),
                };
                while !cur.eat("}") {
                    let item = cur.ident()?;
                    match item.as_str() {
                        "controls" => p.controls.extend(cur.names_until_semi()?),
                        "symbols" | "stack" => p.symbols.extend(cur.names_until_semi()?),
                        "rule" => p.rules.push(parse_rule(&mut cur)?),
                        other => return cur.err(format!("unexpected `{other}` in process body")),
                    }
                }
                raw.push(p);
            }
            other => return cur.err(format!("unexpected `{other}`")),
        }
    }

    let mut dpn = Dpn {
        ap,
        processes: Vec::new(),
        labels: Vec::new(),
    };
    for p in &raw {
        let mut d = Dpds {
            name: p.name.clone(),
            controls: Vec::new(),
            symbols: Vec::new(),
            rules: Vec::new(),
        };
        for c in &p.controls {
            if !d.controls.contains(c) {
                d.controls.push(c.clone());
            }
        }
        for s in &p.symbols {
            d.intern_symbol(s);
        }
        dpn.processes.push(d);
    }
    let pidx = |name: &str, line: usize| {
        raw.iter()
            .position(|p| p.name == name)
            .ok_or_else(|| ModelError::Parse {
                line,
                msg: format!("unknown process `{name}`"),
            })
    };
    // symbols in order of appearance so that printing and re-parsing agree
    for (i, p) in raw.iter().enumerate() {
        for r in &p.rules {
            dpn.processes[i].intern_symbol(&r.top);
            for s in &r.push {
                dpn.processes[i].intern_symbol(s);
            }
            if let Some((pn, _, w)) = &r.spawn {
                let j = pidx(pn, r.line)?;
                for s in w {
                    dpn.processes[j].intern_symbol(s);
                }
            }
        }
    }
    let mut actions = Vec::new();
    for (i, p) in raw.iter().enumerate() {
        let mut acts = Vec::new();
        for r in &p.rules {
            let ctrl = |name: &str, j: usize| {
                dpn.processes[j]
                    .control(name)
                    .ok_or_else(|| ModelError::Parse {
                        line: r.line,
                        msg: format!("unknown control `{name}` in process `{}`", raw[j].name),
                    })
            };
            let from = ctrl(&r.from, i)?;
            let to = ctrl(&r.to, i)?;
            let me = &dpn.processes[i];
            let top = me.symbol(&r.top).unwrap();
            let push = r.push.iter().map(|s| me.symbol(s).unwrap()).collect();
            let spawn = match &r.spawn {
                None => None,
                Some((pn, c, w)) => {
                    let j = pidx(pn, r.line)?;
                    let control = ctrl(c, j)?;
                    let word = w
                        .iter()
                        .map(|s| dpn.processes[j].symbol(s).unwrap())
                        .collect();
                    Some(Spawn {
                        process: j,
                        control,
                        word,
                    })
                }
            };
            let action = match &r.action {
                None => Action::Tau,
                Some((a, None)) if a == "tau" => Action::Tau,
                Some((a, Some(l))) => {
                    let k = locks
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| ModelError::Parse {
                            line: r.line,
                            msg: format!("undeclared lock `{l}`"),
                        })?;
                    if a == "acq" {
                        Action::Acq(k)
                    } else {
                        Action::Rel(k)
                    }
                }
                Some(_) => unreachable!(),
            };
            acts.push(action);
            dpn.processes[i].rules.push(Rule {
                from,
                top,
                tag: r.tag,
                to,
                push,
                spawn,
            });
        }
        actions.push(acts);
    }
    dpn.labels = dpn
        .processes
        .iter()
        .map(|p| vec![BTreeSet::new(); p.controls.len()])
        .collect();
    for (line, c, props) in raw_labels {
        let (i, k) = dpn.find_control(&c).ok_or_else(|| ModelError::Parse {
            line,
            msg: format!("label for unknown control `{c}`"),
        })?;
        dpn.labels[i][k as usize].extend(props);
    }
    let diags = dpn.validate();
    if !diags.is_empty() {
        return Err(ModelError::Invalid(diags));
    }
    Ok(LDpn {
        dpn,
        locks,
        actions,
    })
}

/// Parse a model without lock actions.
pub fn parse_dpn(src: &str) -> Result<Dpn, ModelError> {
    let m = parse_model(src)?;
    if m.actions.iter().flatten().any(|a| *a != Action::Tau) {
        return Err(ModelError::HasLocks);
    }
    Ok(m.dpn)
}

fn write_block(out: &mut String, kw: &str, names: impl IntoIterator<Item = impl fmt::Display>) {
    let _ = write!(out, "{kw} {{");
    for n in names {
        let _ = write!(out, " {n};");
    }
    out.push_str(" }\n");
}

/// Print in the model format; `actions` may be empty for plain networks.
pub fn print_model(dpn: &Dpn, locks: &[String], actions: &[Vec<Action>]) -> String {
    let mut out = String::new();
    write_block(&mut out, "ap", &dpn.ap);
    if !locks.is_empty() {
        write_block(&mut out, "locks", locks);
    }
    for (i, p) in dpn.processes.iter().enumerate() {
        let _ = writeln!(out, "process {} {{", p.name);
        let _ = writeln!(out, "  controls {};", p.controls.join(" "));
        let _ = writeln!(out, "  symbols {};", p.symbols.join(" "));
        for (k, r) in p.rules.iter().enumerate() {
            let c = |x: u32| p.controls[x as usize].as_str();
            let _ = write!(
                out,
                "  rule {} {} -> {}",
                c(r.from),
                p.symbols[r.top as usize],
                c(r.to)
            );
            for &g in &r.push {
                let _ = write!(out, " {}", p.symbols[g as usize]);
            }
            let _ = write!(out, " [{}]", r.tag);
            match actions.get(i).and_then(|a| a.get(k)) {
                Some(Action::Acq(l)) => {
                    let _ = write!(out, " [acq {}]", locks[*l]);
                }
                Some(Action::Rel(l)) => {
                    let _ = write!(out, " [rel {}]", locks[*l]);
                }
                _ => {}
            }
            if let Some(sp) = &r.spawn {
                let t = &dpn.processes[sp.process];
                let _ = write!(out, " spawn {} {}", t.name, t.controls[sp.control as usize]);
                for &g in &sp.word {
                    let _ = write!(out, " {}", t.symbols[g as usize]);
                }
            }
            out.push_str(";\n");
        }
        out.push_str("}\n");
    }
    let labelled: Vec<String> = dpn
        .processes
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            p.controls.iter().enumerate().filter_map(move |(c, name)| {
                let l = &dpn.labels[i][c];
                (!l.is_empty()).then(|| {
                    format!(
                        "{name}: {{{}}}",
                        l.iter().cloned().collect::<Vec<_>>().join(", ")
                    )
                })
            })
        })
        .collect();
    if !labelled.is_empty() {
        write_block(&mut out, "labels", labelled);
    }
    out
}

impl fmt::Display for Dpn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_model(self, &[], &[]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
        ap { a; }
        process P { controls p q; rule p x -> q y x [call]; rule q y -> p [ret] spawn Q r z; }
        process Q { controls r; rule r z -> r z [int]; }
        labels { p: {a}; }
    ";

    #[test]
    fn parses_and_round_trips() {
        let m = parse_dpn(SMALL).unwrap();
        assert_eq!(m.processes[0].rules.len(), 2);
        assert_eq!(m.processes[1].symbols, vec!["z".to_string()]);
        assert_eq!(parse_dpn(&m.to_string()).unwrap(), m);
    }

    #[test]
    fn arity_diagnostic() {
        let e = parse_dpn("process P { controls p; rule p x -> p x [call]; }").unwrap_err();
        assert!(
            matches!(&e, ModelError::Invalid(d) if matches!(d[0], Diagnostic::Arity { len: 1, .. })),
            "{e}"
        );
    }

    #[test]
    fn empty_network() {
        assert_eq!(
            parse_dpn("").unwrap_err(),
            ModelError::Invalid(vec![Diagnostic::NoProcesses])
        );
    }

    #[test]
    fn unknown_spawn_process() {
        let e =
            parse_dpn("process P { controls p; rule p x -> p x [int] spawn R p x; }").unwrap_err();
        assert!(matches!(e, ModelError::Parse { line: 1, .. }));
    }

    #[test]
    fn overlapping_controls() {
        let e = parse_dpn("process P { controls p; } process Q { controls p; }").unwrap_err();
        assert!(
            matches!(&e, ModelError::Invalid(d) if d.contains(&Diagnostic::OverlappingControl("p".into())))
        );
    }

    #[test]
    fn lock_actions() {
        let src = "locks { l; } process P { controls p; rule p x -> p x [int] [acq l]; rule p x -> p [ret] [rel l]; }";
        let m = parse_model(src).unwrap();
        assert_eq!(m.actions[0], vec![Action::Acq(0), Action::Rel(0)]);
        assert_eq!(parse_dpn(src).unwrap_err(), ModelError::HasLocks);
        assert_eq!(parse_model(&m.to_string()).unwrap(), m);
    }
}
