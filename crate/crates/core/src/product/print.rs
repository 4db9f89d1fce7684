use std::fmt::Write;

use super::{Gbdpn, Label, ProdSym, RuleClass};
use crate::caret::Tag;
use crate::dpn::{print_model, Dpds, Dpn, Rule, Spawn};

fn label_letter(l: Label) -> char {
    match l {
        Label::Exit => 'x',
        Label::Unexit => 'u',
        Label::Popped => 'r',
    }
}

/// The product as a plain network. Controls are named `p.<atom>.<x|u|r>`,
/// annotated symbols `g.<atom>.<x|u>`; labels are those of the base control.
pub fn product_dpn(dpn: &Dpn, g: &Gbdpn) -> Dpn {
    let mut out = Dpn {
        ap: dpn.ap.clone(),
        processes: Vec::new(),
        labels: Vec::new(),
    };
    for m in &g.members {
        let base = &dpn.processes[m.process];
        let controls = m
            .controls
            .iter()
            .map(|c| {
                format!(
                    "{}.{}.{}",
                    base.controls[c.base as usize],
                    c.atom,
                    label_letter(c.label)
                )
            })
            .collect();
        let symbols = (0..m.n_symbols())
            .map(|s| match m.sym(s) {
                ProdSym::Plain(x) => base.symbols[x as usize].clone(),
                ProdSym::Annot(x, a, l) => {
                    format!("{}.{}.{}", base.symbols[x as usize], a, label_letter(l))
                }
            })
            .collect();
        let rules = m
            .rules
            .iter()
            .map(|r| Rule {
                from: r.from as u32,
                top: r.top as u32,
                tag: match r.class {
                    RuleClass::Call => Tag::Call,
                    RuleClass::Ret | RuleClass::TopRet => Tag::Ret,
                    _ => Tag::Int,
                },
                to: r.to as u32,
                push: r.push.iter().map(|&s| s as u32).collect(),
                spawn: r.spawn.as_ref().map(|sp| Spawn {
                    process: sp.process,
                    control: sp.control as u32,
                    word: sp.word.iter().map(|&s| s as u32).collect(),
                }),
            })
            .collect();
        out.labels.push(
            m.controls
                .iter()
                .map(|c| dpn.label(m.process, c.base).clone())
                .collect(),
        );
        out.processes.push(Dpds {
            name: base.name.clone(),
            controls,
            symbols,
            rules,
        });
    }
    out
}

/// Model text of [`product_dpn`] followed by one `# accept` comment line per acceptance set.
pub fn print_product(dpn: &Dpn, g: &Gbdpn) -> String {
    let p = product_dpn(dpn, g);
    let mut out = print_model(&p, &[], &[]);
    for (m, proc) in g.members.iter().zip(&p.processes) {
        for (j, set) in m.acceptance.iter().enumerate() {
            let names: Vec<&str> = set.iter().map(|&c| proc.controls[c].as_str()).collect();
            let _ = writeln!(
                out,
                "# accept {} F{}: {}",
                proc.name,
                j + 1,
                names.join(" ")
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caret::parse_formula;
    use crate::dpn::parse_dpn;
    use crate::product::build_product;

    #[test]
    fn printed_product_parses_back() {
        let dpn = parse_dpn(
            "ap { a } process P { controls p q; rule p x -> q y x [call]; rule q y -> p [ret]; rule p x -> p x [int]; } labels { p: {a}; }",
        )
        .unwrap();
        let f = parse_formula("a Ug !a", &dpn.ap).unwrap();
        let g = build_product(&dpn, &[f]).unwrap();
        let text = print_product(&dpn, &g);
        let back = parse_dpn(&text).unwrap();
        let direct = product_dpn(&dpn, &g);
        assert_eq!(
            back.processes[0].rules.len(),
            direct.processes[0].rules.len()
        );
        assert_eq!(back.processes[0].controls, direct.processes[0].controls);
        assert!(text.contains("# accept P F1:"));
    }
}
