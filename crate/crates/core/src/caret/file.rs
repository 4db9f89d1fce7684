use std::collections::BTreeSet;

use thiserror::Error;

use super::formula::{parse_formula, Formula, FormulaError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaFileError {
    #[error("line {line}: {err}")]
    Formula { line: usize, err: FormulaError },
    #[error("line {line}: unknown process `{name}`")]
    UnknownProcess { line: usize, name: String },
    #[error("line {line}: second formula for `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("no formula for process `{0}`")]
    Missing(String),
}

/// One formula per process, from lines `Proc: f`, `default: f` or a bare `f`
/// (same as `default`). `#` starts a comment.
pub fn parse_formula_file(
    src: &str,
    processes: &[String],
    ap: &BTreeSet<String>,
) -> Result<Vec<Formula>, FormulaFileError> {
    let mut per: Vec<Option<Formula>> = vec![None; processes.len()];
    let mut default: Option<Formula> = None;
    for (ln, raw) in src.lines().enumerate() {
        let line = ln + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let (target, body) = match text.split_once(':') {
            Some((name, body)) if is_name(name.trim()) => (Some(name.trim()), body),
            _ => (None, text),
        };
        let f = parse_formula(body, ap).map_err(|err| FormulaFileError::Formula { line, err })?;
        let slot = match target {
            None | Some("default") => &mut default,
            Some(name) => {
                let i = processes.iter().position(|p| p == name).ok_or_else(|| {
                    FormulaFileError::UnknownProcess {
                        line,
                        name: name.to_string(),
                    }
                })?;
                &mut per[i]
            }
        };
        if slot.is_some() {
            return Err(FormulaFileError::Duplicate {
                line,
                name: target.unwrap_or("default").to_string(),
            });
        }
        *slot = Some(f);
    }
    per.into_iter()
        .zip(processes)
        .map(|(f, p)| {
            f.or_else(|| default.clone())
                .ok_or_else(|| FormulaFileError::Missing(p.clone()))
        })
        .collect()
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || "_'.".contains(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_process_and_default() {
        let ps = vec!["P1".to_string(), "P2".to_string()];
        let ap = ["a".to_string()].into();
        let fs = parse_formula_file("# c\nP1: false\ndefault: Gg a\n", &ps, &ap).unwrap();
        assert_eq!(fs[0], Formula::False.desugar());
        assert_eq!(fs[1], parse_formula("Gg a", &ap).unwrap());
        assert_eq!(
            parse_formula_file("P1: a", &ps, &ap),
            Err(FormulaFileError::Missing("P2".into()))
        );
        assert!(matches!(
            parse_formula_file("P9: a", &ps, &ap),
            Err(FormulaFileError::UnknownProcess { .. })
        ));
        assert!(matches!(
            parse_formula_file("a\ntrue", &ps, &ap),
            Err(FormulaFileError::Duplicate { .. })
        ));
    }
}
