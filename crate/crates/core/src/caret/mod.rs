//! CARET formulas: syntax, closure, atoms and direct evaluation on lasso words.

mod atoms;
mod file;
mod formula;
mod word;

pub use atoms::{atoms, closure, Atom, AtomTable, ClosureSet};
pub use file::{parse_formula_file, FormulaFileError};
pub use formula::{parse_formula, parse_surface, Formula, FormulaError, Kind, Tag};
pub use word::{eval_structured_word, StructuredWord, TraceLetter, WordError};
