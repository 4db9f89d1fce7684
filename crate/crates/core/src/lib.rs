pub mod caret;
pub mod dpn;
pub mod engine;
pub mod oracle;
pub mod product;
pub mod reductions;
pub mod testing;
