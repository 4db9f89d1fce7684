//! Dynamic pushdown networks: model, text format, semantics and flow-graph front end.

mod flowgraph;
mod model;
mod text;

pub use flowgraph::{
    flowgraph_to_dpn, parse_flowgraph, Edge, EdgeKind, FlowGraphSystem, Procedure,
};
pub use model::{Diagnostic, Dpds, Dpn, GlobalConfig, LocalConfig, Rule, Spawn, Step, Stuttered};
pub(crate) use text::Cursor;
pub use text::{parse_dpn, parse_model, print_model, ModelError};
