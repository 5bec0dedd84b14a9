//! Fused execution of optimized plans.

mod aggregate;
mod binner;
mod cell;
mod compile;
mod context;
mod cursor;
mod rows;

use thiserror::Error;

pub use aggregate::{AggregateState, GroupTable};
pub use binner::BinBounds;
pub use cell::{compare, order, Cell, Reg};
pub use compile::{compile, compile_with_debug, stderr_sink, DebugSink};
pub use context::{ContextValue, OutputSlot, QueryContext, VarId, VarValue};
pub use cursor::{CompiledQuery, ResultCursor};
pub use rows::{InSet, RowBuffer};

use crate::planner::QueryPlan;
use crate::storage::{Catalog, StorageError};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("column {table}.{column} has no index")]
    MissingIndex { table: String, column: String },
    #[error("cannot combine {left} state with {right} state")]
    AggregateMismatch {
        left: &'static str,
        right: &'static str,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

/// Compiles and runs `plan`, collecting every row.
pub fn execute(plan: &QueryPlan, catalog: &Catalog, lanes: usize) -> Result<Vec<Vec<Value>>> {
    ResultCursor::new(compile(plan, catalog, lanes)?).collect_rows()
}
