//! SQL text to resolved [`Query`].

pub mod ast;
pub mod lexer;
mod lower;
mod parser;
pub mod query;

use thiserror::Error;

pub use ast::{Select, Statement};
pub use lower::{can_optimize_select, lower_to_query};
pub use parser::{parse, parse_statement};
pub use query::{
    AggFunc, BinFunc, CmpOp, ColumnRef, Constraint, Expr, Field, Operand, OrderKey, Query,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("syntax error at line {line}, column {column}: unexpected {found}{}", expected_list(.expected))]
    Syntax {
        line: u32,
        column: u32,
        found: String,
        expected: Vec<String>,
    },
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("ambiguous column {0}")]
    Ambiguous(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("grouping error: {0}")]
    AggregateGrouping(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid bin: {0}")]
    InvalidBin(String),
    #[error("invalid LIMIT/OFFSET value {0}")]
    InvalidLimit(String),
    #[error("ORDER BY {0} is not in the select list or GROUP BY")]
    OrderByNotSelected(String),
    #[error("table {0} listed twice in FROM")]
    DuplicateTable(String),
    #[error("IN subquery must return one column, got {0}")]
    SubqueryArity(usize),
}

fn expected_list(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(", expected {}", expected.join(" or "))
    }
}

/// Parses and lowers in one step.
pub fn compile_sql(sql: &str, catalog: &crate::storage::Catalog) -> Result<Query, FrontendError> {
    lower_to_query(&parse(sql)?, catalog)
}
