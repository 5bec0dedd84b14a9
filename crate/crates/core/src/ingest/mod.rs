//! Building tables from delimited text and merging tables by key.

mod export;
mod import;
mod merge;
mod schema_text;

use std::path::PathBuf;

use thiserror::Error;

use crate::storage::StorageError;
use crate::value::ColumnType;

pub use export::export_delimited;
pub use import::{import_delimited, parse_field, ImportOptions};
pub use merge::merge_tables;
pub use schema_text::parse_snelschema;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema line {line}: unknown type {ty}")]
    UnknownType { line: usize, ty: String },
    #[error("schema line {line}: duplicate column {name}")]
    DuplicateColumn { line: usize, name: String },
    #[error("schema line {line}: {message}")]
    SchemaSyntax { line: usize, message: String },
    #[error("separator must be a single character other than a newline")]
    InvalidSeparator,
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount {
        row: u64,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: cannot parse {value:?} as {ty} for column {column}")]
    BadValue {
        row: u64,
        column: String,
        value: String,
        ty: ColumnType,
    },
    #[error("row {row}: NULL in non-nullable column {column}")]
    NullNotAllowed { row: u64, column: String },
    #[error("row {row}: value of column {column} cannot be written as delimited text")]
    Unexportable { row: u64, column: String },
    #[error("table {table} has no column {column}")]
    MissingKey { table: String, column: String },
    #[error("column {column} is {source_ty} in the source but {dest_ty} in the destination")]
    TypeConflict {
        column: String,
        source_ty: ColumnType,
        dest_ty: ColumnType,
    },
    #[error("key {key} appears more than once in the source")]
    DuplicateKey { key: String },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Storage(#[from] StorageError),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;
