use std::collections::HashSet;

use super::{IngestError, Result};
use crate::storage::{is_identifier, ColumnDescriptor, SchemaDescriptor};
use crate::value::ColumnType;

fn type_alias(word: &str) -> Option<ColumnType> {
    Some(match word.to_ascii_uppercase().as_str() {
        "BOOLEAN" | "BOOL" | "BIT" => ColumnType::Bool,
        "INT8" | "CHAR" => ColumnType::Int8,
        "INT16" | "SHORT" => ColumnType::Int16,
        "INT32" | "INT" => ColumnType::Int32,
        "INT64" | "LONG" => ColumnType::Int64,
        "FLOAT" => ColumnType::Float32,
        "STRING" | "TEXT" => ColumnType::String,
        _ => return None,
    })
}

/// Parses `.snelschema` text: comma-separated `<name> <type> [NULLABLE] [INDEXED]`
/// entries. The table name is left empty for the caller to fill in.
pub fn parse_snelschema(text: &str) -> Result<SchemaDescriptor> {
    let mut columns = Vec::new();
    let mut seen = HashSet::new();
    let mut line = 1;
    for entry in text.split(',') {
        let lead = &entry[..entry.len() - entry.trim_start().len()];
        let start_line = line + lead.matches('\n').count();
        line += entry.matches('\n').count();
        let words: Vec<&str> = entry.split_whitespace().collect();
        let Some((&name, rest)) = words.split_first() else {
            continue;
        };
        let syntax = |message: String| IngestError::SchemaSyntax {
            line: start_line,
            message,
        };
        if !is_identifier(name) {
            return Err(syntax(format!("invalid column name {name:?}")));
        }
        let Some((&ty_word, flags)) = rest.split_first() else {
            return Err(syntax(format!("column {name} has no type")));
        };
        let ty = type_alias(ty_word).ok_or_else(|| IngestError::UnknownType {
            line: start_line,
            ty: ty_word.to_string(),
        })?;
        let mut col = ColumnDescriptor::new(name, ty);
        for flag in flags {
            match flag.to_ascii_uppercase().as_str() {
                "NULLABLE" if !col.nullable => col.nullable = true,
                "INDEXED" if !col.indexed => col.indexed = true,
                _ => return Err(syntax(format!("unexpected {flag:?} after column {name}"))),
            }
        }
        if !seen.insert(name.to_string()) {
            return Err(IngestError::DuplicateColumn {
                line: start_line,
                name: name.to_string(),
            });
        }
        columns.push(col);
    }
    if columns.is_empty() {
        return Err(IngestError::SchemaSyntax {
            line: 1,
            message: "no columns".into(),
        });
    }
    Ok(SchemaDescriptor::new("", columns))
}
