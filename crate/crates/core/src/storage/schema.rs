use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, Result, StorageError};
use crate::value::ColumnType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDescriptor {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
    #[serde(default)]
    pub nullable: bool,
    #[serde(default)]
    pub indexed: bool,
}

impl ColumnDescriptor {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Self {
            name: name.into(),
            ty,
            nullable: false,
            indexed: false,
        }
    }

    pub fn nullable(mut self) -> Self {
        self.nullable = true;
        self
    }

    pub fn indexed(mut self) -> Self {
        self.indexed = true;
        self
    }
}

/// Contents of `<table>.snel`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    #[serde(rename = "table")]
    pub table_name: String,
    #[serde(rename = "rows")]
    pub row_count: u64,
    pub columns: Vec<ColumnDescriptor>,
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl SchemaDescriptor {
    pub fn new(table_name: impl Into<String>, columns: Vec<ColumnDescriptor>) -> Self {
        Self {
            table_name: table_name.into(),
            row_count: 0,
            columns,
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDescriptor> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Checks naming rules; the message describes the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !is_identifier(&self.table_name) {
            return Err(format!("invalid table name {:?}", self.table_name));
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !is_identifier(&c.name) {
                return Err(format!("invalid column name {:?}", c.name));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(format!("duplicate column {:?}", c.name));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let schema: SchemaDescriptor =
            serde_json::from_str(&text).map_err(|e| StorageError::MalformedSchema {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        schema
            .validate()
            .map_err(|message| StorageError::MalformedSchema {
                path: path.to_path_buf(),
                message,
            })?;
        Ok(schema)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("schema serializes");
        text.push('\n');
        super::write_atomic(path, text.as_bytes())
    }
}
