use std::io::BufRead;
use std::path::{Path, PathBuf};

use super::{IngestError, Result};
use crate::storage::{
    load_table, Column, ColumnDescriptor, FixedColumnWriter, Index, SchemaDescriptor, StorageError,
    Table, TablePaths, TextColumnWriter,
};
use crate::value::{ColumnType, Value};

#[derive(Debug, Clone)]
pub struct ImportOptions {
    pub separator: char,
    /// Rows buffered per column before writing to disk.
    pub buffer_rows: usize,
    /// Abort on malformed values instead of storing NULL (or zero when not nullable).
    pub safe: bool,
    pub null_repr: String,
    pub verbose: bool,
}

impl Default for ImportOptions {
    fn default() -> Self {
        Self {
            separator: '|',
            buffer_rows: 100_000,
            safe: false,
            null_repr: String::new(),
            verbose: false,
        }
    }
}

/// Strict parse of one field. BOOL accepts only `0` and `1`; floats must be finite.
pub fn parse_field(text: &str, ty: ColumnType) -> Option<Value> {
    match ty {
        ColumnType::String => (!text.contains('\0')).then(|| Value::Str(text.to_string())),
        ColumnType::Bool => match text.trim() {
            "0" => Some(Value::Bool(false)),
            "1" => Some(Value::Bool(true)),
            _ => None,
        },
        ColumnType::Float32 => text
            .trim()
            .parse::<f32>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Value::Float32),
        _ => Value::Int64(text.trim().parse().ok()?).coerce_to(ty),
    }
}

fn fallback(text: &str, col: &ColumnDescriptor) -> Value {
    if col.nullable {
        return Value::Null;
    }
    match col.ty {
        ColumnType::String => Value::Str(text.replace('\0', "")),
        ColumnType::Float32 => Value::Float32(0.0),
        ty => Value::Int64(0).coerce_to(ty).unwrap_or(Value::Null),
    }
}

enum Writer {
    Fixed(FixedColumnWriter),
    Text(TextColumnWriter),
}

impl Writer {
    fn push(&mut self, v: &Value) -> std::result::Result<(), StorageError> {
        match self {
            Writer::Fixed(w) => w.push(v),
            Writer::Text(w) => w.push_value(v),
        }
    }

    fn flush(&mut self) -> std::result::Result<(), StorageError> {
        match self {
            Writer::Fixed(w) => w.flush(),
            Writer::Text(w) => w.flush(),
        }
    }

    fn finish(self) -> std::result::Result<u64, StorageError> {
        match self {
            Writer::Fixed(w) => w.finish(),
            Writer::Text(w) => w.finish(),
        }
    }
}

/// Creates table `schema.table_name` in `out_dir` from separator-delimited lines.
///
/// A field equal to `null_repr` is NULL. Rows are numbered from 1 in errors.
pub fn import_delimited<R: BufRead>(
    mut input: R,
    schema: &SchemaDescriptor,
    opts: &ImportOptions,
    out_dir: &Path,
) -> Result<Table> {
    if opts.separator == '\n' || opts.separator == '\r' {
        return Err(IngestError::InvalidSeparator);
    }
    let paths = TablePaths::new(out_dir, schema.table_name.clone());
    schema
        .validate()
        .map_err(|message| StorageError::MalformedSchema {
            path: paths.schema(),
            message,
        })?;
    std::fs::create_dir_all(out_dir).map_err(|source| IngestError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut writers = schema
        .columns
        .iter()
        .map(|c| {
            let path = paths.column(&c.name);
            Ok(if c.ty == ColumnType::String {
                Writer::Text(TextColumnWriter::create(&path, c.nullable)?)
            } else {
                Writer::Fixed(FixedColumnWriter::create(&path, c.ty, c.nullable)?)
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let buffer_rows = opts.buffer_rows.max(1) as u64;
    let mut line = String::new();
    let mut row = 0u64;
    loop {
        line.clear();
        let n = input
            .read_line(&mut line)
            .map_err(|source| IngestError::Io {
                path: PathBuf::from("<input>"),
                source,
            })?;
        if n == 0 {
            break;
        }
        row += 1;
        let text = line.strip_suffix('\n').unwrap_or(&line);
        let text = text.strip_suffix('\r').unwrap_or(text);
        let fields: Vec<&str> = text.split(opts.separator).collect();
        if fields.len() != schema.columns.len() {
            return Err(IngestError::FieldCount {
                row,
                expected: schema.columns.len(),
                found: fields.len(),
            });
        }
        for ((field, col), w) in fields.iter().zip(&schema.columns).zip(&mut writers) {
            let value = if *field == opts.null_repr {
                if !col.nullable {
                    return Err(IngestError::NullNotAllowed {
                        row,
                        column: col.name.clone(),
                    });
                }
                Value::Null
            } else {
                match parse_field(field, col.ty) {
                    Some(v) => v,
                    None if opts.safe => {
                        return Err(IngestError::BadValue {
                            row,
                            column: col.name.clone(),
                            value: field.to_string(),
                            ty: col.ty,
                        })
                    }
                    None => fallback(field, col),
                }
            };
            w.push(&value)?;
        }
        if row.is_multiple_of(buffer_rows) {
            for w in &mut writers {
                w.flush()?;
            }
            if opts.verbose {
                eprintln!("{}: {row} rows", schema.table_name);
            }
        }
    }
    for w in writers {
        w.finish()?;
    }
    for c in schema.columns.iter().filter(|c| c.indexed) {
        let col = Column::open(&paths.column(&c.name), c, row)?;
        Index::build(&col).write(&paths.index(&c.name))?;
    }
    let mut schema = schema.clone();
    schema.row_count = row;
    schema.write(&paths.schema())?;
    if opts.verbose {
        eprintln!("{}: imported {row} rows", schema.table_name);
    }
    Ok(load_table(&paths.schema())?)
}
