use std::collections::HashMap;

use super::{IngestError, Result};
use crate::storage::{write_table, ColumnDescriptor, RowId, StorageError, Table};
use crate::value::Value;

fn key_of(v: Value) -> Option<Value> {
    match v {
        Value::Null => None,
        Value::Str(_) | Value::Float32(_) => Some(v),
        other => other.as_i64().map(Value::Int64),
    }
}

fn column_values(table: &Table, name: &str) -> Result<Vec<Value>> {
    let col = table.column(name)?;
    Ok((0..table.row_count())
        .map(|r| col.value(RowId(r)))
        .collect::<Result<_, _>>()?)
}

/// Updates `dest` on disk with the rows of `source` whose `key` matches.
///
/// Columns only in `source` are added to `dest` as nullable. Source rows without
/// a matching dest row are ignored. Returns the reloaded dest table.
pub fn merge_tables(source: &Table, dest: &Table, key: &str) -> Result<Table> {
    let missing = |t: &Table| IngestError::MissingKey {
        table: t.name().to_string(),
        column: key.to_string(),
    };
    let src_key = source.descriptor(key).ok_or_else(|| missing(source))?;
    let dst_key = dest.descriptor(key).ok_or_else(|| missing(dest))?;
    let key_types_match =
        src_key.ty == dst_key.ty || src_key.ty.is_integer() && dst_key.ty.is_integer();
    if !key_types_match {
        return Err(IngestError::TypeConflict {
            column: key.to_string(),
            source_ty: src_key.ty,
            dest_ty: dst_key.ty,
        });
    }
    let paths = dest
        .paths()
        .ok_or_else(|| StorageError::NoData(dest.name().to_string()))?
        .clone();

    let mut schema = dest.schema().clone();
    let mut updates = Vec::new();
    for d in &source.schema().columns {
        if d.name == key {
            continue;
        }
        match schema.column_position(&d.name) {
            Some(pos) => {
                let existing = &schema.columns[pos];
                if existing.ty != d.ty {
                    return Err(IngestError::TypeConflict {
                        column: d.name.clone(),
                        source_ty: d.ty,
                        dest_ty: existing.ty,
                    });
                }
                updates.push((pos, d.name.clone()));
            }
            None => {
                let mut added = ColumnDescriptor::new(d.name.clone(), d.ty).nullable();
                added.indexed = d.indexed;
                updates.push((schema.columns.len(), d.name.clone()));
                schema.columns.push(added);
            }
        }
    }

    let mut by_key = HashMap::new();
    for (row, v) in column_values(source, key)?.into_iter().enumerate() {
        let Some(k) = key_of(v) else { continue };
        if by_key.insert(k.clone(), row).is_some() {
            return Err(IngestError::DuplicateKey { key: k.to_string() });
        }
    }
    let matches: Vec<Option<usize>> = column_values(dest, key)?
        .into_iter()
        .map(|v| key_of(v).and_then(|k| by_key.get(&k).copied()))
        .collect();

    let rows = dest.row_count() as usize;
    let mut columns = Vec::with_capacity(schema.columns.len());
    for d in &dest.schema().columns {
        columns.push(column_values(dest, &d.name)?);
    }
    columns.resize(schema.columns.len(), vec![Value::Null; rows]);
    for (pos, name) in &updates {
        let src = source.column(name)?;
        let nullable = schema.columns[*pos].nullable;
        for (row, m) in matches.iter().enumerate() {
            let Some(s) = m else { continue };
            let v = src.value(RowId(*s as u64))?;
            if v.is_null() && !nullable {
                return Err(IngestError::NullNotAllowed {
                    row: *s as u64 + 1,
                    column: name.clone(),
                });
            }
            columns[*pos][row] = v;
        }
    }
    Ok(write_table(&paths.dir, &schema, &columns)?)
}
