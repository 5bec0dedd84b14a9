use std::io::Write;
use std::path::PathBuf;

use super::{IngestError, Result};
use crate::storage::{RowId, Table};
use crate::value::Value;

/// Writes every row of `table` as one line of `separator`-joined fields, NULL as `null_repr`.
///
/// Fails rather than write text that would not import back to the same values.
pub fn export_delimited<W: Write>(
    table: &Table,
    mut out: W,
    separator: char,
    null_repr: &str,
) -> Result<()> {
    if separator == '\n' || separator == '\r' {
        return Err(IngestError::InvalidSeparator);
    }
    let columns = table
        .schema()
        .columns
        .iter()
        .map(|d| table.column(&d.name))
        .collect::<Result<Vec<_>, _>>()?;
    let io_err = |source| IngestError::Io {
        path: PathBuf::from("<output>"),
        source,
    };
    let mut line = String::new();
    for row in 0..table.row_count() {
        line.clear();
        for (i, col) in columns.iter().enumerate() {
            if i > 0 {
                line.push(separator);
            }
            let value = col.value(RowId(row))?;
            if value.is_null() {
                line.push_str(null_repr);
                continue;
            }
            let text = value.to_string();
            let clashes = text == null_repr
                || matches!(value, Value::Str(_))
                    && (text.contains(separator) || text.contains(['\n', '\r']));
            if clashes {
                return Err(IngestError::Unexportable {
                    row: row + 1,
                    column: col.name().to_string(),
                });
            }
            line.push_str(&text);
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
