use std::path::Path;

use super::{
    Column, ColumnDescriptor, FixedColumnWriter, Index, Result, RowId, SchemaDescriptor,
    StorageError, TablePaths, TextColumnWriter,
};
use crate::value::{ColumnType, Value};

#[derive(Debug)]
struct TableData {
    columns: Vec<Column>,
    indexes: Vec<Option<Index>>,
}

/// An open table. A table may carry only its schema (for planning) or its data as well.
#[derive(Debug)]
pub struct Table {
    schema: SchemaDescriptor,
    paths: Option<TablePaths>,
    data: Option<TableData>,
}

impl Table {
    /// A metadata-only table: usable for planning and EXPLAIN, not for execution.
    pub fn from_schema(schema: SchemaDescriptor) -> Self {
        Self {
            schema,
            paths: None,
            data: None,
        }
    }

    /// Builds an in-memory table; indexes are built for every indexed column.
    pub fn from_values(name: &str, columns: Vec<(ColumnDescriptor, Vec<Value>)>) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.1.len());
        let mut descriptors = Vec::new();
        let mut cols = Vec::new();
        for (d, values) in columns {
            if values.len() != rows {
                return Err(StorageError::Corrupt {
                    path: d.name.clone().into(),
                    message: format!("{} values, expected {rows}", values.len()),
                });
            }
            cols.push(Column::from_values(d.clone(), &values)?);
            descriptors.push(d);
        }
        let mut schema = SchemaDescriptor::new(name, descriptors);
        schema.row_count = rows as u64;
        schema
            .validate()
            .map_err(|message| StorageError::MalformedSchema {
                path: name.into(),
                message,
            })?;
        let indexes = cols
            .iter()
            .map(|c| c.descriptor.indexed.then(|| Index::build(c)))
            .collect();
        Ok(Self {
            schema,
            paths: None,
            data: Some(TableData {
                columns: cols,
                indexes,
            }),
        })
    }

    pub fn name(&self) -> &str {
        &self.schema.table_name
    }

    pub fn schema(&self) -> &SchemaDescriptor {
        &self.schema
    }

    pub fn row_count(&self) -> u64 {
        self.schema.row_count
    }

    pub fn paths(&self) -> Option<&TablePaths> {
        self.paths.as_ref()
    }

    pub fn has_data(&self) -> bool {
        self.data.is_some()
    }

    fn data(&self) -> Result<&TableData> {
        self.data
            .as_ref()
            .ok_or_else(|| StorageError::NoData(self.name().to_owned()))
    }

    pub fn descriptor(&self, column: &str) -> Option<&ColumnDescriptor> {
        self.schema.column(column)
    }

    pub fn column(&self, column: &str) -> Result<&Column> {
        let pos = self
            .schema
            .column_position(column)
            .ok_or_else(|| StorageError::UnknownColumn(column.to_owned()))?;
        Ok(&self.data()?.columns[pos])
    }

    pub fn index(&self, column: &str) -> Option<&Index> {
        let pos = self.schema.column_position(column)?;
        self.data.as_ref()?.indexes[pos].as_ref()
    }

    pub fn is_indexed(&self, column: &str) -> bool {
        self.descriptor(column).is_some_and(|d| d.indexed)
    }

    pub fn read_value(&self, column: &str, row: RowId) -> Result<Value> {
        if row.0 >= self.row_count() {
            return Err(StorageError::RowOutOfRange {
                row: row.0,
                rows: self.row_count(),
            });
        }
        self.column(column)?.value(row)
    }
}

/// Opens the table described by `<dir>/<table>.snel` with all its columns and indexes.
pub fn load_table(schema_path: &Path) -> Result<Table> {
    let schema = SchemaDescriptor::read(schema_path)?;
    let mut paths = TablePaths::from_schema_path(schema_path);
    paths.table = schema.table_name.clone();
    let rows = schema.row_count;
    let mut columns = Vec::with_capacity(schema.columns.len());
    let mut indexes = Vec::with_capacity(schema.columns.len());
    for d in &schema.columns {
        let col = Column::open(&paths.column(&d.name), d, rows)?;
        let index = if d.indexed {
            let ip = paths.index(&d.name);
            let index = Index::read(&ip, d.ty)?;
            index
                .validate(&col)
                .map_err(|message| StorageError::Corrupt { path: ip, message })?;
            Some(index)
        } else {
            None
        };
        columns.push(col);
        indexes.push(index);
    }
    Ok(Table {
        schema,
        paths: Some(paths),
        data: Some(TableData { columns, indexes }),
    })
}

/// Writes a whole table (columns, indexes, schema) into `dir` and reopens it.
/// `columns[i]` holds the values of `schema.columns[i]`.
pub fn write_table(dir: &Path, schema: &SchemaDescriptor, columns: &[Vec<Value>]) -> Result<Table> {
    let paths = TablePaths::new(dir, schema.table_name.clone());
    let rows = columns.first().map_or(0, Vec::len);
    assert_eq!(
        columns.len(),
        schema.columns.len(),
        "one value list per column"
    );
    for (d, values) in schema.columns.iter().zip(columns) {
        if values.len() != rows {
            return Err(StorageError::LengthMismatch {
                path: paths.column(&d.name),
                rows: rows as u64,
                expected: rows as u64,
                found: values.len() as u64,
            });
        }
        let path = paths.column(&d.name);
        if d.ty == ColumnType::String {
            let mut w = TextColumnWriter::create(&path, d.nullable)?;
            for v in values {
                w.push_value(v)?;
            }
            w.finish()?;
        } else {
            let mut w = FixedColumnWriter::create(&path, d.ty, d.nullable)?;
            for v in values {
                w.push(v)?;
            }
            w.finish()?;
        }
        if d.indexed {
            let col = Column::open(&path, d, rows as u64)?;
            Index::build(&col).write(&paths.index(&d.name))?;
        }
    }
    let mut schema = schema.clone();
    schema.row_count = rows as u64;
    schema
        .validate()
        .map_err(|message| StorageError::MalformedSchema {
            path: paths.schema(),
            message,
        })?;
    schema.write(&paths.schema())?;
    load_table(&paths.schema())
}

/// The set of tables visible to a query, in registration order.
#[derive(Debug, Default)]
pub struct Catalog {
    tables: Vec<Table>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a table, replacing any existing table of the same name.
    pub fn insert(&mut self, table: Table) {
        match self.tables.iter_mut().find(|t| t.name() == table.name()) {
            Some(slot) => *slot = table,
            None => self.tables.push(table),
        }
    }

    pub fn with(mut self, table: Table) -> Self {
        self.insert(table);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name() == name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.iter()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}
