//! SQL in, rows out: the glue between frontend, planner, optimizer and engine.

use std::path::Path;

use crate::engine::{self, EngineError, ResultCursor};
use crate::frontend::{lower_to_query, parse_statement, FrontendError, Statement};
use crate::ingest::IngestError;
use crate::optimizer::{optimize, PassReport};
use crate::planner::{build_plan, explain, to_dot, QueryPlan};
use crate::storage::{load_table, Catalog, StorageError, Table};
use crate::value::{ColumnType, Value};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("cannot write queryplan.dot: {0}")]
    DumpPlan(std::io::Error),
}

impl Error {
    /// Whether the failure is a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::Engine(EngineError::Internal(_) | EngineError::AggregateMismatch { .. })
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A fully materialized result.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub types: Vec<ColumnType>,
    pub rows: Vec<Vec<Value>>,
}

/// What a statement produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Rows(QueryResult),
    Explain(String),
}

/// A set of read-only tables queried with SQL.
pub struct Database {
    catalog: Catalog,
    max_lanes: usize,
    dump_plan: bool,
}

fn default_lanes() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Default for Database {
    fn default() -> Self {
        Self::new(Catalog::new())
    }
}

impl Database {
    /// Lanes default to the machine's parallelism; `SNEL_DUMP_PLAN=1` enables plan dumps.
    pub fn new(catalog: Catalog) -> Self {
        Self {
            catalog,
            max_lanes: default_lanes(),
            dump_plan: std::env::var("SNEL_DUMP_PLAN").is_ok_and(|v| v == "1"),
        }
    }

    /// Opens the tables described by the given `.snel` files.
    pub fn open<P: AsRef<Path>>(schemas: &[P]) -> Result<Self> {
        let mut catalog = Catalog::new();
        for p in schemas {
            catalog.insert(load_table(p.as_ref())?);
        }
        Ok(Self::new(catalog))
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn add_table(&mut self, table: Table) {
        self.catalog.insert(table);
    }

    pub fn max_lanes(&self) -> usize {
        self.max_lanes
    }

    /// Caps parallel lanes; 1 turns parallel aggregation off.
    pub fn set_max_lanes(&mut self, lanes: usize) {
        self.max_lanes = lanes.max(1);
    }

    pub fn set_dump_plan(&mut self, on: bool) {
        self.dump_plan = on;
    }

    /// Parses, lowers, plans and optimizes a SELECT.
    pub fn plan(&self, sql: &str) -> Result<(QueryPlan, PassReport)> {
        let select = match parse_statement(sql)? {
            Statement::Select(s) | Statement::Explain(s) => s,
        };
        self.plan_select(&select)
    }

    fn plan_select(&self, select: &crate::frontend::Select) -> Result<(QueryPlan, PassReport)> {
        let query = lower_to_query(select, &self.catalog)?;
        let naive = build_plan(&query, &self.catalog);
        let (plan, report) = optimize(naive, &self.catalog, self.max_lanes);
        if self.dump_plan {
            std::fs::write("queryplan.dot", to_dot(&plan)).map_err(Error::DumpPlan)?;
        }
        Ok((plan, report))
    }

    pub fn explain(&self, sql: &str) -> Result<String> {
        Ok(explain(&self.plan(sql)?.0))
    }

    /// Compiles an optimized plan into a cursor.
    pub fn prepare<'a>(&'a self, plan: &'a QueryPlan) -> Result<ResultCursor<'a>> {
        Ok(ResultCursor::new(engine::compile(
            plan,
            &self.catalog,
            self.max_lanes,
        )?))
    }

    pub fn run_plan(&self, plan: &QueryPlan) -> Result<QueryResult> {
        let mut cursor = self.prepare(plan)?;
        let columns = cursor
            .column_names()
            .iter()
            .map(|s| s.to_string())
            .collect();
        let types = cursor.column_types();
        let rows = cursor.collect_rows()?;
        Ok(QueryResult {
            columns,
            types,
            rows,
        })
    }

    /// Runs a SELECT and collects its rows.
    pub fn query(&self, sql: &str) -> Result<QueryResult> {
        let (plan, _) = self.plan(sql)?;
        self.run_plan(&plan)
    }

    /// Runs a SELECT or an `EXPLAIN [QUERY PLAN] SELECT`.
    pub fn execute(&self, sql: &str) -> Result<Output> {
        match parse_statement(sql)? {
            Statement::Select(s) => {
                let (plan, _) = self.plan_select(&s)?;
                Ok(Output::Rows(self.run_plan(&plan)?))
            }
            Statement::Explain(s) => Ok(Output::Explain(explain(&self.plan_select(&s)?.0))),
        }
    }
}
