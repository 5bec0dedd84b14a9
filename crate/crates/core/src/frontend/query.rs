//! Resolved query structure consumed by the planner.

use std::fmt;

use crate::storage::RangeOp;
use crate::value::{ColumnType, Value};

/// A column resolved against the catalog.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
    pub ty: ColumnType,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>, ty: ColumnType) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
            ty,
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Sum,
    Avg,
    Min,
    Max,
    Count,
    CountDistinct,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
            AggFunc::Count | AggFunc::CountDistinct => "COUNT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinFunc {
    Bin,
    BinMin,
    BinMax,
}

impl BinFunc {
    pub fn name(self) -> &'static str {
        match self {
            BinFunc::Bin => "BIN",
            BinFunc::BinMin => "BIN_MIN",
            BinFunc::BinMax => "BIN_MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Column(ColumnRef),
    Literal(Value),
    /// `arg` is `None` for `COUNT(*)`.
    Aggregate {
        func: AggFunc,
        arg: Option<ColumnRef>,
    },
    /// `BIN(c, n)` is the bin number of `c`; `BIN_MIN(c)` / `BIN_MAX(c)` are the
    /// bounds of that bin. `bins` is the bin count of the governing `BIN`.
    Bin {
        func: BinFunc,
        column: ColumnRef,
        bins: u32,
    },
}

impl Expr {
    pub fn ty(&self) -> ColumnType {
        match self {
            Expr::Column(c) => c.ty,
            Expr::Literal(v) => v.column_type().unwrap_or(ColumnType::Int64),
            Expr::Aggregate { func, arg } => match func {
                AggFunc::Count | AggFunc::CountDistinct => ColumnType::Int64,
                AggFunc::Avg => ColumnType::Float32,
                AggFunc::Sum => match arg.as_ref().map(|a| a.ty) {
                    Some(ColumnType::Float32) => ColumnType::Float32,
                    _ => ColumnType::Int64,
                },
                AggFunc::Min | AggFunc::Max => arg.as_ref().map_or(ColumnType::Int64, |a| a.ty),
            },
            Expr::Bin { func, .. } => match func {
                BinFunc::Bin => ColumnType::Int64,
                _ => ColumnType::Float32,
            },
        }
    }

    pub fn is_aggregate(&self) -> bool {
        matches!(self, Expr::Aggregate { .. })
    }

    pub fn is_bin(&self) -> bool {
        matches!(self, Expr::Bin { .. })
    }

    /// Columns read by the expression.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        match self {
            Expr::Column(c) | Expr::Bin { column: c, .. } => vec![c],
            Expr::Aggregate { arg: Some(c), .. } => vec![c],
            _ => vec![],
        }
    }

    pub fn bin_governor(&self) -> Option<Expr> {
        match self {
            Expr::Bin { column, bins, .. } => Some(Expr::Bin {
                func: BinFunc::Bin,
                column: column.clone(),
                bins: *bins,
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(c) => write!(f, "{c}"),
            Expr::Literal(v) => f.write_str(&v.to_sql()),
            Expr::Aggregate { func, arg: None } => write!(f, "{}(*)", func.name()),
            Expr::Aggregate {
                func: AggFunc::CountDistinct,
                arg: Some(a),
            } => write!(f, "COUNT(DISTINCT {a})"),
            Expr::Aggregate { func, arg: Some(a) } => write!(f, "{}({a})", func.name()),
            Expr::Bin {
                func: BinFunc::Bin,
                column,
                bins,
            } => write!(f, "BIN({column}, {bins})"),
            Expr::Bin { func, column, .. } => write!(f, "{}({column})", func.name()),
        }
    }
}

/// A named output column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Field {
    pub expr: Expr,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator with its operands swapped: `a < b` iff `b > a`.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            o => o,
        }
    }

    pub fn range_op(self) -> Option<RangeOp> {
        Some(match self {
            CmpOp::Eq => RangeOp::Eq,
            CmpOp::Lt => RangeOp::Lt,
            CmpOp::Le => RangeOp::Le,
            CmpOp::Gt => RangeOp::Gt,
            CmpOp::Ge => RangeOp::Ge,
            CmpOp::Ne => return None,
        })
    }

    pub fn accepts(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Literal(Value),
    Column(ColumnRef),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Literal(v) => f.write_str(&v.to_sql()),
            Operand::Column(c) => write!(f, "{c}"),
        }
    }
}

/// Boolean filter tree. `S` is the representation of IN subqueries: a
/// [`Query`] after lowering, a plan after planning.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint<S> {
    True,
    Compare {
        left: ColumnRef,
        op: CmpOp,
        right: Operand,
    },
    In {
        column: ColumnRef,
        subquery: Box<S>,
    },
    And(Vec<Constraint<S>>),
    Or(Vec<Constraint<S>>),
    Not(Box<Constraint<S>>),
}

impl<S> Constraint<S> {
    /// Conjunction that flattens nested ANDs and drops `True`.
    pub fn and(parts: Vec<Constraint<S>>) -> Constraint<S> {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Constraint::True => {}
                Constraint::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Constraint::True,
            1 => flat.pop().unwrap(),
            _ => Constraint::And(flat),
        }
    }

    pub fn or(parts: Vec<Constraint<S>>) -> Constraint<S> {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Constraint::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Constraint::Or(flat)
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Constraint::True)
    }

    /// Top-level conjuncts.
    pub fn conjuncts(self) -> Vec<Constraint<S>> {
        match self {
            Constraint::True => vec![],
            Constraint::And(v) => v,
            other => vec![other],
        }
    }

    /// Every column the tree references outside of subqueries.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.visit_columns(&mut out);
        out
    }

    fn visit_columns<'a>(&'a self, out: &mut Vec<&'a ColumnRef>) {
        match self {
            Constraint::True => {}
            Constraint::Compare { left, right, .. } => {
                out.push(left);
                if let Operand::Column(c) = right {
                    out.push(c);
                }
            }
            Constraint::In { column, .. } => out.push(column),
            Constraint::And(v) | Constraint::Or(v) => v.iter().for_each(|c| c.visit_columns(out)),
            Constraint::Not(c) => c.visit_columns(out),
        }
    }

    /// Tables referenced outside of subqueries, deduplicated.
    pub fn tables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in self.columns() {
            if !out.contains(&c.table.as_str()) {
                out.push(&c.table);
            }
        }
        out
    }

    pub fn subqueries(&self) -> Vec<&S> {
        match self {
            Constraint::In { subquery, .. } => vec![subquery],
            Constraint::And(v) | Constraint::Or(v) => {
                v.iter().flat_map(|c| c.subqueries()).collect()
            }
            Constraint::Not(c) => c.subqueries(),
            _ => vec![],
        }
    }

    pub fn subqueries_mut(&mut self) -> Vec<&mut S> {
        match self {
            Constraint::In { subquery, .. } => vec![subquery],
            Constraint::And(v) | Constraint::Or(v) => {
                v.iter_mut().flat_map(|c| c.subqueries_mut()).collect()
            }
            Constraint::Not(c) => c.subqueries_mut(),
            _ => vec![],
        }
    }

    /// Rebuilds the tree with a different subquery representation.
    pub fn try_map<T, E>(self, f: &mut impl FnMut(S) -> Result<T, E>) -> Result<Constraint<T>, E> {
        Ok(match self {
            Constraint::True => Constraint::True,
            Constraint::Compare { left, op, right } => Constraint::Compare { left, op, right },
            Constraint::In { column, subquery } => Constraint::In {
                column,
                subquery: Box::new(f(*subquery)?),
            },
            Constraint::And(v) => Constraint::And(
                v.into_iter()
                    .map(|c| c.try_map(f))
                    .collect::<Result<_, E>>()?,
            ),
            Constraint::Or(v) => Constraint::Or(
                v.into_iter()
                    .map(|c| c.try_map(f))
                    .collect::<Result<_, E>>()?,
            ),
            Constraint::Not(c) => Constraint::Not(Box::new(c.try_map(f)?)),
        })
    }
}

impl<S: fmt::Display> Constraint<S> {
    fn fmt_child(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::And(_) | Constraint::Or(_) => write!(f, "({self})"),
            _ => write!(f, "{self}"),
        }
    }
}

impl<S: fmt::Display> fmt::Display for Constraint<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::True => f.write_str("TRUE"),
            Constraint::Compare { left, op, right } => {
                write!(f, "{left} {} {right}", op.symbol())
            }
            Constraint::In { column, subquery } => write!(f, "{column} IN ({subquery})"),
            Constraint::And(v) | Constraint::Or(v) => {
                let sep = if matches!(self, Constraint::And(_)) {
                    " AND "
                } else {
                    " OR "
                };
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    c.fmt_child(f)?;
                }
                Ok(())
            }
            Constraint::Not(c) => {
                f.write_str("NOT ")?;
                match **c {
                    Constraint::Compare { .. } | Constraint::In { .. } => write!(f, "({c})"),
                    _ => c.fmt_child(f),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderKey {
    pub expr: Expr,
    pub desc: bool,
}

impl fmt::Display for OrderKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.expr, if self.desc { " DESC" } else { "" })
    }
}

/// A resolved SELECT.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub fields: Vec<Field>,
    pub constraint: Constraint<Query>,
    pub tables: Vec<String>,
    pub group_by: Vec<Expr>,
    pub order_by: Vec<OrderKey>,
    pub limit: Option<u64>,
    pub offset: u64,
    pub distinct: bool,
}

impl Query {
    /// Whether the query needs an aggregation step.
    pub fn is_aggregating(&self) -> bool {
        self.distinct
            || !self.group_by.is_empty()
            || self.fields.iter().any(|f| f.expr.is_aggregate())
    }

    /// Distinct `BIN(c, n)` expressions the query needs.
    pub fn bin_specs(&self) -> Vec<Expr> {
        let mut out: Vec<Expr> = Vec::new();
        let exprs = self
            .fields
            .iter()
            .map(|f| &f.expr)
            .chain(&self.group_by)
            .chain(self.order_by.iter().map(|o| &o.expr));
        for e in exprs {
            if let Some(g) = e.bin_governor() {
                if !out.contains(&g) {
                    out.push(g);
                }
            }
        }
        out
    }
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SELECT {}{} FROM {}",
            if self.distinct { "DISTINCT " } else { "" },
            join(self.fields.iter().map(|x| &x.expr)),
            join(&self.tables)
        )?;
        if !self.constraint.is_true() {
            write!(f, " WHERE {}", self.constraint)?;
        }
        if !self.group_by.is_empty() {
            write!(f, " GROUP BY {}", join(&self.group_by))?;
        }
        if !self.order_by.is_empty() {
            write!(f, " ORDER BY {}", join(&self.order_by))?;
        }
        if let Some(l) = self.limit {
            write!(f, " LIMIT {l}")?;
        }
        if self.offset > 0 {
            write!(f, " OFFSET {}", self.offset)?;
        }
        Ok(())
    }
}
