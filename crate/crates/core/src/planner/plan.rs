use std::fmt;

use crate::frontend::{BinFunc, ColumnRef, Constraint, Expr, Field, OrderKey};
use crate::storage::RangeOp;
use crate::value::Value;

/// The probe served by an index scan; `None` scans the whole index in order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRange {
    pub bound: Option<(RangeOp, Value)>,
}

impl PlanRange {
    pub fn all() -> Self {
        Self { bound: None }
    }

    pub fn new(op: RangeOp, key: Value) -> Self {
        Self {
            bound: Some((op, key)),
        }
    }
}

/// One `BIN(column, bins)` computed by a binner.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinSpec {
    pub column: ColumnRef,
    pub bins: u32,
}

impl BinSpec {
    pub fn expr(&self, func: BinFunc) -> Expr {
        Expr::Bin {
            func,
            column: self.column.clone(),
            bins: self.bins,
        }
    }

    /// Whether `e` is one of the values this bin spec produces.
    pub fn produces(&self, e: &Expr) -> bool {
        matches!(e, Expr::Bin { column, bins, .. } if *column == self.column && *bins == self.bins)
    }
}

impl fmt::Display for BinSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BIN({}, {})", self.column, self.bins)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    FullScan {
        table: String,
    },
    IndexScan {
        table: String,
        column: String,
        range: PlanRange,
    },
    Constraint {
        tree: Constraint<QueryPlan>,
    },
    Aggregator {
        group_by: Vec<Expr>,
        aggregates: Vec<Expr>,
    },
    ParallelAggregator {
        lanes: usize,
    },
    Binner {
        bins: Vec<BinSpec>,
    },
    Sort {
        keys: Vec<OrderKey>,
    },
    Limit {
        limit: Option<u64>,
        offset: u64,
    },
    Accumulate,
    MergeJoin {
        left_key: ColumnRef,
        right_key: ColumnRef,
    },
    XJoin,
    Debug,
}

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::FullScan { .. } => "FULL SCAN",
            Operator::IndexScan { .. } => "INDEX SCAN",
            Operator::Constraint { .. } => "CONSTRAINT",
            Operator::Aggregator { .. } => "AGGREGATE",
            Operator::ParallelAggregator { .. } => "PARALLEL AGGREGATE",
            Operator::Binner { .. } => "BINNER",
            Operator::Sort { .. } => "SORT",
            Operator::Limit { .. } => "LIMIT",
            Operator::Accumulate => "ACCUMULATE",
            Operator::MergeJoin { .. } => "MERGE JOIN",
            Operator::XJoin => "XJOIN",
            Operator::Debug => "DEBUG",
        }
    }

    pub fn is_scan(&self) -> bool {
        matches!(self, Operator::FullScan { .. } | Operator::IndexScan { .. })
    }

    pub fn is_join(&self) -> bool {
        matches!(self, Operator::MergeJoin { .. } | Operator::XJoin)
    }
}

/// A node of the relational algebra tree. `expressions` lists the values the
/// node outputs; `cost` is its estimated output row count.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub op: Operator,
    pub children: Vec<PlanNode>,
    pub expressions: Vec<Expr>,
    pub cost: u64,
}

impl PlanNode {
    pub fn new(op: Operator, children: Vec<PlanNode>) -> Self {
        Self {
            op,
            children,
            expressions: Vec::new(),
            cost: 0,
        }
    }

    pub fn leaf(op: Operator) -> Self {
        Self::new(op, Vec::new())
    }

    pub fn unary(op: Operator, child: PlanNode) -> Self {
        Self::new(op, vec![child])
    }

    pub fn child(&self) -> &PlanNode {
        &self.children[0]
    }

    pub fn child_mut(&mut self) -> &mut PlanNode {
        &mut self.children[0]
    }

    /// Tables scanned in this subtree, left to right.
    pub fn tables(&self) -> Vec<&str> {
        match &self.op {
            Operator::FullScan { table } | Operator::IndexScan { table, .. } => vec![table],
            _ => self.children.iter().flat_map(|c| c.tables()).collect(),
        }
    }

    /// Pre-order walk over the tree (subplans excluded).
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a PlanNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn subplans(&self) -> Vec<&QueryPlan> {
        match &self.op {
            Operator::Constraint { tree } => tree.subqueries(),
            _ => Vec::new(),
        }
    }

    pub fn subplans_mut(&mut self) -> Vec<&mut QueryPlan> {
        match &mut self.op {
            Operator::Constraint { tree } => tree.subqueries_mut(),
            _ => Vec::new(),
        }
    }

    /// Number of nodes in the tree (subplans excluded).
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(PlanNode::size).sum::<usize>()
    }
}

/// A plan together with the query's output fields.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPlan {
    pub root: PlanNode,
    pub fields: Vec<Field>,
}

impl fmt::Display for QueryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::explain(self))
    }
}
