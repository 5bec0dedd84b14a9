//! Relational algebra plans.

mod build;
mod dot;
mod explain;
mod plan;

pub(crate) use build::is_bin_expr;
pub use build::{assign_expressions, build_plan, compute_costs, finalize, index_scan_estimate};
pub use dot::to_dot;
pub use explain::explain;
pub use plan::{BinSpec, Operator, PlanNode, PlanRange, QueryPlan};

use crate::frontend::{ColumnRef, Expr};

/// One component of the order a node's output is known to follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedBy {
    pub table: String,
    pub column: String,
    pub desc: bool,
}

impl SortedBy {
    fn asc(c: &ColumnRef) -> Self {
        Self {
            table: c.table.clone(),
            column: c.column.clone(),
            desc: false,
        }
    }

    pub fn matches(&self, e: &Expr, desc: bool) -> bool {
        matches!(e, Expr::Column(c) if c.table == self.table && c.column == self.column)
            && self.desc == desc
    }
}

/// The column order the node's output is guaranteed to follow.
pub fn ordering(node: &PlanNode) -> Vec<SortedBy> {
    match &node.op {
        Operator::IndexScan { table, column, .. } => vec![SortedBy {
            table: table.clone(),
            column: column.clone(),
            desc: false,
        }],
        Operator::FullScan { .. }
        | Operator::Aggregator { .. }
        | Operator::ParallelAggregator { .. } => Vec::new(),
        Operator::Sort { keys } => keys
            .iter()
            .map_while(|k| match &k.expr {
                Expr::Column(c) => Some(SortedBy {
                    desc: k.desc,
                    ..SortedBy::asc(c)
                }),
                _ => None,
            })
            .collect(),
        Operator::MergeJoin { left_key, .. } => vec![SortedBy::asc(left_key)],
        Operator::XJoin => ordering(&node.children[0]),
        Operator::Constraint { .. }
        | Operator::Binner { .. }
        | Operator::Limit { .. }
        | Operator::Accumulate
        | Operator::Debug => ordering(node.child()),
    }
}
