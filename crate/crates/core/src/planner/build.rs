use std::convert::Infallible;

use super::plan::*;
use crate::frontend::{AggFunc, BinFunc, Expr, Query};
use crate::storage::Catalog;

fn push_unique(out: &mut Vec<Expr>, e: Expr) {
    if !matches!(e, Expr::Literal(_)) && !out.contains(&e) {
        out.push(e);
    }
}

/// Translates a query into the naive operator tree:
/// scans, cross joins, constraint, binner, aggregator, sort, limit.
pub fn build_plan(q: &Query, catalog: &Catalog) -> QueryPlan {
    let mut plan = build_unfinalized(q, catalog);
    finalize(&mut plan, catalog);
    plan
}

fn build_unfinalized(q: &Query, catalog: &Catalog) -> QueryPlan {
    let mut root: Option<PlanNode> = None;
    for t in &q.tables {
        let scan = PlanNode::leaf(Operator::FullScan { table: t.clone() });
        root = Some(match root {
            None => scan,
            Some(left) => PlanNode::new(Operator::XJoin, vec![left, scan]),
        });
    }
    let mut root = root.expect("query has at least one table");

    if !q.constraint.is_true() {
        let tree = q
            .constraint
            .clone()
            .try_map(&mut |sub: Query| Ok::<_, Infallible>(build_subplan(&sub, catalog)))
            .unwrap();
        root = PlanNode::unary(Operator::Constraint { tree }, root);
    }

    let bins: Vec<BinSpec> = q
        .bin_specs()
        .into_iter()
        .map(|e| match e {
            Expr::Bin { column, bins, .. } => BinSpec { column, bins },
            _ => unreachable!(),
        })
        .collect();
    if !bins.is_empty() {
        root = PlanNode::unary(Operator::Binner { bins }, root);
    }

    if q.is_aggregating() {
        let mut group_by = Vec::new();
        if q.distinct {
            for f in &q.fields {
                push_unique(&mut group_by, f.expr.clone());
            }
        } else {
            for e in &q.group_by {
                push_unique(&mut group_by, e.clone());
            }
        }
        let mut aggregates = Vec::new();
        let exprs = q
            .fields
            .iter()
            .map(|f| &f.expr)
            .chain(q.order_by.iter().map(|o| &o.expr));
        for e in exprs {
            if !group_by.contains(e) {
                push_unique(&mut aggregates, e.clone());
            }
        }
        root = PlanNode::unary(
            Operator::Aggregator {
                group_by,
                aggregates,
            },
            root,
        );
    }

    if !q.order_by.is_empty() {
        root = PlanNode::unary(
            Operator::Sort {
                keys: q.order_by.clone(),
            },
            root,
        );
    }
    if q.limit.is_some() || q.offset > 0 {
        root = PlanNode::unary(
            Operator::Limit {
                limit: q.limit,
                offset: q.offset,
            },
            root,
        );
    }
    QueryPlan {
        root,
        fields: q.fields.clone(),
    }
}

/// IN subqueries are materialized once, so their plans are topped by ACCUMULATE.
fn build_subplan(q: &Query, catalog: &Catalog) -> QueryPlan {
    let mut plan = build_unfinalized(q, catalog);
    plan.root = PlanNode::unary(Operator::Accumulate, plan.root);
    finalize(&mut plan, catalog);
    plan
}

/// Recomputes the expressions each node outputs and the cost estimates,
/// including those of subplans.
pub fn finalize(plan: &mut QueryPlan, catalog: &Catalog) {
    let mut required = Vec::new();
    for f in &plan.fields {
        push_unique(&mut required, f.expr.clone());
    }
    assign_expressions(&mut plan.root, &required);
    compute_costs(&mut plan.root, catalog);
}

/// The inputs an aggregator needs from its child to compute `e`.
fn aggregator_inputs(e: &Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Aggregate { arg: Some(c), .. } => push_unique(out, Expr::Column(c.clone())),
        Expr::Aggregate {
            func: AggFunc::Count,
            arg: None,
        } => {}
        other => push_unique(out, other.clone()),
    }
}

/// Top-down: each node outputs what its parent requires and asks its
/// children for what it needs to produce that.
pub fn assign_expressions(node: &mut PlanNode, required: &[Expr]) {
    let mut req = Vec::new();
    for e in required {
        push_unique(&mut req, e.clone());
    }
    let child_reqs: Vec<Vec<Expr>> = match &node.op {
        Operator::FullScan { table } | Operator::IndexScan { table, .. } => {
            node.expressions = req
                .into_iter()
                .filter(|e| matches!(e, Expr::Column(c) if &c.table == table))
                .collect();
            return;
        }
        Operator::Constraint { tree } => {
            let mut child = req.clone();
            for c in tree.columns() {
                push_unique(&mut child, Expr::Column(c.clone()));
            }
            node.expressions = req;
            vec![child]
        }
        Operator::Aggregator {
            group_by,
            aggregates,
        } => {
            let mut out = Vec::new();
            let mut child = Vec::new();
            for e in group_by.iter().chain(aggregates) {
                push_unique(&mut out, e.clone());
                aggregator_inputs(e, &mut child);
            }
            node.expressions = out;
            vec![child]
        }
        Operator::Binner { bins } => {
            let mut child: Vec<Expr> = Vec::new();
            for e in &req {
                if !bins.iter().any(|b| b.produces(e)) {
                    push_unique(&mut child, e.clone());
                }
            }
            for b in bins {
                push_unique(&mut child, Expr::Column(b.column.clone()));
            }
            node.expressions = req;
            vec![child]
        }
        Operator::Sort { keys } => {
            let mut child = req.clone();
            for k in keys {
                push_unique(&mut child, k.expr.clone());
            }
            node.expressions = req;
            vec![child]
        }
        Operator::ParallelAggregator { .. }
        | Operator::Limit { .. }
        | Operator::Accumulate
        | Operator::Debug => {
            node.expressions = req.clone();
            vec![req]
        }
        Operator::MergeJoin {
            left_key,
            right_key,
        } => {
            let (mut l, mut r) = split_by_side(node, &req);
            push_unique(&mut l, Expr::Column(left_key.clone()));
            push_unique(&mut r, Expr::Column(right_key.clone()));
            node.expressions = req;
            vec![l, r]
        }
        Operator::XJoin => {
            let (l, r) = split_by_side(node, &req);
            node.expressions = req;
            vec![l, r]
        }
    };
    for (child, r) in node.children.iter_mut().zip(child_reqs) {
        assign_expressions(child, &r);
    }
}

fn split_by_side(node: &PlanNode, req: &[Expr]) -> (Vec<Expr>, Vec<Expr>) {
    let left_tables = node.children[0].tables();
    let (mut l, mut r) = (Vec::new(), Vec::new());
    for e in req {
        let on_left = e
            .columns()
            .first()
            .is_some_and(|c| left_tables.contains(&c.table.as_str()));
        if on_left {
            push_unique(&mut l, e.clone());
        } else {
            push_unique(&mut r, e.clone());
        }
    }
    (l, r)
}

/// Bottom-up row estimates.
pub fn compute_costs(node: &mut PlanNode, catalog: &Catalog) {
    for c in node.children.iter_mut() {
        compute_costs(c, catalog);
    }
    for sub in node.subplans_mut() {
        compute_costs(&mut sub.root, catalog);
    }
    let child = node.children.first().map_or(0, |c| c.cost);
    node.cost = match &node.op {
        Operator::FullScan { table } => catalog.get(table).map_or(0, |t| t.row_count()),
        Operator::IndexScan {
            table,
            column,
            range,
        } => index_scan_estimate(catalog, table, column, range),
        Operator::Limit { limit, .. } => limit.map_or(child, |l| child.min(l)),
        Operator::XJoin => node.children[0].cost.saturating_mul(node.children[1].cost),
        Operator::MergeJoin { .. } => node.children[0].cost.max(node.children[1].cost),
        _ => child,
    };
}

/// Rows an index probe yields: exact when the index is loaded, the table size otherwise.
pub fn index_scan_estimate(catalog: &Catalog, table: &str, column: &str, range: &PlanRange) -> u64 {
    let Some(t) = catalog.get(table) else {
        return 0;
    };
    let (Some(index), Ok(col)) = (t.index(column), t.column(column)) else {
        return t.row_count();
    };
    match &range.bound {
        None => index.len() as u64,
        Some((op, key)) => index
            .range(col, *op, key)
            .map_or(t.row_count(), |r| r.len() as u64),
    }
}

/// Whether `e` is a bin expression of any kind.
pub(crate) fn is_bin_expr(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Bin {
            func: BinFunc::Bin | BinFunc::BinMin | BinFunc::BinMax,
            ..
        }
    )
}
