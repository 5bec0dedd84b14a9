//! Rewrite passes over a [`QueryPlan`], applied in a fixed order.

use std::fmt;

use crate::frontend::{CmpOp, Constraint, Operand};
use crate::planner::{
    finalize, index_scan_estimate, is_bin_expr, ordering, Operator, PlanNode, PlanRange, QueryPlan,
};
use crate::storage::Catalog;

type Tree = Constraint<QueryPlan>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassStat {
    pub name: &'static str,
    pub fired: bool,
    pub nodes_rewritten: usize,
}

/// What each pass did, in pass order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PassReport {
    pub passes: Vec<PassStat>,
}

impl PassReport {
    fn record(&mut self, name: &'static str, n: usize) {
        self.passes.push(PassStat {
            name,
            fired: n > 0,
            nodes_rewritten: n,
        });
    }

    pub fn total(&self) -> usize {
        self.passes.iter().map(|p| p.nodes_rewritten).sum()
    }
}

impl fmt::Display for PassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.passes.iter().enumerate() {
            writeln!(
                f,
                "{}. {}: {} ({} rewritten)",
                i + 1,
                p.name,
                if p.fired { "fired" } else { "no change" },
                p.nodes_rewritten
            )?;
        }
        Ok(())
    }
}

pub const PASS_NAMES: [&str; 6] = [
    "optimize joins",
    "push down constraints",
    "apply indexes",
    "push down sorts",
    "eliminate sorts",
    "parallelize",
];

/// Runs all passes in order.
pub fn optimize(
    mut plan: QueryPlan,
    catalog: &Catalog,
    max_lanes: usize,
) -> (QueryPlan, PassReport) {
    let mut report = PassReport::default();
    report.record(PASS_NAMES[0], pass1_optimize_joins(&mut plan, catalog));
    report.record(
        PASS_NAMES[1],
        pass2_pushdown_constraints(&mut plan, catalog),
    );
    report.record(PASS_NAMES[2], pass3_apply_indexes(&mut plan, catalog));
    report.record(PASS_NAMES[3], pass4_pushdown_sorts(&mut plan, catalog));
    report.record(PASS_NAMES[4], pass5_eliminate_sorts(&mut plan, catalog));
    report.record(
        PASS_NAMES[5],
        pass6_parallelize(&mut plan, catalog, max_lanes),
    );
    (plan, report)
}

/// Applies `rewrite` to the plan and to every IN subplan, then refreshes
/// expressions and costs.
fn run_pass(
    plan: &mut QueryPlan,
    catalog: &Catalog,
    rewrite: &mut dyn FnMut(&mut PlanNode, &Catalog) -> usize,
) -> usize {
    let mut n = rewrite(&mut plan.root, catalog);
    n += visit_subplans(&mut plan.root, catalog, rewrite);
    finalize(plan, catalog);
    n
}

fn visit_subplans(
    node: &mut PlanNode,
    catalog: &Catalog,
    rewrite: &mut dyn FnMut(&mut PlanNode, &Catalog) -> usize,
) -> usize {
    let mut n = 0;
    for sub in node.subplans_mut() {
        n += rewrite(&mut sub.root, catalog);
        n += visit_subplans(&mut sub.root, catalog, rewrite);
    }
    for c in node.children.iter_mut() {
        n += visit_subplans(c, catalog, rewrite);
    }
    n
}

/// Replaces a unary node by its only child.
fn splice_out(node: &mut PlanNode) {
    let child = node.children.pop().expect("unary node");
    *node = child;
}

fn is_indexed(catalog: &Catalog, table: &str, column: &str) -> bool {
    catalog.get(table).is_some_and(|t| t.is_indexed(column))
}

// ---- pass 1 ----

pub fn pass1_optimize_joins(plan: &mut QueryPlan, catalog: &Catalog) -> usize {
    run_pass(plan, catalog, &mut joins)
}

fn joins(node: &mut PlanNode, catalog: &Catalog) -> usize {
    let mut n = 0;
    if let Operator::Constraint { tree } = &mut node.op {
        if node.children[0].op.is_join() {
            let mut conjuncts = std::mem::replace(tree, Constraint::True).conjuncts();
            n += rewrite_joins(&mut node.children[0], &mut conjuncts, catalog);
            *tree = Constraint::and(conjuncts);
            if tree.is_true() {
                splice_out(node);
                return n + joins(node, catalog);
            }
        }
    }
    for c in node.children.iter_mut() {
        n += joins(c, catalog);
    }
    n
}

fn rewrite_joins(node: &mut PlanNode, conjuncts: &mut Vec<Tree>, catalog: &Catalog) -> usize {
    if !node.op.is_join() {
        return 0;
    }
    let mut n = 0;
    if node.op == Operator::XJoin {
        let left_tables: Vec<String> = node.children[0]
            .tables()
            .iter()
            .map(|s| s.to_string())
            .collect();
        let right_tables: Vec<String> = node.children[1]
            .tables()
            .iter()
            .map(|s| s.to_string())
            .collect();
        let found = conjuncts.iter().position(|c| match c {
            Constraint::Compare {
                left,
                op: CmpOp::Eq,
                right: Operand::Column(right),
            } => {
                let crosses = (left_tables.contains(&left.table)
                    && right_tables.contains(&right.table))
                    || (right_tables.contains(&left.table) && left_tables.contains(&right.table));
                crosses
                    && is_indexed(catalog, &left.table, &left.column)
                    && is_indexed(catalog, &right.table, &right.column)
            }
            _ => false,
        });
        if let Some(i) = found {
            let Constraint::Compare {
                left,
                right: Operand::Column(right),
                ..
            } = conjuncts.remove(i)
            else {
                unreachable!()
            };
            let (lk, rk) = if left_tables.contains(&left.table) {
                (left, right)
            } else {
                (right, left)
            };
            for (side, key) in node.children.iter_mut().zip([&lk, &rk]) {
                if matches!(&side.op, Operator::FullScan { table } if *table == key.table) {
                    side.op = Operator::IndexScan {
                        table: key.table.clone(),
                        column: key.column.clone(),
                        range: PlanRange::all(),
                    };
                }
            }
            node.op = Operator::MergeJoin {
                left_key: lk,
                right_key: rk,
            };
            n += 1;
        }
    }
    for c in node.children.iter_mut() {
        n += rewrite_joins(c, conjuncts, catalog);
    }
    n
}

// ---- pass 2 ----

pub fn pass2_pushdown_constraints(plan: &mut QueryPlan, catalog: &Catalog) -> usize {
    run_pass(plan, catalog, &mut |node, _| pushdown(node))
}

fn pushdown(node: &mut PlanNode) -> usize {
    let mut n = 0;
    if let Operator::Constraint { tree } = &mut node.op {
        if !node.children[0].op.is_scan() {
            let mut keep = Vec::new();
            for c in std::mem::replace(tree, Constraint::True).conjuncts() {
                let tables: Vec<String> = c.tables().iter().map(|s| s.to_string()).collect();
                match tables.as_slice() {
                    [t] => match push_into(&mut node.children[0], t, c) {
                        Ok(()) => n += 1,
                        Err(c) => keep.push(c),
                    },
                    _ => keep.push(c),
                }
            }
            let Operator::Constraint { tree } = &mut node.op else {
                unreachable!()
            };
            *tree = Constraint::and(keep);
            if tree.is_true() {
                splice_out(node);
                return n + pushdown(node);
            }
        }
    }
    for c in node.children.iter_mut() {
        n += pushdown(c);
    }
    n
}

/// Places `conj` directly above the scan of `table` inside `node`.
fn push_into(node: &mut PlanNode, table: &str, conj: Tree) -> Result<(), Tree> {
    let scans_table = |n: &PlanNode| match &n.op {
        Operator::FullScan { table: t } | Operator::IndexScan { table: t, .. } => t == table,
        _ => false,
    };
    if scans_table(node) {
        let scan = std::mem::replace(node, PlanNode::leaf(Operator::Debug));
        *node = PlanNode::unary(Operator::Constraint { tree: conj }, scan);
        return Ok(());
    }
    match &mut node.op {
        Operator::Constraint { tree } if scans_table(&node.children[0]) => {
            let existing = std::mem::replace(tree, Constraint::True);
            *tree = Constraint::and(vec![existing, conj]);
            Ok(())
        }
        Operator::XJoin | Operator::MergeJoin { .. } => {
            let side = if node.children[0].tables().contains(&table) {
                0
            } else {
                1
            };
            push_into(&mut node.children[side], table, conj)
        }
        Operator::Constraint { .. } | Operator::Debug => {
            push_into(&mut node.children[0], table, conj)
        }
        _ => Err(conj),
    }
}

// ---- pass 3 ----

pub fn pass3_apply_indexes(plan: &mut QueryPlan, catalog: &Catalog) -> usize {
    run_pass(plan, catalog, &mut apply_indexes)
}

fn apply_indexes(node: &mut PlanNode, catalog: &Catalog) -> usize {
    let mut n = 0;
    if let (Operator::Constraint { tree }, Some(Operator::FullScan { table })) =
        (&node.op, node.children.first().map(|c| &c.op))
    {
        let table = table.clone();
        let conjuncts = tree.clone().conjuncts();
        let position = |col: &str| {
            catalog
                .get(&table)
                .and_then(|t| t.schema().column_position(col))
                .unwrap_or(usize::MAX)
        };
        let best = conjuncts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                Constraint::Compare {
                    left,
                    op,
                    right: Operand::Literal(v),
                } if left.table == table
                    && !v.is_null()
                    && is_indexed(catalog, &table, &left.column) =>
                {
                    let range = PlanRange::new(op.range_op()?, v.clone());
                    let est = index_scan_estimate(catalog, &table, &left.column, &range);
                    Some((est, position(&left.column), i, left.column.clone(), range))
                }
                _ => None,
            })
            .min_by_key(|(est, pos, i, _, _)| (*est, *pos, *i));
        if let Some((_, _, i, column, range)) = best {
            let mut rest = conjuncts;
            rest.remove(i);
            node.children[0].op = Operator::IndexScan {
                table,
                column,
                range,
            };
            let remaining = Constraint::and(rest);
            if remaining.is_true() {
                splice_out(node);
            } else {
                node.op = Operator::Constraint { tree: remaining };
            }
            n += 1;
        }
    }
    for c in node.children.iter_mut() {
        n += apply_indexes(c, catalog);
    }
    n
}

// ---- pass 4 ----

pub fn pass4_pushdown_sorts(plan: &mut QueryPlan, catalog: &Catalog) -> usize {
    run_pass(plan, catalog, &mut |node, _| push_sorts(node))
}

fn push_sorts(node: &mut PlanNode) -> usize {
    let mut n = 0;
    if let Operator::Sort { keys } = &node.op {
        let below = &node.children[0].op;
        let can = match below {
            Operator::Constraint { .. } | Operator::Debug => true,
            Operator::Binner { .. } => !keys.iter().any(|k| is_bin_expr(&k.expr)),
            _ => false,
        };
        if can {
            swap_with_child(node);
            n += 1;
        }
    }
    for c in node.children.iter_mut() {
        n += push_sorts(c);
    }
    n
}

fn swap_with_child(node: &mut PlanNode) {
    let child_op = std::mem::replace(&mut node.children[0].op, Operator::Debug);
    node.children[0].op = std::mem::replace(&mut node.op, child_op);
}

// ---- pass 5 ----

pub fn pass5_eliminate_sorts(plan: &mut QueryPlan, catalog: &Catalog) -> usize {
    run_pass(plan, catalog, &mut |node, _| eliminate_sorts(node))
}

fn eliminate_sorts(node: &mut PlanNode) -> usize {
    let mut n = 0;
    for c in node.children.iter_mut() {
        n += eliminate_sorts(c);
    }
    if let Operator::Sort { keys } = &node.op {
        let have = ordering(&node.children[0]);
        let covered = keys.len() <= have.len()
            && keys
                .iter()
                .zip(&have)
                .all(|(k, h)| h.matches(&k.expr, k.desc));
        if covered {
            splice_out(node);
            n += 1;
        }
    }
    n
}

// ---- pass 6 ----

pub fn pass6_parallelize(plan: &mut QueryPlan, catalog: &Catalog, max_lanes: usize) -> usize {
    if max_lanes <= 1 {
        finalize(plan, catalog);
        return 0;
    }
    let n = parallelize(&mut plan.root, max_lanes);
    finalize(plan, catalog);
    n
}

fn parallelize(node: &mut PlanNode, lanes: usize) -> usize {
    match &node.op {
        Operator::Sort { .. } | Operator::Limit { .. } => parallelize(&mut node.children[0], lanes),
        Operator::ParallelAggregator { .. } => 0,
        Operator::Aggregator { .. } if partitionable(&node.children[0]) => {
            let agg = std::mem::replace(node, PlanNode::leaf(Operator::Debug));
            *node = PlanNode::unary(Operator::ParallelAggregator { lanes }, agg);
            1
        }
        _ => 0,
    }
}

/// A chain of row-local operators over one scan.
fn partitionable(node: &PlanNode) -> bool {
    match &node.op {
        Operator::FullScan { .. } | Operator::IndexScan { .. } => true,
        Operator::Constraint { .. } | Operator::Binner { .. } | Operator::Debug => {
            partitionable(&node.children[0])
        }
        _ => false,
    }
}
