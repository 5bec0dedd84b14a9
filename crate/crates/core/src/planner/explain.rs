use super::plan::*;

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Text after the operator name, without braces or children.
pub fn node_label(node: &PlanNode) -> String {
    match &node.op {
        Operator::FullScan { table } => {
            format!("FULL SCAN FOR TABLE '{table}' ({} rows)", node.cost)
        }
        Operator::IndexScan { table, column, .. } => format!(
            "INDEX SCAN FOR TABLE '{table}' USING '{table}.{column}' ({} rows)",
            node.cost
        ),
        op => op.name().to_owned(),
    }
}

pub fn node_detail(node: &PlanNode) -> Option<String> {
    match &node.op {
        Operator::Constraint { tree } => Some(tree.to_string()),
        Operator::Aggregator { group_by, .. } if !group_by.is_empty() => {
            Some(format!("GROUP BY {}", join(group_by)))
        }
        Operator::ParallelAggregator { lanes } => Some(format!("lanes: {lanes}")),
        Operator::Binner { bins } => Some(join(bins)),
        Operator::Sort { keys } => Some(join(keys)),
        Operator::Limit { limit, offset } => {
            let l = limit.map_or("ALL".to_owned(), |l| l.to_string());
            Some(if *offset > 0 {
                format!("{l} OFFSET {offset}")
            } else {
                l
            })
        }
        Operator::MergeJoin {
            left_key,
            right_key,
        } => Some(format!("{left_key} = {right_key}")),
        _ => None,
    }
}

fn render(node: &PlanNode, root: bool, out: &mut String) {
    out.push_str(&node_label(node));
    if root && !node.op.is_scan() {
        out.push_str(&format!(" (cost: {})", node.cost));
    }
    if let Some(d) = node_detail(node) {
        out.push_str(&format!(" [{d}]"));
    }
    for c in &node.children {
        out.push_str(" { ");
        render(c, false, out);
        out.push_str(" }");
    }
}

/// Single-line rendering: `NAME (cost: N) [detail] { child }`, cost on the root only.
pub fn explain(plan: &QueryPlan) -> String {
    let mut out = String::new();
    render(&plan.root, true, &mut out);
    out
}
