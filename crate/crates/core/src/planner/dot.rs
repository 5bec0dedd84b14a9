use std::fmt::Write;

use super::explain::{node_detail, node_label};
use super::plan::*;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn emit(node: &PlanNode, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    let mut label = node_label(node);
    if !node.op.is_scan() {
        write!(label, "\\ncost: {}", node.cost).unwrap();
    }
    if let Some(d) = node_detail(node) {
        write!(label, "\\n{}", escape(&d)).unwrap();
    }
    writeln!(out, "  n{id} [label=\"{label}\"];").unwrap();
    for c in &node.children {
        let cid = emit(c, next, out);
        writeln!(out, "  n{cid} -> n{id};").unwrap();
    }
    id
}

/// Graphviz rendering of the plan; rows flow along the edges.
pub fn to_dot(plan: &QueryPlan) -> String {
    let mut out = String::from("digraph queryplan {\n  node [shape=box];\n");
    let mut next = 0;
    emit(&plan.root, &mut next, &mut out);
    out.push_str("}\n");
    out
}
