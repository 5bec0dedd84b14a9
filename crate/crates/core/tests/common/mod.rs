#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod suites;

use snel::Value;

fn close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float32(x), Value::Float32(y)) => {
            x == y || (x - y).abs() as f64 <= 1e-5 * (x.abs().max(y.abs()) as f64).max(1.0)
        }
        _ => a == b,
    }
}

fn rows_close(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(x, y))
}

/// Multiset equality with a relative tolerance of 1e-5 on floats.
pub fn same_rows(got: &[Vec<Value>], want: &[Vec<Value>]) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} rows, expected {}", got.len(), want.len()));
    }
    let key = |r: &Vec<Value>| format!("{r:?}");
    let mut g = got.to_vec();
    let mut w = want.to_vec();
    g.sort_by_key(key);
    w.sort_by_key(key);
    if g.iter().zip(&w).all(|(a, b)| rows_close(a, b)) {
        return Ok(());
    }
    let mut used = vec![false; g.len()];
    for r in &w {
        match (0..g.len()).find(|&i| !used[i] && rows_close(&g[i], r)) {
            Some(i) => used[i] = true,
            None => return Err(format!("missing row {r:?}")),
        }
    }
    Ok(())
}
