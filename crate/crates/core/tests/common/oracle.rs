//! Row-at-a-time reference interpreter over a lowered query.

use std::cmp::Ordering;
use std::collections::HashMap;

use snel::frontend::{AggFunc, BinFunc, CmpOp, ColumnRef, Constraint, Expr, Operand, Query};
use snel::storage::{Catalog, RowId, Table};
use snel::{ColumnType, Value};

/// Row ids, one per FROM table.
type Row = [u32; MAX_TABLES];

const MAX_TABLES: usize = 3;

struct Frame<'a> {
    tables: Vec<(&'a str, &'a Table)>,
}

impl<'a> Frame<'a> {
    fn new(catalog: &'a Catalog, tables: &'a [String]) -> Frame<'a> {
        assert!(tables.len() <= MAX_TABLES);
        Frame {
            tables: tables
                .iter()
                .map(|name| (name.as_str(), catalog.get(name).expect("table")))
                .collect(),
        }
    }

    /// Every combination of rows, left table major.
    fn rows(&self) -> impl Iterator<Item = Row> + '_ {
        let counts: Vec<u32> = self.tables.iter().map(|t| t.1.row_count() as u32).collect();
        let total: u64 = counts.iter().map(|&n| n as u64).product();
        (0..total).map(move |mut i| {
            let mut row = [0; MAX_TABLES];
            for (t, &n) in counts.iter().enumerate().rev() {
                row[t] = (i % n as u64) as u32;
                i /= n as u64;
            }
            row
        })
    }

    fn get(&self, row: &Row, c: &ColumnRef) -> Value {
        let t = self
            .tables
            .iter()
            .position(|t| t.0 == c.table)
            .expect("table in scope");
        let table = self.tables[t].1;
        table
            .column(&c.column)
            .unwrap()
            .value(RowId(row[t] as u64))
            .unwrap()
    }
}

pub fn compare(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Null, _) | (_, Value::Null) => None,
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        _ => match (a.as_i64(), b.as_i64()) {
            (Some(x), Some(y)) => Some(x.cmp(&y)),
            _ => num(a).partial_cmp(&num(b)),
        },
    }
}

fn num(v: &Value) -> f64 {
    v.as_i64()
        .map(|i| i as f64)
        .or_else(|| v.as_f64())
        .expect("numeric")
}

/// NULL sorts first.
fn order(a: &Value, b: &Value) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => compare(a, b).unwrap_or(Ordering::Equal),
    }
}

fn holds(op: CmpOp, ord: Ordering) -> bool {
    match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }
}

/// Bin number and edges found by walking the edges upwards.
pub fn bin_of(v: f64, lo: f64, hi: f64, n: u32) -> (i64, f32, f32) {
    if hi <= lo {
        return (0, lo as f32, lo as f32);
    }
    let edge = |i: u32| {
        if i >= n {
            hi as f32
        } else {
            (lo + i as f64 * (hi - lo) / n as f64) as f32
        }
    };
    let mut b = 0;
    for i in 1..n {
        if v >= edge(i) as f64 {
            b = i;
        }
    }
    (b as i64, edge(b), edge(b + 1))
}

pub struct Oracle<'a> {
    catalog: &'a Catalog,
}

impl<'a> Oracle<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        Self { catalog }
    }

    fn test(&self, f: &Frame, row: &Row, c: &Constraint<Query>) -> Option<bool> {
        match c {
            Constraint::True => Some(true),
            Constraint::Compare { left, op, right } => {
                let l = f.get(row, left);
                let r = match right {
                    Operand::Literal(v) => v.clone(),
                    Operand::Column(c) => f.get(row, c),
                };
                compare(&l, &r).map(|o| holds(*op, o))
            }
            Constraint::In { column, subquery } => {
                let v = f.get(row, column);
                if v.is_null() {
                    return None;
                }
                let set = self.run(subquery);
                let hit = set
                    .iter()
                    .any(|r| compare(&v, &r[0]) == Some(Ordering::Equal));
                Some(hit)
            }
            Constraint::And(parts) => {
                let mut out = Some(true);
                for p in parts {
                    match self.test(f, row, p) {
                        Some(false) => return Some(false),
                        None => out = None,
                        Some(true) => {}
                    }
                }
                out
            }
            Constraint::Or(parts) => {
                let mut out = Some(false);
                for p in parts {
                    match self.test(f, row, p) {
                        Some(true) => return Some(true),
                        None => out = None,
                        Some(false) => {}
                    }
                }
                out
            }
            Constraint::Not(inner) => self.test(f, row, inner).map(|b| !b),
        }
    }

    /// Evaluates the query from scratch; rows come out in ORDER BY order when there is one.
    pub fn run(&self, q: &Query) -> Vec<Vec<Value>> {
        let f = Frame::new(self.catalog, &q.tables);
        let rows: Vec<Row> = f
            .rows()
            .filter(|r| self.test(&f, r, &q.constraint) == Some(true))
            .collect();

        let mut bounds: HashMap<(ColumnRef, u32), Option<(f64, f64)>> = HashMap::new();
        for spec in q.bin_specs() {
            let Expr::Bin { column, bins, .. } = &spec else {
                unreachable!()
            };
            let vals: Vec<f64> = rows
                .iter()
                .map(|r| f.get(r, column))
                .filter(|v| !v.is_null())
                .map(|v| num(&v))
                .collect();
            let b = (!vals.is_empty()).then(|| {
                (
                    vals.iter().cloned().fold(f64::INFINITY, f64::min),
                    vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                )
            });
            bounds.insert((column.clone(), *bins), b);
        }
        let scalar = |row: &Row, e: &Expr| -> Value {
            match e {
                Expr::Column(c) => f.get(row, c),
                Expr::Literal(v) => v.clone(),
                Expr::Bin { func, column, bins } => {
                    let v = f.get(row, column);
                    let Some((lo, hi)) = bounds[&(column.clone(), *bins)] else {
                        return Value::Null;
                    };
                    if v.is_null() {
                        return Value::Null;
                    }
                    let (i, a, b) = bin_of(num(&v), lo, hi, *bins);
                    match func {
                        BinFunc::Bin => Value::Int64(i),
                        BinFunc::BinMin => Value::Float32(a),
                        BinFunc::BinMax => Value::Float32(b),
                    }
                }
                Expr::Aggregate { .. } => unreachable!("aggregate outside a group"),
            }
        };

        let groups: Vec<Vec<Row>> = if q.is_aggregating() {
            let keys: Vec<Expr> = if q.group_by.is_empty() && q.distinct {
                q.fields.iter().map(|f| f.expr.clone()).collect()
            } else {
                q.group_by.clone()
            };
            let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
            let mut groups: Vec<Vec<Row>> = Vec::new();
            for r in rows {
                let k: Vec<Value> = keys.iter().map(|e| scalar(&r, e)).collect();
                let i = *index.entry(k).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[i].push(r);
            }
            if keys.is_empty() && groups.is_empty() {
                groups.push(Vec::new());
            }
            groups
        } else {
            rows.into_iter().map(|r| vec![r]).collect()
        };

        let eval = |g: &[Row], e: &Expr| -> Value {
            match e {
                Expr::Aggregate { func, arg } => aggregate(&f, g, *func, arg.as_ref(), e.ty()),
                _ => g.first().map_or_else(
                    || match e {
                        Expr::Literal(v) => v.clone(),
                        _ => Value::Null,
                    },
                    |r| scalar(r, e),
                ),
            }
        };
        let mut out: Vec<(Vec<Value>, Vec<Value>)> = groups
            .iter()
            .map(|g| {
                let keys = q.order_by.iter().map(|o| eval(g, &o.expr)).collect();
                let vals = q.fields.iter().map(|fl| eval(g, &fl.expr)).collect();
                (keys, vals)
            })
            .collect();
        out.sort_by(|a, b| {
            for (i, o) in q.order_by.iter().enumerate() {
                let c = order(&a.0[i], &b.0[i]);
                let c = if o.desc { c.reverse() } else { c };
                if c != Ordering::Equal {
                    return c;
                }
            }
            Ordering::Equal
        });
        out.into_iter()
            .map(|(_, v)| v)
            .skip(q.offset as usize)
            .take(q.limit.map_or(usize::MAX, |l| l as usize))
            .collect()
    }
}

fn aggregate(
    f: &Frame,
    g: &[Row],
    func: AggFunc,
    arg: Option<&ColumnRef>,
    ty: ColumnType,
) -> Value {
    let Some(c) = arg else {
        return Value::Int64(g.len() as i64);
    };
    let vals: Vec<Value> = g
        .iter()
        .map(|r| f.get(r, c))
        .filter(|v| !v.is_null())
        .collect();
    let float = c.ty == ColumnType::Float32;
    match func {
        AggFunc::Count => Value::Int64(vals.len() as i64),
        AggFunc::CountDistinct => {
            let mut seen: Vec<Value> = Vec::new();
            for v in vals {
                if !seen.iter().any(|s| compare(s, &v) == Some(Ordering::Equal)) {
                    seen.push(v);
                }
            }
            Value::Int64(seen.len() as i64)
        }
        _ if vals.is_empty() => Value::Null,
        AggFunc::Sum if float => Value::Float32(vals.iter().map(num).sum::<f64>() as f32),
        AggFunc::Sum => Value::Int64(
            vals.iter()
                .fold(0i64, |s, v| s.wrapping_add(v.as_i64().unwrap())),
        ),
        AggFunc::Avg if float => {
            Value::Float32((vals.iter().map(num).sum::<f64>() / vals.len() as f64) as f32)
        }
        AggFunc::Avg => {
            let s: i128 = vals.iter().map(|v| v.as_i64().unwrap() as i128).sum();
            Value::Float32((s as f64 / vals.len() as f64) as f32)
        }
        AggFunc::Min | AggFunc::Max => {
            let pick = vals
                .into_iter()
                .reduce(|a, b| {
                    let o = compare(&b, &a).unwrap();
                    let better = if func == AggFunc::Min {
                        o == Ordering::Less
                    } else {
                        o == Ordering::Greater
                    };
                    if better {
                        b
                    } else {
                        a
                    }
                })
                .unwrap();
            debug_assert_eq!(pick.column_type(), Some(ty));
            pick
        }
    }
}
