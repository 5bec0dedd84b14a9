//! Random tables and random SQL over them.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use snel::storage::{Catalog, ColumnDescriptor, Table};
use snel::{ColumnType, Value};

const TYPES: [ColumnType; 7] = [
    ColumnType::Bool,
    ColumnType::Int8,
    ColumnType::Int16,
    ColumnType::Int32,
    ColumnType::Int64,
    ColumnType::Float32,
    ColumnType::String,
];

const WORDS: [&str; 8] = ["a", "ab", "b", "ba", "c", "cab", "zz", "Q"];

pub fn random_value(rng: &mut StdRng, ty: ColumnType) -> Value {
    match ty {
        ColumnType::Bool => Value::Bool(rng.gen()),
        ColumnType::Int8 => Value::Int8(rng.gen_range(-12..12)),
        ColumnType::Int16 => Value::Int16(rng.gen_range(-30..30)),
        ColumnType::Int32 => Value::Int32(rng.gen_range(-40..40)),
        ColumnType::Int64 => Value::Int64(rng.gen_range(-60..60)),
        ColumnType::Float32 => Value::Float32(rng.gen_range(-40..40) as f32 / 4.0),
        ColumnType::String => Value::Str(WORDS.choose(rng).unwrap().to_string()),
    }
}

/// A table `name` with columns `c0..` of random types; the first column is always indexed.
pub fn random_table(rng: &mut StdRng, name: &str, rows: usize, cols: usize) -> Table {
    let columns = (0..cols)
        .map(|i| {
            let ty = *TYPES.choose(rng).unwrap();
            let mut d = ColumnDescriptor::new(format!("c{i}"), ty);
            d.nullable = rng.gen_bool(0.5);
            d.indexed = i == 0 || rng.gen_bool(0.4);
            let values = (0..rows)
                .map(|_| {
                    if d.nullable && rng.gen_bool(0.15) {
                        Value::Null
                    } else {
                        random_value(rng, ty)
                    }
                })
                .collect();
            (d, values)
        })
        .collect();
    Table::from_values(name, columns).unwrap()
}

/// One big table `t0` and two small ones `t1`, `t2`.
pub fn random_catalog(rng: &mut StdRng, big_rows: usize) -> Catalog {
    let small = rng.gen_range(0..60);
    let small2 = rng.gen_range(0..60);
    let n0 = rng.gen_range(2..=6);
    let n1 = rng.gen_range(2..=6);
    let n2 = rng.gen_range(2..=6);
    Catalog::new()
        .with(random_table(rng, "t0", big_rows, n0))
        .with(random_table(rng, "t1", small, n1))
        .with(random_table(rng, "t2", small2, n2))
}

#[derive(Clone)]
struct Col {
    name: String,
    ty: ColumnType,
}

fn columns(catalog: &Catalog, tables: &[&str]) -> Vec<Col> {
    tables
        .iter()
        .flat_map(|t| {
            catalog
                .get(t)
                .unwrap()
                .schema()
                .columns
                .iter()
                .map(move |d| Col {
                    name: format!("{t}.{}", d.name),
                    ty: d.ty,
                })
        })
        .collect()
}

fn literal(rng: &mut StdRng, ty: ColumnType) -> String {
    match ty {
        ColumnType::String => format!("'{}'", WORDS.choose(rng).unwrap()),
        ColumnType::Bool => rng.gen_range(0..2).to_string(),
        _ if rng.gen_bool(0.3) => format!("{:.2}", rng.gen_range(-40..40) as f32 / 4.0),
        _ => rng.gen_range(-40..40).to_string(),
    }
}

const OPS: [&str; 7] = ["=", "!=", "<", "<=", ">", ">=", "<>"];

pub struct QueryGen<'a> {
    pub catalog: &'a Catalog,
}

impl QueryGen<'_> {
    fn predicate(&self, rng: &mut StdRng, cols: &[Col], tables: &[&str], depth: u32) -> String {
        if depth > 0 && rng.gen_bool(0.45) {
            let l = self.predicate(rng, cols, tables, depth - 1);
            return match rng.gen_range(0..3) {
                0 => format!("({l} AND {})", self.predicate(rng, cols, tables, depth - 1)),
                1 => format!("({l} OR {})", self.predicate(rng, cols, tables, depth - 1)),
                _ => format!("NOT ({l})"),
            };
        }
        let c = cols.choose(rng).unwrap();
        let numeric = c.ty != ColumnType::String;
        match rng.gen_range(0..10) {
            0 => {
                let others: Vec<&Col> = cols
                    .iter()
                    .filter(|o| (o.ty != ColumnType::String) == numeric)
                    .collect();
                let o = others.choose(rng).unwrap();
                format!("{} {} {}", c.name, OPS.choose(rng).unwrap(), o.name)
            }
            1 => {
                let (a, b) = (literal(rng, c.ty), literal(rng, c.ty));
                format!("{} BETWEEN {a} AND {b}", c.name)
            }
            2 => {
                let src = ["t0", "t1", "t2"]
                    .into_iter()
                    .filter(|t| *t != "t0" && !tables.contains(t))
                    .collect::<Vec<_>>();
                let Some(sub) = src.choose(rng) else {
                    return format!("{} = {}", c.name, literal(rng, c.ty));
                };
                let sub_cols: Vec<Col> = columns(self.catalog, &[sub])
                    .into_iter()
                    .filter(|o| (o.ty != ColumnType::String) == numeric)
                    .collect();
                let Some(s) = sub_cols.choose(rng) else {
                    return format!("{} = {}", c.name, literal(rng, c.ty));
                };
                let all = columns(self.catalog, &[sub]);
                let filter = if rng.gen_bool(0.5) {
                    format!(" WHERE {}", self.predicate(rng, &all, &[sub], 0))
                } else {
                    String::new()
                };
                format!("{} IN (SELECT {} FROM {sub}{filter})", c.name, s.name)
            }
            _ => format!(
                "{} {} {}",
                c.name,
                OPS.choose(rng).unwrap(),
                literal(rng, c.ty)
            ),
        }
    }

    /// A random SELECT the engine is expected to support.
    pub fn query(&self, rng: &mut StdRng) -> String {
        let tables: Vec<&str> = match rng.gen_range(0..10) {
            0..=4 => vec!["t0"],
            5..=7 => vec!["t1"],
            _ => vec!["t1", "t2"],
        };
        let cols = columns(self.catalog, &tables);
        let mut fields: Vec<String> = Vec::new();
        let mut group: Vec<String> = Vec::new();
        let mut distinct = false;
        let numeric: Vec<&Col> = cols.iter().filter(|c| c.ty != ColumnType::String).collect();
        match rng.gen_range(0..10) {
            0..=3 => {
                for _ in 0..rng.gen_range(1..=3) {
                    fields.push(cols.choose(rng).unwrap().name.clone());
                }
            }
            4..=8 => {
                if rng.gen_bool(0.25) && !numeric.is_empty() {
                    let c = &numeric.choose(rng).unwrap().name;
                    let n = rng.gen_range(1..6);
                    fields.push(format!("BIN({c}, {n})"));
                    group.push("f0".into());
                    if rng.gen_bool(0.5) {
                        fields.push(format!("BIN_MIN({c})"));
                    }
                    if rng.gen_bool(0.5) {
                        fields.push(format!("BIN_MAX({c})"));
                    }
                } else {
                    for _ in 0..rng.gen_range(0..=2) {
                        let c = cols.choose(rng).unwrap().name.clone();
                        if !fields.contains(&c) {
                            group.push(c.clone());
                            fields.push(c);
                        }
                    }
                }
                for _ in 0..rng.gen_range(1..=3) {
                    let c = cols.choose(rng).unwrap();
                    let agg = match rng.gen_range(0..7) {
                        0 => "COUNT(*)".to_string(),
                        1 => format!("COUNT({})", c.name),
                        2 => format!("COUNT(DISTINCT {})", c.name),
                        3 => format!("MIN({})", c.name),
                        4 => format!("MAX({})", c.name),
                        5 if c.ty != ColumnType::String => format!("SUM({})", c.name),
                        6 if c.ty != ColumnType::String => format!("AVG({})", c.name),
                        _ => "COUNT(*)".to_string(),
                    };
                    fields.push(agg);
                }
            }
            _ => {
                distinct = true;
                for _ in 0..rng.gen_range(1..=2) {
                    let c = cols.choose(rng).unwrap().name.clone();
                    if !fields.contains(&c) {
                        fields.push(c);
                    }
                }
            }
        }
        let select: Vec<String> = fields
            .iter()
            .enumerate()
            .map(|(i, f)| format!("{f} AS f{i}"))
            .collect();
        let mut sql = format!(
            "SELECT {}{} FROM {}",
            if distinct { "DISTINCT " } else { "" },
            select.join(", "),
            tables.join(", ")
        );
        if tables.len() == 2 && rng.gen_bool(0.6) {
            let l = &columns(self.catalog, &["t1"])[0];
            let r = columns(self.catalog, &["t2"])
                .into_iter()
                .find(|c| (c.ty != ColumnType::String) == (l.ty != ColumnType::String));
            if let Some(r) = r {
                sql += &format!(" WHERE {} = {}", l.name, r.name);
                if rng.gen_bool(0.5) {
                    sql += &format!(" AND {}", self.predicate(rng, &cols, &tables, 1));
                }
            }
        } else if rng.gen_bool(0.7) {
            sql += &format!(" WHERE {}", self.predicate(rng, &cols, &tables, 2));
        }
        if !group.is_empty() {
            sql += &format!(" GROUP BY {}", group.join(", "));
        }
        if rng.gen_bool(0.4) {
            let limit = rng.gen_bool(0.5);
            let mut keys: Vec<String> = (0..fields.len())
                .map(|i| {
                    let dir = if rng.gen_bool(0.3) { " DESC" } else { "" };
                    format!("f{i}{dir}")
                })
                .collect();
            keys.shuffle(rng);
            if !limit {
                keys.truncate(rng.gen_range(1..=keys.len()));
            }
            sql += &format!(" ORDER BY {}", keys.join(", "));
            if limit {
                sql += &format!(" LIMIT {}", rng.gen_range(0..20));
                if rng.gen_bool(0.5) {
                    sql += &format!(" OFFSET {}", rng.gen_range(0..10));
                }
            }
        }
        sql
    }
}
