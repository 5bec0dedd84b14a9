//! Randomized comparisons of the engine against the reference interpreter.

use std::cmp::Ordering;
use std::time::Instant;

use super::gen::{random_catalog, random_table, QueryGen};
use super::oracle::{compare, Oracle};
use super::same_rows;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use snel::engine::execute;
use snel::frontend::{compile_sql, Query};
use snel::optimizer::{
    optimize, pass1_optimize_joins, pass2_pushdown_constraints, pass3_apply_indexes,
    pass4_pushdown_sorts, pass5_eliminate_sorts, pass6_parallelize,
};
use snel::planner::{build_plan, explain, QueryPlan};
use snel::storage::Catalog;
use snel::Value;

/// Checks that `rows` is ordered by the query's ORDER BY keys, all of which are select fields.
fn check_sorted(q: &Query, rows: &[Vec<Value>]) -> Result<(), String> {
    let keys: Vec<(usize, bool)> = q
        .order_by
        .iter()
        .map(|o| {
            (
                q.fields.iter().position(|f| f.expr == o.expr).unwrap(),
                o.desc,
            )
        })
        .collect();
    for w in rows.windows(2) {
        for &(i, desc) in &keys {
            let (a, b) = (&w[0][i], &w[1][i]);
            let ord = match (a.is_null(), b.is_null()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Less,
                (false, true) => Ordering::Greater,
                _ => compare(a, b).unwrap(),
            };
            let ord = if desc { ord.reverse() } else { ord };
            match ord {
                Ordering::Less => break,
                Ordering::Greater => {
                    return Err(format!("out of order: {:?} then {:?}", w[0], w[1]))
                }
                Ordering::Equal => {}
            }
        }
    }
    Ok(())
}

fn check(q: &Query, got: Vec<Vec<Value>>, want: &[Vec<Value>]) -> Result<(), String> {
    same_rows(&got, want)?;
    check_sorted(q, &got)
}

type Pass = fn(&mut QueryPlan, &Catalog) -> usize;

const PASSES: [(&str, Pass); 6] = [
    ("joins", pass1_optimize_joins),
    ("pushdown", pass2_pushdown_constraints),
    ("indexes", pass3_apply_indexes),
    ("sort pushdown", pass4_pushdown_sorts),
    ("sort elimination", pass5_eliminate_sorts),
    ("parallelize", |p, c| pass6_parallelize(p, c, 4)),
];

struct Case {
    sql: String,
    query: Query,
    want: Vec<Vec<Value>>,
}

fn cases(catalog: &Catalog, rng: &mut StdRng, n: usize) -> Vec<Case> {
    let qgen = QueryGen { catalog };
    let oracle = Oracle::new(catalog);
    (0..n)
        .map(|_| {
            let sql = qgen.query(rng);
            let query = compile_sql(&sql, catalog).unwrap_or_else(|e| panic!("{sql}: {e}"));
            let want = oracle.run(&query);
            Case { sql, query, want }
        })
        .collect()
}

/// Returns the number of queries checked.
pub fn oracle_equivalence() -> usize {
    let start = Instant::now();
    let mut total = 0;
    for seed in 0..40u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let rows = if seed % 10 == 0 {
            10_000
        } else {
            rng.gen_range(0..2_000)
        };
        let catalog = random_catalog(&mut rng, rows);
        for c in cases(&catalog, &mut rng, 15) {
            let naive = build_plan(&c.query, &catalog);
            let (plan, _) = optimize(naive, &catalog, 4);
            let got = execute(&plan, &catalog, 4).unwrap_or_else(|e| panic!("{}: {e}", c.sql));
            if let Err(e) = check(&c.query, got, &c.want) {
                panic!("seed {seed}: {}\n{}\n{e}", c.sql, explain(&plan));
            }
            total += 1;
        }
    }
    assert!(total >= 500);
    println!("{total} queries in {:.1?}", start.elapsed());
    total
}

pub fn pass_soundness() {
    for seed in 100..120u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let rows = rng.gen_range(0..800);
        let catalog = random_catalog(&mut rng, rows);
        for c in cases(&catalog, &mut rng, 12) {
            let naive = build_plan(&c.query, &catalog);
            let got = execute(&naive, &catalog, 1).unwrap();
            check(&c.query, got, &c.want).unwrap_or_else(|e| panic!("naive {}\n{e}", c.sql));
            let mut chained = naive.clone();
            for (name, pass) in PASSES {
                let mut alone = naive.clone();
                pass(&mut alone, &catalog);
                let got = execute(&alone, &catalog, 4).unwrap();
                check(&c.query, got, &c.want).unwrap_or_else(|e| {
                    panic!("pass {name} alone: {}\n{}\n{e}", c.sql, explain(&alone))
                });
                pass(&mut chained, &catalog);
                let got = execute(&chained, &catalog, 4).unwrap();
                check(&c.query, got, &c.want).unwrap_or_else(|e| {
                    panic!("through pass {name}: {}\n{}\n{e}", c.sql, explain(&chained))
                });
            }
        }
    }
}

pub fn pass_idempotence() {
    for seed in 200..220u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let catalog = random_catalog(&mut rng, 100);
        for c in cases(&catalog, &mut rng, 10) {
            let (once, _) = optimize(build_plan(&c.query, &catalog), &catalog, 4);
            let (twice, report) = optimize(once.clone(), &catalog, 4);
            assert_eq!(once, twice, "{}", c.sql);
            assert_eq!(report.total(), 0, "{}", c.sql);
        }
    }
}

pub fn lane_invariance() {
    for seed in 300..315u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let rows = rng.gen_range(0..5_000);
        let catalog = random_catalog(&mut rng, rows);
        for c in cases(&catalog, &mut rng, 12) {
            let (plan, _) = optimize(build_plan(&c.query, &catalog), &catalog, 8);
            for lanes in [1, 2, 4, 8] {
                let got = execute(&plan, &catalog, lanes).unwrap();
                check(&c.query, got, &c.want)
                    .unwrap_or_else(|e| panic!("lanes={lanes} {}\n{e}", c.sql));
            }
        }
    }
}

pub fn index_equivalence() {
    let ops = ["=", "<", "<=", ">", ">="];
    let mut rng = StdRng::seed_from_u64(7);
    for round in 0..30 {
        let rows = rng.gen_range(0..3_000);
        let table = random_table(&mut rng, "t0", rows, 3);
        let ty = table.schema().columns[0].ty;
        let catalog = Catalog::new().with(table);
        let oracle = Oracle::new(&catalog);
        for _ in 0..10 {
            let lit = match super::gen::random_value(&mut rng, ty) {
                Value::Str(s) => format!("'{s}'"),
                Value::Bool(b) => (b as u8).to_string(),
                v => v.to_string(),
            };
            let op = ops[rng.gen_range(0..ops.len())];
            let sql =
                format!("SELECT c0, c1 FROM t0 WHERE c0 {op} {lit} AND c1 = c1 OR c0 {op} {lit}");
            let sql = if round % 2 == 0 {
                sql
            } else {
                format!("SELECT c0, c1 FROM t0 WHERE c0 {op} {lit}")
            };
            let q = compile_sql(&sql, &catalog).unwrap();
            let (plan, _) = optimize(build_plan(&q, &catalog), &catalog, 1);
            if round % 2 == 1 {
                assert!(explain(&plan).contains("INDEX SCAN"), "{sql}");
            }
            let got = execute(&plan, &catalog, 1).unwrap();
            same_rows(&got, &oracle.run(&q)).unwrap_or_else(|e| panic!("{sql}: {e}"));
        }
    }
}
