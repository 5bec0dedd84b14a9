//! Runs every acceptance criterion in turn and prints one PASS/FAIL line for each.

mod common;

use std::io::Cursor;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use common::oracle::Oracle;
use common::suites;
use snel::engine::{compile, VarValue};
use snel::frontend::compile_sql;
use snel::ingest::{import_delimited, merge_tables, parse_snelschema, ImportOptions};
use snel::optimizer::optimize;
use snel::planner::build_plan;
use snel::storage::{
    load_table, write_fixed_column, write_table, write_text_column, Catalog, ColumnDescriptor,
    FixedColumnWriter, Index, RowId, SchemaDescriptor, Table, TablePaths,
};
use snel::{ColumnType, Database, Value};

fn oracle_equivalence() -> String {
    format!("{} randomized queries agree", suites::oracle_equivalence())
}

fn optimizer_soundness() -> String {
    suites::pass_soundness();
    suites::pass_idempotence();
    "each pass alone and chained preserves results; optimize is idempotent".into()
}

fn index_correctness() -> String {
    suites::index_equivalence();
    "index scans equal full scans for =, <, <=, >, >=".into()
}

fn parallel_invariance() -> String {
    suites::lane_invariance();
    "lanes 1, 2, 4, 8 agree".into()
}

fn le(v: i64) -> [u8; 8] {
    v.to_le_bytes()
}

fn format_goldens() -> String {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t-s.snelcol");
    write_text_column(&p, &[Some("ab"), None, Some("")]).unwrap();
    let mut want = b"ab\0\0SB".to_vec();
    want.extend(le(0));
    want.extend(le(-1));
    want.extend(le(3));
    want.extend(le(6));
    assert_eq!(std::fs::read(&p).unwrap(), want, "text column bytes");

    let fixed = [
        (ColumnType::Bool, Value::Bool(true)),
        (ColumnType::Int8, Value::Int8(-3)),
        (ColumnType::Int16, Value::Int16(300)),
        (ColumnType::Int32, Value::Int32(-70000)),
        (ColumnType::Int64, Value::Int64(1 << 40)),
        (ColumnType::Float32, Value::Float32(1.5)),
    ];
    for (ty, v) in fixed {
        let width = ty.fixed_width().unwrap();
        assert_eq!(Index::entry_size(ty), width + 8, "{ty} entry size");
        let table = Table::from_values(
            "t",
            vec![(ColumnDescriptor::new("c", ty).indexed(), vec![v.clone(); 5])],
        )
        .unwrap();
        assert_eq!(
            table.index("c").unwrap().to_bytes().len(),
            5 * (width + 8),
            "{ty} index"
        );
        let p = dir.path().join(format!("f-{ty}.snelcol"));
        write_fixed_column(&p, ty, false, &[v]).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, width);
    }

    let mut schema =
        parse_snelschema("mdn STRING INDEXED,\neye_color INT8 NULLABLE,\nheight FLOAT NULLABLE")
            .unwrap();
    schema.table_name = "new_variables".into();
    import_delimited(
        Cursor::new(NEW_VARIABLES),
        &schema,
        &ImportOptions::default(),
        dir.path(),
    )
    .unwrap();
    let db = Database::open(&[dir.path().join("new_variables.snel")]).unwrap();
    let heights: Vec<Value> = db
        .query("SELECT height FROM new_variables")
        .unwrap()
        .rows
        .into_iter()
        .map(|mut r| r.remove(0))
        .collect();
    assert_eq!(heights, [1.77, 1.52, 1.85].map(Value::Float32).to_vec());
    "text layout, index entry sizes and imported heights 1.77, 1.52, 1.85".into()
}

const NEW_VARIABLES: &str = "B0A00F35B1F5DEAD84DB2D28BD883094|0|1.77
9386711E612687A86DF876B7D76FB514|2|1.52
3328EFF2A02D215A16F52F46A83CAE1B|3|1.85
";

fn merge_behavior() -> String {
    let src = tempfile::tempdir().unwrap();
    let dst = tempfile::tempdir().unwrap();
    let mut schema =
        parse_snelschema("mdn STRING INDEXED, eye_color INT8 NULLABLE, height FLOAT NULLABLE")
            .unwrap();
    schema.table_name = "new_variables".into();
    let source = import_delimited(
        Cursor::new(NEW_VARIABLES),
        &schema,
        &ImportOptions::default(),
        src.path(),
    )
    .unwrap();
    let mdns = [
        "9386711E612687A86DF876B7D76FB514",
        "00000000000000000000000000000000",
        "B0A00F35B1F5DEAD84DB2D28BD883094",
        "3328EFF2A02D215A16F52F46A83CAE1B",
    ];
    let clients = SchemaDescriptor::new(
        "clients",
        vec![
            ColumnDescriptor::new("mdn", ColumnType::String).indexed(),
            ColumnDescriptor::new("height", ColumnType::Float32).nullable(),
        ],
    );
    let dest = write_table(
        dst.path(),
        &clients,
        &[
            mdns.iter().map(|m| Value::Str(m.to_string())).collect(),
            vec![Value::Float32(2.0); 4],
        ],
    )
    .unwrap();
    let merged = merge_tables(&source, &dest, "mdn").unwrap();
    let col = |t: &Table, c: &str| -> Vec<Value> {
        let c = t.column(c).unwrap();
        (0..t.row_count())
            .map(|r| c.value(RowId(r)).unwrap())
            .collect()
    };
    assert!(merged.descriptor("eye_color").unwrap().nullable);
    assert_eq!(
        col(&merged, "eye_color"),
        vec![Value::Int8(2), Value::Null, Value::Int8(0), Value::Int8(3)]
    );
    assert_eq!(
        col(&merged, "height"),
        [1.52, 2.0, 1.77, 1.85].map(Value::Float32).to_vec()
    );
    let snapshot = |dir: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.clone(), std::fs::read(p).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let once = snapshot(dst.path());
    merge_tables(&source, &merged, "mdn").unwrap();
    assert_eq!(snapshot(dst.path()), once, "second merge changed files");
    "eye_color added as nullable, heights updated, second merge leaves files identical".into()
}

fn explain_golden() -> String {
    let mut s = SchemaDescriptor::new(
        "table1",
        vec![ColumnDescriptor::new("int8col1", ColumnType::Int8)],
    );
    s.row_count = 100_000_000;
    let catalog = Catalog::new().with(Table::from_schema(s));
    let mut db = Database::new(catalog);
    db.set_max_lanes(1);
    let got = db
        .explain("SELECT COUNT(*) FROM table1 WHERE int8col1 > 3")
        .unwrap();
    let want = "AGGREGATE (cost: 100000000) { CONSTRAINT [table1.int8col1 > 3] { FULL SCAN FOR TABLE 'table1' (100000000 rows) } }";
    assert_eq!(got, want);
    got
}

fn limit_semantics() -> String {
    let t = Table::from_values(
        "t",
        vec![(
            ColumnDescriptor::new("a", ColumnType::Int32),
            (1..=3).map(Value::Int32).collect(),
        )],
    )
    .unwrap();
    let catalog = Catalog::new().with(t);
    let cases: [(&str, usize, u64); 5] = [
        ("SELECT a FROM t LIMIT 0", 0, 0),
        ("SELECT a FROM t LIMIT 2", 2, 2),
        ("SELECT a FROM t LIMIT 3", 3, 3),
        ("SELECT a FROM t LIMIT 10", 3, 3),
        ("SELECT a FROM t LIMIT 10 OFFSET 2", 1, 3),
    ];
    for (sql, rows, counter) in cases {
        let q = compile_sql(sql, &catalog).unwrap();
        let plan = optimize(build_plan(&q, &catalog), &catalog, 1).0;
        let mut cq = compile(&plan, &catalog, 1).unwrap();
        assert!(
            matches!(
                cq.context().initial_value("Limit.currentPosition"),
                Some(VarValue::Counter(0))
            ),
            "{sql}: counter not registered"
        );
        cq.init().unwrap();
        let mut n = 0;
        while cq.fetch_row().unwrap() {
            n += 1;
            assert_eq!(cq.row().len(), 1);
        }
        assert_eq!(n, rows, "{sql}");
        assert!(!cq.fetch_row().unwrap(), "{sql}: row after EOF");
        assert_eq!(
            cq.context().get::<u64>("Limit.currentPosition"),
            Some(&counter),
            "{sql}"
        );
        cq.destroy();
    }
    "LIMIT 0, boundary and over-limit inputs; counter variable tracks rows".into()
}

fn performance_smoke() -> String {
    const ROWS: u64 = 10_000_000;
    let dir = tempfile::tempdir().unwrap();
    let paths = TablePaths::new(dir.path(), "t");
    let mut w = FixedColumnWriter::create(&paths.column("x"), ColumnType::Int64, false).unwrap();
    let mut sum = 0i64;
    for i in 0..ROWS {
        let v = (i as i64 * 7919) % 1000 - 500;
        sum += v;
        w.push(&Value::Int64(v)).unwrap();
    }
    w.finish().unwrap();
    let mut schema =
        SchemaDescriptor::new("t", vec![ColumnDescriptor::new("x", ColumnType::Int64)]);
    schema.row_count = ROWS;
    schema.write(&paths.schema()).unwrap();
    let db = Database::new(Catalog::new().with(load_table(&paths.schema()).unwrap()));
    let sql = "SELECT SUM(x) FROM t";

    let start = Instant::now();
    let fused = db.query(sql).unwrap().rows;
    let engine = start.elapsed();

    let q = compile_sql(sql, db.catalog()).unwrap();
    let start = Instant::now();
    let naive = Oracle::new(db.catalog()).run(&q);
    let oracle = start.elapsed();

    assert_eq!(fused, vec![vec![Value::Int64(sum)]]);
    assert_eq!(naive, fused);
    let ratio = oracle.as_secs_f64() / engine.as_secs_f64();
    let detail = format!(
        "engine {:.3}s, interpreter {:.3}s, speedup {ratio:.1}x",
        engine.as_secs_f64(),
        oracle.as_secs_f64()
    );
    assert!(ratio >= 1.2, "{detail}");
    detail
}

type Criterion = (&'static str, fn() -> String);

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("optimizer soundness", optimizer_soundness),
        ("index correctness", index_correctness),
        ("parallel invariance", parallel_invariance),
        ("format goldens", format_goldens),
        ("merge behavior", merge_behavior),
        ("EXPLAIN golden", explain_golden),
        ("LIMIT semantics", limit_semantics),
        ("performance smoke", performance_smoke),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!(
                "criterion {} PASS {name} ({:.1?}): {detail}",
                i + 1,
                start.elapsed()
            ),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {} FAIL {name}: {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
