use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

const SCHEMA: &str = "mdn STRING INDEXED,\neye_color INT8 NULLABLE,\nheight FLOAT NULLABLE\n";
const CSV: &str = "B0A00F35B1F5DEAD84DB2D28BD883094|0|1.77
9386711E612687A86DF876B7D76FB514|2|1.52
3328EFF2A02D215A16F52F46A83CAE1B|3|1.85
";

fn snel(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_snel"))
        .args(args)
        .env_remove("SNEL_DUMP_PLAN")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Imports the example table into `dir` and returns its schema path.
fn import_example(dir: &Path) -> String {
    let schema = dir.join("new_variables.snelschema");
    std::fs::write(&schema, SCHEMA).unwrap();
    let out = dir.join("nv");
    let o = snel(&["import", "new_variables", s(&schema), s(&out)], CSV);
    assert!(o.status.success(), "{}", stderr(&o));
    s(&out.join("new_variables.snel")).to_string()
}

#[test]
fn import_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let table = import_example(dir.path());
    for f in [
        "new_variables-mdn.snelcol",
        "new_variables-mdn.snelidx",
        "new_variables-height.snelnull",
    ] {
        assert!(dir.path().join("nv").join(f).exists(), "{f}");
    }
    let o = snel(
        &[
            "query",
            "--table",
            &table,
            "SELECT COUNT(*) FROM new_variables",
        ],
        "",
    );
    assert_eq!(stdout(&o), "3\n");
    let o = snel(
        &[
            "query",
            "--table",
            &table,
            "SELECT eye_color, height FROM new_variables WHERE eye_color > 0",
        ],
        "",
    );
    assert_eq!(stdout(&o), "2|1.52\n3|1.85\n");
}

#[test]
fn import_options_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let schema = dir.path().join("s.snelschema");
    std::fs::write(&schema, "a INT, b TEXT NULLABLE").unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(&input, "1,x\n2,NA\n").unwrap();
    let o = snel(
        &[
            "import",
            "-s",
            ",",
            "--null-repr",
            "NA",
            "t",
            s(&schema),
            s(dir.path()),
            s(&input),
        ],
        "",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = snel(
        &[
            "query",
            "--table",
            s(&dir.path().join("t.snel")),
            "SELECT a, b FROM t",
        ],
        "",
    );
    assert_eq!(stdout(&o), "1|x\n2|NULL\n");

    let o = snel(
        &["import", "t", s(&dir.path().join("missing")), s(dir.path())],
        "",
    );
    assert_eq!(o.status.code(), Some(1));
    let o = snel(
        &["import", "--safe", "t", s(&schema), s(dir.path())],
        "x|y\n",
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));
    let o = snel(&["import", "t", s(&schema), s(dir.path())], "1|a|b\n");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn merge_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let source = import_example(dir.path());
    let clients_schema = dir.path().join("clients.snelschema");
    std::fs::write(&clients_schema, "mdn STRING INDEXED, height FLOAT NULLABLE").unwrap();
    let cdir = dir.path().join("clients");
    let rows = "9386711E612687A86DF876B7D76FB514|1.5\nFFFF|1.5\n";
    let o = snel(&["import", "clients", s(&clients_schema), s(&cdir)], rows);
    assert!(o.status.success());
    let dest = s(&cdir.join("clients.snel")).to_string();
    for _ in 0..2 {
        let o = snel(&["merge", &source, &dest, "mdn"], "");
        assert!(o.status.success(), "{}", stderr(&o));
        let o = snel(
            &[
                "query",
                "--table",
                &dest,
                "SELECT mdn, eye_color, height FROM clients",
            ],
            "",
        );
        assert_eq!(
            stdout(&o),
            "9386711E612687A86DF876B7D76FB514|2|1.52\nFFFF|NULL|1.5\n"
        );
    }
    let o = snel(&["merge", &source, &dest, "nope"], "");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn explain_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let schema = dir.path().join("s.snelschema");
    std::fs::write(&schema, "int8col1 INT8").unwrap();
    let data: String = (0..10).map(|i| format!("{i}\n")).collect();
    let o = snel(&["import", "table1", s(&schema), s(dir.path())], &data);
    assert!(o.status.success());
    let table = s(&dir.path().join("table1.snel")).to_string();
    let sql = "EXPLAIN QUERY PLAN SELECT COUNT(*) FROM table1 WHERE int8col1 > 3";
    let o = snel(&["query", "--max-threads", "1", "--table", &table, sql], "");
    assert_eq!(
        stdout(&o),
        "AGGREGATE (cost: 10) { CONSTRAINT [table1.int8col1 > 3] { FULL SCAN FOR TABLE 'table1' (10 rows) } }\n"
    );
    let o = snel(&["query", "--max-threads", "4", "--table", &table, sql], "");
    assert!(
        stdout(&o).starts_with("PARALLEL AGGREGATE"),
        "{}",
        stdout(&o)
    );
    let o = snel(
        &[
            "query",
            "--max-threads",
            "4",
            "--table",
            &table,
            "SELECT COUNT(*) FROM table1 WHERE int8col1 > 3",
        ],
        "",
    );
    assert_eq!(stdout(&o), "6\n");
    let o = snel(
        &[
            "query",
            "--explain-passes",
            "--max-threads",
            "4",
            "--table",
            &table,
            "SELECT COUNT(*) FROM table1",
        ],
        "",
    );
    assert!(
        stderr(&o).contains("6. parallelize: fired"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn query_errors() {
    let dir = tempfile::tempdir().unwrap();
    let table = import_example(dir.path());
    let o = snel(
        &[
            "query",
            "--table",
            &table,
            "SELECT height FROM new_variables HAVING 1",
        ],
        "",
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("not supported by engine"),
        "{}",
        stderr(&o)
    );
    let o = snel(&["query", "--table", &table, "SELECT FROM"], "");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1, column 8"), "{}", stderr(&o));
    let o = snel(&["query", "--table", &table, "SELECT x FROM nowhere"], "");
    assert_eq!(o.status.code(), Some(1));
    let o = snel(
        &[
            "query",
            "--table",
            s(&dir.path().join("missing.snel")),
            "SELECT 1",
        ],
        "",
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repl_reads_statements() {
    let dir = tempfile::tempdir().unwrap();
    let table = import_example(dir.path());
    let input =
        "SELECT COUNT(*)\n  FROM new_variables;\nSELECT MAX(eye_color) FROM new_variables; .exit\n";
    let o = snel(&["query", "--table", &table], input);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "3\n3\n");
    let o = snel(
        &["query", "--table", &table],
        "SELECT COUNT(*) FROM new_variables;\n.exit\nSELECT 1;\n",
    );
    assert_eq!(stdout(&o), "3\n");
    let o = snel(
        &["query", "--table", &table],
        "SELECT nope FROM new_variables;\nSELECT COUNT(*) FROM new_variables;\n",
    );
    assert_eq!(stdout(&o), "3\n");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn info_lists_schema() {
    let dir = tempfile::tempdir().unwrap();
    let table = import_example(dir.path());
    let o = snel(&["info", &table], "");
    assert_eq!(
        stdout(&o),
        "table: new_variables\nrows: 3\nmdn STRING INDEXED\neye_color INT8 NULLABLE\nheight FLOAT32 NULLABLE\n"
    );
    let schema = dir.path().join("e.snelschema");
    std::fs::write(&schema, "a INT").unwrap();
    snel(&["import", "empty", s(&schema), s(dir.path())], "");
    let o = snel(&["info", s(&dir.path().join("empty.snel"))], "");
    assert!(stdout(&o).contains("rows: 0\n"));
    let o = snel(&["info", s(&dir.path().join("missing.snel"))], "");
    assert_eq!(o.status.code(), Some(1));
}
