mod render;
mod repl;

use std::fs::File;
use std::io::{self, BufReader, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use render::{write_result, Format};
use repl::Input;
use snel::frontend::FrontendError;
use snel::ingest::{import_delimited, merge_tables, parse_snelschema, ImportOptions, IngestError};
use snel::storage::{load_table, SchemaDescriptor, StorageError};
use snel::{Database, Output};

#[derive(Parser)]
#[command(name = "snel", version, about = "Read-only columnar SQL engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a table from delimited text.
    Import(ImportArgs),
    /// Merge the rows of one table into another by key.
    Merge {
        /// Source table (`.snel` file).
        source: PathBuf,
        /// Destination table (`.snel` file), updated in place.
        dest: PathBuf,
        /// Key column present in both tables.
        key: String,
    },
    /// Run SQL against tables; reads statements from standard input when none are given.
    Query(QueryArgs),
    /// Print a table's schema.
    Info {
        /// Table schema (`.snel` file).
        table: PathBuf,
    },
}

#[derive(Args)]
struct ImportArgs {
    /// Field separator character.
    #[arg(short = 's', default_value = "|")]
    separator: String,
    /// Buffer size, in rows.
    #[arg(short = 'b', default_value_t = 100_000)]
    buffer_rows: usize,
    /// Reject malformed values instead of storing NULL.
    #[arg(long)]
    safe: bool,
    /// Representation of NULL fields.
    #[arg(long, default_value = "")]
    null_repr: String,
    /// Report progress on standard error.
    #[arg(short = 'v')]
    verbose: bool,
    table_name: String,
    schema_file: PathBuf,
    output_dir: PathBuf,
    /// Defaults to standard input.
    input_file: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    /// Table to expose, under the name recorded in its schema. Repeatable.
    #[arg(long = "table", value_name = "PATH")]
    tables: Vec<PathBuf>,
    /// Maximum threads for parallel aggregation; 1 disables it.
    #[arg(long)]
    max_threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Delimited)]
    format: Format,
    /// Print what each optimizer pass did to standard error.
    #[arg(long)]
    explain_passes: bool,
    /// SQL statements separated by `;`.
    sql: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Snel(#[from] snel::Error),
    /// Already shown to the user; only the exit code remains.
    #[error("statement failed")]
    Reported(u8),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Snel(e) if e.is_internal() => 2,
            CliError::Reported(code) => *code,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Snel(snel::Error::Frontend(FrontendError::Unsupported(what))) => {
                format!("not supported by engine: {what}")
            }
            other => other.to_string(),
        }
    }
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

fn separator(text: &str) -> Result<char, CliError> {
    let text = if text == "\\t" { "\t" } else { text };
    let mut chars = text.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(CliError::Usage(format!(
            "separator must be one character, got {text:?}"
        ))),
    }
}

fn import(args: ImportArgs) -> Result<(), CliError> {
    let mut schema = parse_snelschema(&read_file(&args.schema_file)?)?;
    schema.table_name = args.table_name;
    let opts = ImportOptions {
        separator: separator(&args.separator)?,
        buffer_rows: args.buffer_rows.max(1),
        safe: args.safe,
        null_repr: args.null_repr,
        verbose: args.verbose,
    };
    match &args.input_file {
        Some(p) => {
            let f = File::open(p).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })?;
            import_delimited(BufReader::new(f), &schema, &opts, &args.output_dir)?
        }
        None => import_delimited(io::stdin().lock(), &schema, &opts, &args.output_dir)?,
    };
    Ok(())
}

fn merge(source: PathBuf, dest: PathBuf, key: String) -> Result<(), CliError> {
    let source = load_table(&source)?;
    let dest = load_table(&dest)?;
    merge_tables(&source, &dest, &key)?;
    Ok(())
}

fn info(table: PathBuf) -> Result<(), CliError> {
    let s = SchemaDescriptor::read(&table)?;
    let mut out = io::stdout().lock();
    let mut lines = vec![
        format!("table: {}", s.table_name),
        format!("rows: {}", s.row_count),
    ];
    for c in &s.columns {
        let mut line = format!("{} {}", c.name, c.ty);
        if c.nullable {
            line += " NULLABLE";
        }
        if c.indexed {
            line += " INDEXED";
        }
        lines.push(line);
    }
    for l in lines {
        writeln!(out, "{l}").map_err(stdout_err)?;
    }
    Ok(())
}

fn stdout_err(source: io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        source,
    }
}

struct Session {
    db: Database,
    format: Format,
    explain_passes: bool,
}

impl Session {
    fn run(&self, sql: &str) -> Result<(), CliError> {
        if self.explain_passes {
            let (_, report) = self.db.plan(sql)?;
            eprint!("{report}");
        }
        let mut out = io::stdout().lock();
        match self.db.execute(sql)? {
            Output::Rows(r) => write_result(&mut out, &r, self.format),
            Output::Explain(text) => writeln!(out, "{text}"),
        }
        .and_then(|_| out.flush())
        .map_err(stdout_err)
    }
}

fn query(args: QueryArgs) -> Result<(), CliError> {
    let mut db = Database::open(&args.tables)?;
    if let Some(n) = args.max_threads {
        if n == 0 {
            return Err(CliError::Usage("--max-threads must be at least 1".into()));
        }
        db.set_max_lanes(n);
    }
    let session = Session {
        db,
        format: args.format,
        explain_passes: args.explain_passes,
    };
    if !args.sql.is_empty() {
        let mut buf = repl::StatementBuffer::default();
        let mut stmts = Vec::new();
        for text in &args.sql {
            stmts.extend(buf.push_line(text));
        }
        stmts.extend(buf.finish());
        for s in stmts {
            session.run(&s)?;
        }
        return Ok(());
    }

    let interactive = io::stdin().is_terminal();
    let mut worst = 0;
    repl::read_inputs(
        io::stdin().lock(),
        |fresh| {
            if interactive {
                print!("{}", if fresh { "snel> " } else { "   ...> " });
                let _ = io::stdout().flush();
            }
        },
        |input| match input {
            Input::Exit => false,
            Input::Command(cmd) => {
                eprintln!("error: unknown command {cmd} (use .exit to quit)");
                worst = worst.max(1);
                true
            }
            Input::Statement(sql) => {
                if let Err(e) = session.run(&sql) {
                    eprintln!("error: {}", e.message());
                    worst = worst.max(e.exit_code());
                }
                true
            }
        },
    )
    .map_err(|source| CliError::Io {
        path: "<stdin>".into(),
        source,
    })?;
    if worst > 0 && !interactive {
        return Err(CliError::Reported(worst));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Import(args) => import(args),
        Command::Merge { source, dest, key } => merge(source, dest, key),
        Command::Query(args) => query(args),
        Command::Info { table } => info(table),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Reported(_)) {
                eprintln!("error: {}", e.message());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
