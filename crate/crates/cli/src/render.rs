use std::io::{self, Write};

use clap::ValueEnum;
use snel::{QueryResult, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// `|`-separated fields, no header.
    Delimited,
    /// Padded columns under a header.
    Aligned,
}

fn cell(v: &Value) -> String {
    v.to_string()
}

pub fn write_result(out: &mut impl Write, result: &QueryResult, format: Format) -> io::Result<()> {
    match format {
        Format::Delimited => {
            for row in &result.rows {
                let line: Vec<String> = row.iter().map(cell).collect();
                writeln!(out, "{}", line.join("|"))?;
            }
        }
        Format::Aligned => {
            let rows: Vec<Vec<String>> = result
                .rows
                .iter()
                .map(|r| r.iter().map(cell).collect())
                .collect();
            let mut widths: Vec<usize> = result.columns.iter().map(|c| c.chars().count()).collect();
            for r in &rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join(" | ")
                    .trim_end()
                    .to_string()
            };
            writeln!(out, "{}", line(&result.columns))?;
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            writeln!(out, "{}", rule.join("-+-"))?;
            for r in &rows {
                writeln!(out, "{}", line(r))?;
            }
            let n = rows.len();
            writeln!(out, "({n} row{})", if n == 1 { "" } else { "s" })?;
        }
    }
    Ok(())
}
