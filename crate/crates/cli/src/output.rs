//! CSV serialization: a `#` header with the full configuration, one column
//! line, data rows, then `#` summary lines. Line feeds only; reals carry
//! 17 significant digits.

use std::io::Write;
use std::path::Path;

use ldrate::format_float;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// `key=value` lines written after the rows.
    pub summary: Vec<String>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }
}

/// Column names for a state vector: `x` in one dimension, `x1..xd` otherwise.
pub fn state_columns(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=dim).map(|i| format!("{prefix}{i}")).collect()
    }
}

pub fn render(config: &RunConfig, report: &Report) -> String {
    let mut out = format!("# ldrate {}\n", config.command);
    for (k, v) in config.header_pairs() {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out.push_str(&report.columns.join(","));
    out.push('\n');
    for row in &report.rows {
        let cells: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    for line in &report.summary {
        out.push_str(&format!("# {line}\n"));
    }
    out
}

/// Writes the CSV to `config.output`, or to standard output.
pub fn emit(config: &RunConfig, report: &Report) -> Result<(), CliError> {
    let text = render(config, report);
    match &config.output {
        Some(path) => write_file(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
