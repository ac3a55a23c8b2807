//! File formats: Matrix Market input, curve/report CSV and plan JSON output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::blocking::BlockingPlan;
use crate::csc::{CscMatrix, Triplet};
use crate::error::{Error, Result};
use crate::features::PercentCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_header(line: &str) -> Result<(Field, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::UnsupportedField(line.trim().to_string()));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::UnsupportedField(format!("format '{}'", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(Error::UnsupportedField(format!("field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(Error::UnsupportedField(format!("symmetry '{other}'"))),
    };
    Ok((field, symmetry))
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedEntry {
        line,
        reason: reason.into(),
    }
}

/// Reads a square coordinate Matrix Market file into CSC form.
///
/// Duplicates are summed, symmetric storage is mirrored, and pattern files get
/// unit values.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CscMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses Matrix Market text from any buffered reader.
pub fn parse_matrix_market(reader: impl BufRead) -> Result<CscMatrix> {
    let mut lines = reader.lines().enumerate();
    let (field, symmetry) = match lines.next() {
        Some((_, line)) => parse_header(&line.map_err(|e| Error::io("<input>", e))?)?,
        None => return Err(Error::UnsupportedField("empty input".into())),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut declared = 0usize;
    let mut entries = Vec::new();
    let mut seen = 0usize;
    for (k, line) in lines {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if tokens.len() != 3 {
                    return Err(malformed(line_no, "size line needs rows, cols, nnz"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| malformed(line_no, format!("bad size token '{s}'")))
                };
                let (rows, cols) = (parse(tokens[0])?, parse(tokens[1])?);
                declared = parse(tokens[2])?;
                if rows != cols {
                    return Err(Error::NonSquare { rows, cols });
                }
                if rows == 0 {
                    return Err(Error::EmptyMatrix);
                }
                size = Some((rows, cols));
                entries.reserve(declared * if symmetry == Symmetry::Symmetric { 2 } else { 1 });
            }
            Some((n, _)) => {
                let expected = if field == Field::Pattern { 2 } else { 3 };
                if tokens.len() != expected {
                    return Err(malformed(
                        line_no,
                        format!("expected {expected} tokens, found {}", tokens.len()),
                    ));
                }
                let index = |s: &str| -> Result<usize> {
                    let v = s
                        .parse::<usize>()
                        .map_err(|_| malformed(line_no, format!("bad index '{s}'")))?;
                    if v == 0 || v > n {
                        return Err(malformed(line_no, format!("index {v} outside 1..={n}")));
                    }
                    Ok(v - 1)
                };
                let row = index(tokens[0])?;
                let col = index(tokens[1])?;
                let value = match field {
                    Field::Pattern => 1.0,
                    Field::Integer => tokens[2]
                        .parse::<i64>()
                        .map_err(|_| malformed(line_no, format!("bad integer '{}'", tokens[2])))?
                        as f64,
                    Field::Real => tokens[2]
                        .parse::<f64>()
                        .map_err(|_| malformed(line_no, format!("bad real '{}'", tokens[2])))?,
                };
                entries.push(Triplet::new(row, col, value));
                if symmetry == Symmetry::Symmetric && row != col {
                    entries.push(Triplet::new(col, row, value));
                }
                seen += 1;
            }
        }
    }
    let (n, _) = size.ok_or_else(|| malformed(0, "missing size line"))?;
    if seen != declared {
        return Err(malformed(
            0,
            format!("header declares {declared} entries, file has {seen}"),
        ));
    }
    CscMatrix::from_triplets(n, &entries)
}

/// Writes a general real coordinate Matrix Market file.
pub fn write_matrix_market(a: &CscMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz()).map_err(io)?;
    for t in a.triplets() {
        writeln!(w, "{} {} {:e}", t.row + 1, t.col + 1, t.value).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `index,fraction` rows, one per curve sample.
pub fn write_curve_csv(curve: &PercentCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "index,fraction").map_err(io)?;
    for (k, frac) in curve.pct().iter().enumerate() {
        writeln!(w, "{},{:.20}", curve.sample_index(k), frac).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Compact single-line JSON, e.g. `{"n":1000,"strategy":"irregular",...,"positions":[0,800,1000]}`.
pub fn write_plan_json(plan: &BlockingPlan, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string(plan).expect("plan serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_plan_json(path: impl AsRef<Path>) -> Result<BlockingPlan> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let plan: BlockingPlan = serde_json::from_str(&text)
        .map_err(|e| Error::BadParams(format!("{}: {e}", path.display())))?;
    plan.validate()?;
    Ok(plan)
}

/// Header row, then one CSV row per serialized record. An empty slice
/// produces a header-only file.
pub fn write_report_csv<T: Serialize>(
    header: &[&str],
    rows: &[T],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
