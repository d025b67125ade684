//! CSV input and output.
//!
//! Files are comma separated with an optional single header row, detected by a
//! first field that does not parse as a number.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::matrix::Matrix;
use crate::{IfaError, Result, Scalar};

/// Numeric table read from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table<T> {
    pub header: Option<Vec<String>>,
    pub values: Matrix<T>,
}

fn parse_err(path: &str, line: u64, msg: impl Into<String>) -> IfaError {
    IfaError::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a numeric CSV from any reader; `name` labels error messages.
pub fn read_matrix_from<T: Scalar, R: Read>(reader: R, name: &str) -> Result<Table<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut header = None;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(i as u64 + 1, |p| p.line());
            parse_err(name, line, e.to_string())
        })?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            header = Some(rec.iter().map(str::to_string).collect());
            cols = Some(rec.len());
            continue;
        }
        match cols {
            Some(c) if c != rec.len() => {
                return Err(parse_err(
                    name,
                    line,
                    format!("expected {c} fields, found {}", rec.len()),
                ))
            }
            None => cols = Some(rec.len()),
            _ => {}
        }
        for (j, f) in rec.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(name, line, format!("field {}: '{f}' is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(name, line, format!("field {}: non-finite value", j + 1)));
            }
            data.push(T::lit(v));
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 {
        return Err(IfaError::Size(format!("{name}: no data rows")));
    }
    Ok(Table {
        header,
        values: Matrix::new(rows, cols, data)?,
    })
}

pub fn read_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<Table<T>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| IfaError::io(path, e))?;
    read_matrix_from(f, &path.display().to_string())
}

/// Feature matrix and integer labels taken from the last column.
pub fn split_labels<T: Scalar>(table: Table<T>, name: &str) -> Result<(Matrix<T>, Vec<usize>)> {
    let m = table.values;
    if m.cols() < 2 {
        return Err(IfaError::Dimension(format!(
            "{name}: labeled data needs at least one feature column and a label column"
        )));
    }
    let d = m.cols() - 1;
    let first_line = if table.header.is_some() { 2 } else { 1 };
    let mut labels = Vec::with_capacity(m.rows());
    let mut feats = Vec::with_capacity(m.rows() * d);
    for (i, r) in m.row_iter().enumerate() {
        let l = r[d].as_f64();
        if l < 0.0 || l.fract() != 0.0 || l > u32::MAX as f64 {
            return Err(parse_err(
                name,
                (first_line + i) as u64,
                format!("label {l} is not a nonnegative integer"),
            ));
        }
        labels.push(l as usize);
        feats.extend_from_slice(&r[..d]);
    }
    Ok((Matrix::new(m.rows(), d, feats)?, labels))
}

pub fn read_labeled<T: Scalar>(path: impl AsRef<Path>) -> Result<(Matrix<T>, Vec<usize>)> {
    let path = path.as_ref();
    split_labels(read_matrix(path)?, &path.display().to_string())
}

/// Writes with 17 significant digits so `f64` values round-trip exactly.
pub fn write_matrix<T: Scalar, W: Write>(
    out: W,
    header: Option<&[String]>,
    m: &Matrix<T>,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    if let Some(h) = header {
        writeln!(w, "{}", h.join(","))?;
    }
    for r in m.row_iter() {
        let mut first = true;
        for v in r {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{:.16e}", v.as_f64())?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_matrix_file<T: Scalar>(
    path: impl AsRef<Path>,
    header: Option<&[String]>,
    m: &Matrix<T>,
) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| IfaError::io(path, e))?;
    write_matrix(f, header, m).map_err(|e| IfaError::io(path, e))
}

/// Default column names `x1..xd`.
pub fn feature_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}
