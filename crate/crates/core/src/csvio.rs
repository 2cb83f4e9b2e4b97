//! Dense matrix and edge-list CSV files.
//!
//! Matrices are one row per line, comma separated, no header unless asked
//! for. Numbers are written with 17 significant digits so they parse back to
//! the same `f64`. Edge lists are `i,j,weight` with 1-based indices.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_matrix_from<R: Read>(reader: R, header: bool) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: '{s}': {e}", line + 1 + header as usize)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Parse("empty matrix file".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_matrix(path: &Path, header: bool) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path)?;
    read_matrix_from(file, header)
}

pub fn read_sym_matrix(path: &Path, header: bool) -> Result<SymMatrix> {
    SymMatrix::new(read_matrix(path, header)?)
}

pub fn write_matrix_to<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..m.nrows() {
        wtr.write_record((0..m.ncols()).map(|j| format_f64(m[(i, j)])))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_matrix_to(std::io::BufWriter::new(file), m)
}

/// Writes the support of `m` above the diagonal as `i,j,weight` (1-based).
pub fn write_edges(path: &Path, m: &SymMatrix, edges: &[(usize, usize)]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut wtr = csv::WriterBuilder::new().from_writer(std::io::BufWriter::new(file));
    wtr.write_record(["i", "j", "weight"])?;
    for &(i, j) in edges {
        wtr.write_record([(i + 1).to_string(), (j + 1).to_string(), format_f64(m.get(i, j))])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an `i,j,weight` edge list back as 0-based pairs.
pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |k: usize| -> Result<&str> {
            record
                .get(k)
                .ok_or_else(|| Error::Parse(format!("edge row with {} fields", record.len())))
        };
        let parse_idx = |s: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|e| Error::Parse(format!("edge index '{s}': {e}")))?;
            v.checked_sub(1).ok_or_else(|| Error::Parse("edge indices are 1-based".into()))
        };
        let i = parse_idx(field(0)?)?;
        let j = parse_idx(field(1)?)?;
        let w: f64 = field(2)?
            .parse()
            .map_err(|e| Error::Parse(format!("edge weight: {e}")))?;
        out.push((i, j, w));
    }
    Ok(out)
}
