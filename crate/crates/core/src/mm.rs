//! Matrix Market I/O: coordinate and array formats, real field, general or
//! symmetric storage. Symmetric storage is expanded to a full CSR matrix
//! with the symmetry flag set. Writes carry 17 significant digits so a
//! write→read round trip is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SolverError};
use crate::sparse::SparseMatrix;

fn bad(msg: impl Into<String>) -> SolverError {
    SolverError::MatrixMarket(msg.into())
}

struct Header {
    coordinate: bool,
    symmetric: bool,
}

fn parse_header(line: &str) -> Result<Header> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() < 5 || !toks[0].eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(bad(format!("malformed header line: {line:?}")));
    }
    if !toks[1].eq_ignore_ascii_case("matrix") {
        return Err(bad(format!("unsupported object {:?}", toks[1])));
    }
    let coordinate = match toks[2].to_ascii_lowercase().as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(bad(format!("unsupported format {other:?}"))),
    };
    match toks[3].to_ascii_lowercase().as_str() {
        "real" => {}
        other => return Err(bad(format!("unsupported field {other:?} (real only)"))),
    }
    let symmetric = match toks[4].to_ascii_lowercase().as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(bad(format!("unsupported storage {other:?}"))),
    };
    Ok(Header { coordinate, symmetric })
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let file = File::open(path.as_ref())?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines.next().ok_or_else(|| bad("empty file"))??;
    let header = parse_header(&header_line)?;

    let mut data_lines = lines
        .filter_map(|l| l.ok())
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let size_line = data_lines.next().ok_or_else(|| bad("missing size line"))?;
    let size: Vec<&str> = size_line.split_whitespace().collect();

    if header.coordinate {
        if size.len() != 3 {
            return Err(bad(format!("coordinate size line needs 3 fields: {size_line:?}")));
        }
        let nrows: usize = size[0].parse().map_err(|_| bad("bad row count"))?;
        let ncols: usize = size[1].parse().map_err(|_| bad("bad col count"))?;
        let nnz: usize = size[2].parse().map_err(|_| bad("bad nnz count"))?;
        let mut triplets = Vec::with_capacity(if header.symmetric { 2 * nnz } else { nnz });
        for _ in 0..nnz {
            let line = data_lines.next().ok_or_else(|| bad("truncated coordinate data"))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad(format!("coordinate entry needs 3 fields: {line:?}")));
            }
            let i: usize = t[0].parse().map_err(|_| bad("bad row index"))?;
            let j: usize = t[1].parse().map_err(|_| bad("bad col index"))?;
            let v: f64 = t[2].parse().map_err(|_| bad("bad value"))?;
            if i == 0 || j == 0 || i > nrows || j > ncols {
                return Err(bad(format!("index ({i},{j}) out of range for {nrows}x{ncols}")));
            }
            triplets.push((i - 1, j - 1, v));
            if header.symmetric && i != j {
                triplets.push((j - 1, i - 1, v));
            }
        }
        let mut m = SparseMatrix::from_triplets(nrows, ncols, &triplets)?;
        if header.symmetric {
            m.set_symmetric_unchecked()?;
        }
        Ok(m)
    } else {
        if size.len() != 2 {
            return Err(bad(format!("array size line needs 2 fields: {size_line:?}")));
        }
        let nrows: usize = size[0].parse().map_err(|_| bad("bad row count"))?;
        let ncols: usize = size[1].parse().map_err(|_| bad("bad col count"))?;
        let expected = if header.symmetric {
            nrows * (nrows + 1) / 2
        } else {
            nrows * ncols
        };
        let mut values = Vec::with_capacity(expected);
        for line in data_lines {
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| bad("bad array value"))?);
            }
        }
        if values.len() != expected {
            return Err(bad(format!("array data has {} values, expected {expected}", values.len())));
        }
        // array format is column-major
        let mut triplets = Vec::new();
        if header.symmetric {
            let mut k = 0;
            for j in 0..ncols {
                for i in j..nrows {
                    let v = values[k];
                    k += 1;
                    if v != 0.0 {
                        triplets.push((i, j, v));
                        if i != j {
                            triplets.push((j, i, v));
                        }
                    }
                }
            }
        } else {
            for j in 0..ncols {
                for i in 0..nrows {
                    let v = values[j * nrows + i];
                    if v != 0.0 {
                        triplets.push((i, j, v));
                    }
                }
            }
        }
        let mut m = SparseMatrix::from_triplets(nrows, ncols, &triplets)?;
        if header.symmetric {
            m.set_symmetric_unchecked()?;
        }
        Ok(m)
    }
}

/// Write in coordinate format (general storage; the symmetry flag is
/// re-derived on read via validate_symmetry when wanted).
pub fn write_matrix_market(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Read a dense vector: either one value per line, or a Matrix Market
/// array file with a single column.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let first = match lines.next() {
        Some(l) => l?,
        None => return Err(bad("empty vector file")),
    };
    if first.trim_start().starts_with("%%MatrixMarket") {
        drop(lines);
        let m = read_matrix_market(path.as_ref())?;
        if m.ncols() != 1 {
            return Err(bad(format!("vector file has {} columns", m.ncols())));
        }
        let mut v = vec![0.0; m.nrows()];
        for (i, _, val) in m.iter() {
            v[i] = val;
        }
        return Ok(v);
    }
    let mut v = Vec::new();
    let mut push = |line: &str| -> Result<()> {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            return Ok(());
        }
        v.push(t.parse::<f64>().map_err(|_| bad(format!("bad vector value {t:?}")))?);
        Ok(())
    };
    push(&first)?;
    for line in lines {
        push(&line?)?;
    }
    if v.is_empty() {
        return Err(bad("vector file holds no values"));
    }
    Ok(v)
}

pub fn write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    for x in v {
        writeln!(w, "{x:.16e}")?;
    }
    Ok(())
}
