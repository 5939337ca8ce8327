// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Matrix Market export/import (coordinate, complex general) plus the JSON
//! sidecar describing an exported all-at-once system.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::block_system::AllAtOnceSystem;
use crate::error::{Error, Result};
use crate::linalg::{C64, CMat};

/// Sidecar metadata written next to an exported system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemSidecar {
    pub m: usize,
    pub mp: usize,
    pub n: usize,
    pub h: f64,
    pub scheme: String,
}

/// Write a dense complex matrix in Matrix Market coordinate format
/// (1-based indices, exact zeros skipped, row-major entry order).
pub fn write_matrix_market<W: Write>(matrix: &CMat, out: &mut W) -> Result<()> {
    let entries: Vec<(usize, usize, C64)> = (0..matrix.nrows())
        .flat_map(|i| (0..matrix.ncols()).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let v = matrix[(i, j)];
            (v.re != 0.0 || v.im != 0.0).then_some((i, j, v))
        })
        .collect();
    writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
    writeln!(out, "{} {} {}", matrix.nrows(), matrix.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im)?;
    }
    Ok(())
}

/// Read a Matrix Market coordinate file (complex or real, general).
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<CMat> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::ShapeMismatch("empty matrix market stream".into()))??;
    let header_lc = header.to_lowercase();
    if !header_lc.starts_with("%%matrixmarket matrix coordinate") {
        return Err(Error::ShapeMismatch(format!(
            "unsupported matrix market header: {header}"
        )));
    }
    let complex = header_lc.contains("complex");

    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line?;
        if line.starts_with('%') || line.trim().is_empty() {
            continue;
        }
        size_line = Some(line);
        break;
    }
    let size_line =
        size_line.ok_or_else(|| Error::ShapeMismatch("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::ShapeMismatch(format!("bad size line: {size_line}"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::ShapeMismatch(format!("bad size line: {size_line}")));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);

    let mut matrix = CMat::zeros(rows, cols);
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        if line.starts_with('%') || line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let want = if complex { 4 } else { 3 };
        if toks.len() != want {
            return Err(Error::ShapeMismatch(format!("bad entry line: {line}")));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::ShapeMismatch(format!("bad number: {s}")))
        };
        let i: usize = toks[0]
            .parse()
            .map_err(|_| Error::ShapeMismatch(format!("bad index: {}", toks[0])))?;
        let j: usize = toks[1]
            .parse()
            .map_err(|_| Error::ShapeMismatch(format!("bad index: {}", toks[1])))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(Error::ShapeMismatch(format!("index out of range: {line}")));
        }
        let re = parse_f(toks[2])?;
        let im = if complex { parse_f(toks[3])? } else { 0.0 };
        matrix[(i - 1, j - 1)] = C64::new(re, im);
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::ShapeMismatch(format!(
            "entry count {seen} does not match declared nnz {nnz}"
        )));
    }
    Ok(matrix)
}

/// Export a system as `<base>.mtx` plus `<base>.json` sidecar.
pub fn export_system(system: &AllAtOnceSystem, base: &Path) -> Result<()> {
    let dense = system.to_dense()?;
    let mtx_path = base.with_extension("mtx");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&mtx_path)?);
    write_matrix_market(&dense, &mut file)?;
    let sidecar = SystemSidecar {
        m: system.m(),
        mp: system.mp(),
        n: system.dim(),
        h: system.h(),
        scheme: system.scheme().to_string(),
    };
    let json_path = base.with_extension("json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::creal;

    #[test]
    fn round_trip_complex_matrix() {
        let m = CMat::from_fn(3, 2, |i, j| {
            if (i + j) % 2 == 0 {
                C64::new(i as f64 + 0.25, -(j as f64) - 0.5)
            } else {
                creal(0.0)
            }
        });
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        let back = read_matrix_market(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_malformed_header() {
        let text = "%%MatrixMarket matrix array real general\n1 1\n1.0\n";
        assert!(read_matrix_market(std::io::Cursor::new(text.as_bytes())).is_err());
    }
}
