//! Matrix file formats.
//!
//! CSV: comma-separated rows of decimal floats, written with 17 significant
//! digits so values round-trip exactly; lines starting with `#` are comments.
//!
//! MAT1: magic bytes `MAT1`, then unsigned 32-bit little-endian `rows` and
//! `cols`, then `rows * cols` little-endian 64-bit floats in row-major order.
//! Round-trips are bit-exact.

use std::fs;
use std::path::Path;

use ssattn::DenseMatrix;

use crate::report::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Mat1,
}

/// Infer the format from the file extension (`.csv` or `.mat1`).
pub fn format_from_path(path: &Path) -> Result<MatrixFormat, CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(MatrixFormat::Csv),
        Some("mat1") => Ok(MatrixFormat::Mat1),
        other => Err(CliError::Usage(format!(
            "{}: unknown matrix extension {:?} (expected .csv or .mat1)",
            path.display(),
            other.unwrap_or("")
        ))),
    }
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix, CliError> {
    match format_from_path(path)? {
        MatrixFormat::Csv => read_csv(path),
        MatrixFormat::Mat1 => read_mat1(path),
    }
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<(), CliError> {
    match format_from_path(path)? {
        MatrixFormat::Csv => write_csv(path, m),
        MatrixFormat::Mat1 => write_mat1(path, m),
    }
}

fn read_csv(path: &Path) -> Result<DenseMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (field_idx, field) in line.split(',').enumerate() {
            let value: f64 = field.trim().parse().map_err(|e| {
                CliError::io(
                    path,
                    format!("line {}: field {}: {e}", lineno + 1, field_idx + 1),
                )
            })?;
            if !value.is_finite() {
                return Err(CliError::io(
                    path,
                    format!("line {}: non-finite value {value}", lineno + 1),
                ));
            }
            row.push(value);
        }
        if rows.is_empty() {
            cols = row.len();
        } else if row.len() != cols {
            return Err(CliError::io(
                path,
                format!(
                    "line {}: ragged row with {} fields, expected {cols}",
                    lineno + 1,
                    row.len()
                ),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() || cols == 0 {
        return Err(CliError::io(path, "no matrix rows (rows, cols >= 1 required)"));
    }
    let n = rows.len();
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    DenseMatrix::new(n, cols, data).map_err(|e| CliError::io(path, e))
}

fn write_csv(path: &Path, m: &DenseMatrix) -> Result<(), CliError> {
    let mut out = String::with_capacity(m.rows() * m.cols() * 24);
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // 17 significant digits: lossless f64 round-trip.
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

const MAT1_MAGIC: &[u8; 4] = b"MAT1";

fn read_mat1(path: &Path) -> Result<DenseMatrix, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.len() < 4 || &bytes[..4] != MAT1_MAGIC {
        return Err(CliError::io(
            path,
            format!(
                "bad magic at byte offset 0: expected \"MAT1\", got {:?}",
                &bytes.get(..4).unwrap_or(&bytes)
            ),
        ));
    }
    let header_len = 12;
    if bytes.len() < header_len {
        return Err(CliError::io(
            path,
            format!(
                "truncated header at byte offset {}: need {header_len} bytes, have {}",
                bytes.len(),
                bytes.len()
            ),
        ));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(CliError::io(
            path,
            format!("empty shape {rows}x{cols} at byte offset 4 (rows, cols >= 1 required)"),
        ));
    }
    let expected = header_len + rows * cols * 8;
    if bytes.len() != expected {
        return Err(CliError::io(
            path,
            format!(
                "truncated payload at byte offset {}: expected {expected} bytes total, have {}",
                bytes.len(),
                bytes.len()
            ),
        ));
    }
    let data: Vec<f64> = bytes[header_len..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::new(rows, cols, data).map_err(|e| CliError::io(path, e))
}

fn write_mat1(path: &Path, m: &DenseMatrix) -> Result<(), CliError> {
    let mut bytes = Vec::with_capacity(12 + m.rows() * m.cols() * 8);
    bytes.extend_from_slice(MAT1_MAGIC);
    bytes.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Write a spectrum CSV with the header `index,value,cumulative`.
pub fn write_spectrum_csv(
    path: &Path,
    values: &[f64],
    cumulative: &[f64],
) -> Result<(), CliError> {
    let mut out = String::from("index,value,cumulative\n");
    for (i, (v, c)) in values.iter().zip(cumulative).enumerate() {
        out.push_str(&format!("{i},{v:.16e},{c:.16e}\n"));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("ssattn-io-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn mat1_round_trip_is_bit_exact() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let path = tmp("rt.mat1");
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        for (a, b) in m.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_round_trip_is_value_exact() {
        let m = DenseMatrix::new(2, 3, vec![1.0, -0.25, 1e-300, 3.5e17, 0.1, -7.0]).unwrap();
        let path = tmp("rt.csv");
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        for (a, b) in m.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn ragged_csv_names_the_line() {
        let path = tmp("ragged.csv");
        std::fs::write(&path, "# header\n1.0,2.0\n3.0\n").unwrap();
        let err = read_matrix(&path).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("line 3"), "{err}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn mat1_bad_magic_and_truncation_name_offsets() {
        let path = tmp("bad.mat1");
        std::fs::write(&path, b"MATX\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        let err = read_matrix(&path).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("magic"), "{err}");

        let mut good = Vec::new();
        good.extend_from_slice(b"MAT1");
        good.extend_from_slice(&2u32.to_le_bytes());
        good.extend_from_slice(&2u32.to_le_bytes());
        good.extend_from_slice(&1.0f64.to_le_bytes());
        std::fs::write(&path, &good).unwrap();
        let err = read_matrix(&path).unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn zero_shape_is_rejected() {
        let path = tmp("zero.mat1");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"MAT1");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = read_matrix(&path).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        std::fs::remove_file(&path).ok();
    }
}
