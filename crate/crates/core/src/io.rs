//! Matrix and label file formats.
//!
//! Matrices are stored as 32-bit little-endian floats (NPY v1.0, C order) or
//! as headerless comma-separated text. Values are promoted to `f64` on load;
//! CSV values are rounded through `f32` so both formats load identically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::data::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};

const NPY_MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Npy,
    Csv,
}

impl MatrixFormat {
    /// `.npy` is NPY, anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("npy") => MatrixFormat::Npy,
            _ => MatrixFormat::Csv,
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_features(path: &Path, format: MatrixFormat) -> Result<FeatureMatrix> {
    let data = read_matrix(path, format)?;
    FeatureMatrix::new(data).map_err(|e| Error::load(path, e.to_string()))
}

pub fn save_features(path: &Path, m: &FeatureMatrix, format: MatrixFormat) -> Result<()> {
    write_matrix(path, m.as_array(), format)
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<Array2<f64>> {
    let bytes = read_bytes(path)?;
    let m = match format {
        MatrixFormat::Npy => decode_npy(&bytes).map_err(|reason| Error::load(path, reason))?,
        MatrixFormat::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| Error::load(path, "file is not valid UTF-8"))?;
            parse_csv(text).map_err(|(row, col, reason)| Error::Load {
                path: path.to_path_buf(),
                row: Some(row),
                col,
                reason,
            })?
        }
    };
    if let Some(((r, c), _)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Load {
            path: path.to_path_buf(),
            row: Some(r),
            col: Some(c),
            reason: "non-finite value".into(),
        });
    }
    Ok(m)
}

pub fn write_matrix(path: &Path, m: &Array2<f64>, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Npy => write_bytes(path, &encode_npy(m)),
        MatrixFormat::Csv => write_bytes(path, encode_csv(m).as_bytes()),
    }
}

pub fn encode_npy(m: &Array2<f64>) -> Vec<u8> {
    let (n, d) = m.dim();
    let mut header = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({n}, {d}), }}");
    // magic(6) + version(2) + header length(2) + header, padded to 64 bytes.
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + 4 * n * d);
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for &v in m.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_npy(bytes: &[u8]) -> std::result::Result<Array2<f64>, String> {
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err("missing NPY magic bytes".into());
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_start, header_len) = match major {
        1 => (10, u16::from_le_bytes([bytes[8], bytes[9]]) as usize),
        2 | 3 if bytes.len() >= 12 => (
            12,
            u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
        ),
        _ => return Err(format!("unsupported NPY version {major}.{minor}")),
    };
    let header_end = header_start + header_len;
    let header = bytes
        .get(header_start..header_end)
        .and_then(|h| std::str::from_utf8(h).ok())
        .ok_or("truncated or non-ASCII NPY header")?;

    let descr = dict_value(header, "descr").ok_or("NPY header lacks 'descr'")?;
    let width = match descr.trim_matches(|c| c == '\'' || c == '"') {
        "<f4" => 4,
        "<f8" => 8,
        other => return Err(format!("unsupported dtype {other}, expected '<f4'")),
    };
    let fortran = dict_value(header, "fortran_order").ok_or("NPY header lacks 'fortran_order'")?;
    if fortran != "False" {
        return Err("Fortran-ordered NPY data is not supported".into());
    }
    let shape = dict_value(header, "shape").ok_or("NPY header lacks 'shape'")?;
    let dims: Vec<usize> = shape
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad shape entry {s:?}")))
        .collect::<std::result::Result<_, _>>()?;
    let [n, d] = dims[..] else {
        return Err(format!("expected a 2-D array, got shape {shape}"));
    };

    let payload = &bytes[header_end..];
    if payload.len() != n * d * width {
        return Err(format!(
            "payload has {} bytes, shape ({n}, {d}) needs {}",
            payload.len(),
            n * d * width
        ));
    }
    let values: Vec<f64> = if width == 4 {
        payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect()
    } else {
        payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    Array2::from_shape_vec((n, d), values).map_err(|e| e.to_string())
}

/// Value text following `'key':` in a Python dict literal, up to the next
/// top-level comma.
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let pat_single = format!("'{key}':");
    let pat_double = format!("\"{key}\":");
    let start = header
        .find(&pat_single)
        .map(|i| i + pat_single.len())
        .or_else(|| header.find(&pat_double).map(|i| i + pat_double.len()))?;
    let rest = header[start..].trim_start();
    let mut depth = 0usize;
    for (i, ch) in rest.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            ',' | '}' if depth == 0 => return Some(rest[..i].trim()),
            _ => {}
        }
    }
    None
}

type CsvError = (usize, Option<usize>, String);

fn parse_csv(text: &str) -> std::result::Result<Array2<f64>, CsvError> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for (col, cell) in line.split(',').enumerate() {
            let v: f32 = cell
                .trim()
                .parse()
                .map_err(|_| (row, Some(col), format!("cannot parse {:?} as a number", cell.trim())))?;
            if !v.is_finite() {
                return Err((row, Some(col), "non-finite value".into()));
            }
            values.push(v as f64);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err((row, None, format!("ragged row: {count} columns, expected {w}")))
            }
            _ => {}
        }
        rows += 1;
    }
    let d = width.ok_or((0, None, "empty matrix file".to_string()))?;
    Ok(Array2::from_shape_vec((rows, d), values).expect("row lengths checked"))
}

pub fn encode_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", *v as f32);
        }
        out.push('\n');
    }
    out
}

/// One integer label per line; blank lines are ignored.
pub fn load_labels(path: &Path) -> Result<LabelVector> {
    let bytes = read_bytes(path)?;
    let text =
        std::str::from_utf8(&bytes).map_err(|_| Error::load(path, "file is not valid UTF-8"))?;
    let mut labels = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let l = line.parse::<usize>().map_err(|_| Error::Load {
            path: path.to_path_buf(),
            row: Some(row),
            col: None,
            reason: format!("cannot parse {line:?} as a non-negative integer label"),
        })?;
        labels.push(l);
    }
    LabelVector::from_labels(labels).map_err(|e| Error::load(path, e.to_string()))
}

pub fn save_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    let mut out = String::new();
    for l in labels.as_slice() {
        let _ = writeln!(out, "{l}");
    }
    write_bytes(path, out.as_bytes())
}
