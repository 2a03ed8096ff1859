//! Per-sample CSV tables and JSON report output.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sncf_core::{Verdict, VerdictKind};

use crate::error::{io_error, CliError, CliResult};

#[derive(Debug, Serialize, Deserialize)]
struct VerdictRow {
    index: usize,
    kind: String,
    ood_group: i64,
}

/// `index,kind,ood_group` with a header line.
pub fn write_verdicts(path: &Path, verdicts: &[Verdict]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for (index, v) in verdicts.iter().enumerate() {
        w.serialize(VerdictRow {
            index,
            kind: v.kind().as_str().to_string(),
            ood_group: v.group_id(),
        })
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_verdicts(path: &Path) -> CliResult<Vec<Verdict>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<VerdictRow>().enumerate() {
        let row = row.map_err(|e| io_error(path, e))?;
        let bad = |why: String| CliError::validation(format!("{} (row {i}): {why}", path.display()));
        if row.index != i {
            return Err(bad(format!("expected index {i}, found {}", row.index)));
        }
        let kind = VerdictKind::parse(&row.kind).ok_or_else(|| bad(format!("unknown kind {:?}", row.kind)))?;
        out.push(Verdict::from_parts(kind, row.ood_group).map_err(|e| bad(e.to_string()))?);
    }
    if out.is_empty() {
        return Err(CliError::validation(format!("{}: no rows", path.display())));
    }
    Ok(out)
}

/// Writes any serializable rows with a header derived from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes JSON to `path`, or to standard output when no path is given.
pub fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let text = to_json(value);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
