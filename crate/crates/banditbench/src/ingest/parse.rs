//! Line-oriented readers and writers for the three cohort CSV formats.
//!
//! - `responses.csv`: header `unit,drug,ic50`, one observation per row.
//! - `features.csv`: header `unit,f0,f1,...`, one embedding row per unit.
//! - `biomarkers.csv`: header `unit,<flag>,<flag>,...` with 0/1 cells.
//!
//! Files are UTF-8 with `.` as the decimal point. Fields may not contain
//! commas. Every parse error reports file, line (1-based, header is line 1),
//! and column (1-based field index).

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{BiomarkerTable, FeatureTable, IngestError, RawResponseRow, RawResponseTable};
use crate::num::Scalar;

fn read_lines(path: &Path) -> Result<Vec<String>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn parse_number(path: &Path, line: usize, column: usize, text: &str) -> Result<f64, IngestError> {
    text.parse::<f64>()
        .map_err(|_| parse_err(path, line, column, format!("expected a number, found `{text}`")))
}

/// Reads the long-format response table.
pub fn read_responses(path: &Path) -> Result<RawResponseTable, IngestError> {
    let lines = read_lines(path)?;
    let mut iter = lines.iter().enumerate();
    let (_, header) = iter
        .next()
        .ok_or_else(|| parse_err(path, 1, 1, "empty file, expected header `unit,drug,ic50`"))?;
    if fields(header) != ["unit", "drug", "ic50"] {
        return Err(parse_err(path, 1, 1, format!("expected header `unit,drug,ic50`, found `{header}`")));
    }
    let mut rows = Vec::new();
    for (idx, line) in iter {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let f = fields(line);
        if f.len() != 3 {
            return Err(parse_err(path, lineno, f.len(), format!("expected 3 fields, found {}", f.len())));
        }
        if f[0].is_empty() {
            return Err(parse_err(path, lineno, 1, "empty unit name"));
        }
        if f[1].is_empty() {
            return Err(parse_err(path, lineno, 2, "empty drug name"));
        }
        let ic50 = parse_number(path, lineno, 3, f[2])?;
        rows.push(RawResponseRow {
            unit: f[0].to_string(),
            drug: f[1].to_string(),
            ic50,
        });
    }
    RawResponseTable::new(rows)
}

/// Reads the per-unit embedding table.
pub fn read_features<S: Scalar>(path: &Path) -> Result<FeatureTable<S>, IngestError> {
    let lines = read_lines(path)?;
    let mut iter = lines.iter().enumerate();
    let (_, header) = iter
        .next()
        .ok_or_else(|| parse_err(path, 1, 1, "empty file, expected header `unit,f0,f1,...`"))?;
    let head = fields(header);
    if head.first() != Some(&"unit") || head.len() < 2 {
        return Err(parse_err(path, 1, 1, format!("expected header `unit,f0,f1,...`, found `{header}`")));
    }
    let width = head.len() - 1;
    let mut entries = Vec::new();
    for (idx, line) in iter {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let f = fields(line);
        if f.len() != width + 1 {
            return Err(parse_err(
                path,
                lineno,
                f.len(),
                format!("expected {} fields, found {}", width + 1, f.len()),
            ));
        }
        if f[0].is_empty() {
            return Err(parse_err(path, lineno, 1, "empty unit name"));
        }
        let mut row = Vec::with_capacity(width);
        for (j, cell) in f[1..].iter().enumerate() {
            let v = parse_number(path, lineno, j + 2, cell)?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, j + 2, format!("non-finite feature value `{cell}`")));
            }
            row.push(S::of(v));
        }
        entries.push((f[0].to_string(), row));
    }
    FeatureTable::new(entries)
}

/// Reads the per-unit binary biomarker table.
pub fn read_biomarkers(path: &Path) -> Result<BiomarkerTable, IngestError> {
    let lines = read_lines(path)?;
    let mut iter = lines.iter().enumerate();
    let (_, header) = iter
        .next()
        .ok_or_else(|| parse_err(path, 1, 1, "empty file, expected header `unit,<flag>,...`"))?;
    let head = fields(header);
    if head.first() != Some(&"unit") {
        return Err(parse_err(path, 1, 1, format!("expected header `unit,<flag>,...`, found `{header}`")));
    }
    for (j, key) in head[1..].iter().enumerate() {
        if !super::valid_flag_key(key) {
            return Err(parse_err(
                path,
                1,
                j + 2,
                format!("biomarker key `{key}` does not match PREFIX:Name"),
            ));
        }
    }
    let keys: Vec<String> = head[1..].iter().map(|k| k.to_string()).collect();
    let mut entries = Vec::new();
    for (idx, line) in iter {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let f = fields(line);
        if f.len() != keys.len() + 1 {
            return Err(parse_err(
                path,
                lineno,
                f.len(),
                format!("expected {} fields, found {}", keys.len() + 1, f.len()),
            ));
        }
        if f[0].is_empty() {
            return Err(parse_err(path, lineno, 1, "empty unit name"));
        }
        let mut row = Vec::with_capacity(keys.len());
        for (j, cell) in f[1..].iter().enumerate() {
            match *cell {
                "0" => row.push(false),
                "1" => row.push(true),
                other => {
                    return Err(parse_err(path, lineno, j + 2, format!("expected 0 or 1, found `{other}`")))
                }
            }
        }
        entries.push((f[0].to_string(), row));
    }
    BiomarkerTable::new(keys, entries)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a long-format response table.
pub fn write_responses(path: &Path, rows: &[RawResponseRow]) -> Result<(), IngestError> {
    let mut out = String::from("unit,drug,ic50\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.unit, r.drug, r.ic50));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err(path))
}

/// Writes an embedding table with generated `f0..f{w-1}` column names.
pub fn write_features<S: Scalar>(path: &Path, units: &[String], rows: &[Vec<S>]) -> Result<(), IngestError> {
    let width = rows.first().map(Vec::len).unwrap_or(0);
    let mut out = String::from("unit");
    for j in 0..width {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for (unit, row) in units.iter().zip(rows) {
        out.push_str(unit);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err(path))
}

/// Writes a biomarker flag table.
pub fn write_biomarkers(path: &Path, keys: &[String], units: &[String], rows: &[Vec<bool>]) -> Result<(), IngestError> {
    let mut out = String::from("unit");
    for k in keys {
        out.push_str(&format!(",{k}"));
    }
    out.push('\n');
    for (unit, row) in units.iter().zip(rows) {
        out.push_str(unit);
        for v in row {
            out.push_str(if *v { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("banditbench-parse-tests");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{}-{name}", std::process::id()));
        fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn responses_round_trip() {
        let path = write_tmp("resp.csv", "unit,drug,ic50\nu0,aspirin,0.5\nu1,aspirin,2.25\n");
        let table = read_responses(&path).unwrap();
        assert_eq!(table.rows().len(), 2);
        assert_eq!(table.rows()[1].ic50, 2.25);
    }

    #[test]
    fn parse_error_reports_file_line_column() {
        let path = write_tmp("bad.csv", "unit,drug,ic50\nu0,aspirin,not_a_number\n");
        let err = read_responses(&path).unwrap_err();
        match err {
            IngestError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 3);
            }
            other => panic!("expected Parse error, got {other}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        let path = write_tmp("head.csv", "cell,drug,ic50\n");
        assert!(read_responses(&path).is_err());
    }

    #[test]
    fn features_width_checked_per_row() {
        let path = write_tmp("feat.csv", "unit,f0,f1\nu0,1.0,2.0\nu1,3.0\n");
        let err = read_features::<f64>(&path).unwrap_err();
        match err {
            IngestError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected Parse error, got {other}"),
        }
    }

    #[test]
    fn biomarker_cells_must_be_binary() {
        let path = write_tmp("bio.csv", "unit,MUT:BRAF_V600E\nu0,1\nu1,2\n");
        let err = read_biomarkers(&path).unwrap_err();
        match err {
            IngestError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 2);
            }
            other => panic!("expected Parse error, got {other}"),
        }
    }

    #[test]
    fn biomarker_header_keys_validated() {
        let path = write_tmp("biokey.csv", "unit,braf\nu0,1\n");
        assert!(read_biomarkers(&path).is_err());
    }

    #[test]
    fn feature_file_round_trips_exactly() {
        let dir = std::env::temp_dir().join("banditbench-parse-tests");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{}-roundtrip.csv", std::process::id()));
        let units = vec!["u0".to_string(), "u1".to_string()];
        let rows = vec![vec![0.1, -2.5e-3], vec![1.0 / 3.0, 4.0]];
        write_features(&path, &units, &rows).unwrap();
        let table = read_features::<f64>(&path).unwrap();
        assert_eq!(table.row("u0").unwrap(), &rows[0][..]);
        assert_eq!(table.row("u1").unwrap(), &rows[1][..]);
    }
}
