use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which column holds the class token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
}

impl LabelColumn {
    fn resolve(self, n_columns: usize) -> Option<usize> {
        match self {
            LabelColumn::Last => n_columns.checked_sub(1),
            LabelColumn::Index(i) if i < n_columns => Some(i),
            LabelColumn::Index(_) => None,
        }
    }
}

/// Parsing options for [`load_csv_with`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
    /// Columns dropped before parsing (e.g. row ids), as raw column indices.
    #[serde(default)]
    pub ignore_columns: Vec<usize>,
    /// Fixed numeric codes for symbolic feature cells.
    #[serde(default)]
    pub feature_tokens: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub features: Vec<f64>,
    pub class: String,
}

/// Parsed rows before class ids are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<RawRecord>,
    /// Distinct class tokens in first-appearance order.
    pub class_tokens: Vec<String>,
}

impl RawTable {
    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, |r| r.features.len())
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: LabelColumn) -> Result<RawTable> {
    load_csv_with(
        path,
        &CsvOptions {
            label_column,
            ..CsvOptions::default()
        },
    )
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

enum Cell {
    Value(f64),
    Missing,
    Text,
}

fn parse_cell(cell: &str, opts: &CsvOptions) -> Cell {
    if is_missing(cell) {
        return Cell::Missing;
    }
    if let Some((_, v)) = opts.feature_tokens.iter().find(|(t, _)| t == cell) {
        return Cell::Value(*v);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Value(v),
        _ => Cell::Text,
    }
}

/// Reads comma-separated classification data.
///
/// A first row containing a non-numeric feature cell is taken as a header.
/// Missing cells (`?` or empty) are rejected.
pub fn load_csv_with(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |row: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut header = None;
    let mut rows = Vec::new();
    let mut class_tokens: Vec<String> = Vec::new();
    let mut width: Option<usize> = None;

    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Csv(e),
            _ => parse_err(e.position().map_or(0, |p| p.line()), e.to_string()),
        })?;
        let line = record.position().map_or(n as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(parse_err(
                line,
                format!("ragged row: {} columns, expected {w}", record.len()),
            ));
        }
        if w < 2 {
            return Err(parse_err(
                line,
                "need at least one feature and a label column".into(),
            ));
        }
        let label_idx = opts
            .label_column
            .resolve(w)
            .ok_or_else(|| parse_err(line, format!("label column out of range for {w} columns")))?;

        let feature_cols = (0..w).filter(|&c| c != label_idx && !opts.ignore_columns.contains(&c));
        let mut features = Vec::with_capacity(w - 1);
        let mut bad = None;
        for c in feature_cols {
            match parse_cell(&record[c], opts) {
                Cell::Value(v) => features.push(v),
                Cell::Missing => {
                    bad.get_or_insert((c, format!("missing value in column {}", c + 1)));
                }
                Cell::Text => {
                    bad.get_or_insert((
                        c,
                        format!("non-numeric value `{}` in column {}", &record[c], c + 1),
                    ));
                }
            }
        }
        if features.is_empty() && bad.is_none() {
            return Err(parse_err(line, "no feature columns left".into()));
        }
        if let Some((c, message)) = bad {
            let header_candidate = rows.is_empty()
                && header.is_none()
                && !is_missing(&record[c])
                && !record.iter().any(is_missing);
            if header_candidate {
                header = Some(record.iter().map(str::to_owned).collect());
                continue;
            }
            return Err(parse_err(line, message));
        }
        let class = record[label_idx].to_owned();
        if class.is_empty() || class == "?" {
            return Err(parse_err(line, "missing class label".into()));
        }
        if !class_tokens.contains(&class) {
            class_tokens.push(class.clone());
        }
        rows.push(RawRecord { features, class });
    }

    if rows.is_empty() {
        return Err(Error::InvalidData(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    if class_tokens.len() < 2 {
        return Err(Error::InvalidData(format!(
            "{}: need at least 2 distinct classes, found {}",
            path.display(),
            class_tokens.len()
        )));
    }
    Ok(RawTable {
        header,
        rows,
        class_tokens,
    })
}
