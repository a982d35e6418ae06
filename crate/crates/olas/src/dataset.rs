//! Pre-featurized CSV datasets: header `f1,...,fd,label`, labels `1..K`.

use std::path::Path;

use olas_core::LabeledSample;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Labels are 0-based in memory.
    pub samples: Vec<LabeledSample>,
    pub classes: usize,
    pub dim: usize,
}

pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let schema = |message: String| HarnessError::Schema {
        path: path.to_path_buf(),
        message,
    };
    if header.len() < 2 || header.get(header.len() - 1).map(str::trim) != Some("label") {
        return Err(schema("header must be f1,...,fd,label".into()));
    }
    let dim = header.len() - 1;
    let mut samples = Vec::new();
    let mut max_label = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |message: String| HarnessError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != dim + 1 {
            return Err(parse_err(format!("expected {} fields, found {}", dim + 1, rec.len())));
        }
        let mut features = Vec::with_capacity(dim);
        for (j, field) in rec.iter().take(dim).enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(parse_err(format!("missing value in column {}", j + 1)));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(format!("not a number in column {}: {field:?}", j + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value in column {}", j + 1)));
            }
            features.push(v);
        }
        let raw = rec[dim].trim();
        let label: usize = raw
            .parse()
            .map_err(|_| parse_err(format!("label is not a positive integer: {raw:?}")))?;
        if label == 0 {
            return Err(schema(format!("line {line}: labels start at 1")));
        }
        max_label = max_label.max(label);
        samples.push(LabeledSample {
            features,
            label: label - 1,
        });
    }
    if samples.is_empty() {
        return Err(schema("no data rows".into()));
    }
    let mut seen = vec![false; max_label];
    for s in &samples {
        seen[s.label] = true;
    }
    if let Some(k) = seen.iter().position(|&s| !s) {
        return Err(schema(format!("label {} never appears but {max_label} does", k + 1)));
    }
    if max_label < 2 {
        return Err(schema("need at least two classes".into()));
    }
    Ok(Dataset {
        samples,
        classes: max_label,
        dim,
    })
}

/// Writes `samples` with shortest round-trip float formatting.
pub fn write_dataset_csv(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    let dim = samples.first().map_or(0, |s| s.features.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (1..=dim).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for s in samples {
        let mut row: Vec<String> = s.features.iter().map(|x| format!("{x:?}")).collect();
        row.push((s.label + 1).to_string());
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::io(path, source),
        other => HarnessError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}
