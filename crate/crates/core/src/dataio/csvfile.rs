use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

/// Loads features and labels from two comma-separated files with matching
/// row counts. Either file may start with a header row.
pub fn load_csv(features_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let features = fs::read_to_string(features_path)?;
    let labels = fs::read_to_string(labels_path)?;
    parse_csv(&features, &labels)
}

pub fn parse_csv(features: &str, labels: &str) -> Result<Dataset> {
    let (fnames, frows) = read_table(features)?;
    let (lnames, lrows) = read_table(labels)?;
    if frows.len() != lrows.len() {
        return Err(Error::parse(0, format!("{} feature rows but {} label rows", frows.len(), lrows.len())));
    }
    let n = frows.len();
    let d = frows.first().map_or(0, |r| r.values.len());
    let l = lrows.first().map_or(0, |r| r.values.len());
    let mut label_values = Vec::with_capacity(n * l);
    for row in &lrows {
        for &v in &row.values {
            let y = match v {
                1.0 => 1,
                0.0 | -1.0 => -1,
                _ => return Err(Error::parse(row.line, format!("label value {v} is not one of -1, 0, 1"))),
            };
            label_values.push(y);
        }
    }
    let feature_values: Vec<f64> = frows.into_iter().flat_map(|r| r.values).collect();
    let features = Array2::from_shape_vec((n, d), feature_values).map_err(|e| Error::parse(0, e.to_string()))?;
    let labels = Array2::from_shape_vec((n, l), label_values).map_err(|e| Error::parse(0, e.to_string()))?;
    let fnames = fnames.unwrap_or_else(|| (1..=d).map(|j| format!("x{j}")).collect());
    let lnames = lnames.unwrap_or_else(|| (1..=l).map(|j| format!("y{j}")).collect());
    Dataset::new(features, labels, fnames, lnames)
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

fn read_table(text: &str) -> Result<(Option<Vec<String>>, Vec<Row>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Row> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(first) = rows.first() {
                    if first.values.len() != values.len() {
                        return Err(Error::parse(line, format!("expected {} fields, found {}", first.values.len(), values.len())));
                    }
                }
                rows.push(Row { line, values });
            }
            Err(_) if i == 0 => header = Some(record.iter().map(str::to_string).collect()),
            Err(_) => {
                return Err(Error::parse(line, "non-numeric field"));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::parse(0, "no data rows"));
    }
    if let Some(h) = &header {
        let h: &Vec<String> = h;
        if h.len() != rows[0].values.len() {
            return Err(Error::parse(1, "header width differs from data width"));
        }
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_pair_of_files() {
        let ds = parse_csv("a,b\n1,2\n3,4\n", "0,1\n1,-1\n").unwrap();
        assert_eq!(ds.n_instances(), 2);
        assert_eq!(ds.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ds.labels().row(0).to_vec(), vec![-1, 1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(parse_csv("1,2\n3,4\n", "2,1\n1,1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_csv("", "").is_err());
        assert!(parse_csv("1,2\n3,4\n", "1,1\n").is_err());
        assert!(parse_csv("1,2\n3\n", "1,1\n1,1\n").is_err());
    }
}
