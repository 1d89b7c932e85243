//! Time-series datasets and CSV ingestion.
//!
//! The CSV format is a header row `t,y,x1[,x2,...]` followed by one row per
//! period, sorted by `t`. Blank cells and non-finite values are rejected with
//! the offending line number. The `t` column is kept only as a calendar label;
//! estimation always uses the index `1..T`.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GcprError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Calendar labels from the `t` column (defaults to `1..T`).
    pub labels: Vec<f64>,
    pub y: Vec<f64>,
    /// One series per integrated regressor, each of length `T`.
    pub x: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (1..=y.len()).map(|t| t as f64).collect();
        Self::with_labels(labels, y, x)
    }

    pub fn with_labels(labels: Vec<f64>, y: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        let t_len = y.len();
        if t_len == 0 {
            return Err(GcprError::InvalidInput("empty dataset".into()));
        }
        if labels.len() != t_len {
            return Err(GcprError::DimensionMismatch(format!(
                "{} labels for {} observations",
                labels.len(),
                t_len
            )));
        }
        for (i, series) in x.iter().enumerate() {
            if series.len() != t_len {
                return Err(GcprError::DimensionMismatch(format!(
                    "regressor x{} has length {}, y has length {}",
                    i + 1,
                    series.len(),
                    t_len
                )));
            }
        }
        let bad = |v: &f64| !v.is_finite();
        if y.iter().any(bad) || x.iter().flatten().any(bad) || labels.iter().any(bad) {
            return Err(GcprError::NonFinite("dataset contains NaN or infinite values".into()));
        }
        Ok(Self { labels, y, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_regressors(&self) -> usize {
        self.x.len()
    }

    /// First differences `x_t - x_{t-1}` for `t = 2..T`, one vector per
    /// regressor.
    pub fn differences(&self) -> Vec<Vec<f64>> {
        self.x
            .iter()
            .map(|s| s.windows(2).map(|w| w[1] - w[0]).collect())
            .collect()
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| GcprError::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.len() < 2 || names[0] != "t" || names[1] != "y" {
            return Err(GcprError::Parse {
                line: 1,
                message: format!("header must be `t,y,x1[,x2,...]`, got `{}`", names.join(",")),
            });
        }
        for (i, name) in names[2..].iter().enumerate() {
            let expected = format!("x{}", i + 1);
            if *name != expected {
                return Err(GcprError::Parse {
                    line: 1,
                    message: format!("column {} must be named `{expected}`, got `{name}`", i + 3),
                });
            }
        }
        let m = names.len() - 2;
        let mut labels = Vec::new();
        let mut y = Vec::new();
        let mut x = vec![Vec::new(); m];
        for (row, record) in rdr.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| GcprError::Parse {
                line,
                message: e.to_string(),
            })?;
            if record.len() != names.len() {
                return Err(GcprError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", names.len(), record.len()),
                });
            }
            let mut values = Vec::with_capacity(record.len());
            for (col, cell) in record.iter().enumerate() {
                if cell.is_empty() {
                    return Err(GcprError::Parse {
                        line,
                        message: format!("blank cell in column `{}`", names[col]),
                    });
                }
                let v: f64 = cell.parse().map_err(|_| GcprError::Parse {
                    line,
                    message: format!("cannot parse `{cell}` in column `{}`", names[col]),
                })?;
                if !v.is_finite() {
                    return Err(GcprError::Parse {
                        line,
                        message: format!("non-finite value in column `{}`", names[col]),
                    });
                }
                values.push(v);
            }
            if let Some(&prev) = labels.last() {
                if values[0] <= prev {
                    return Err(GcprError::Parse {
                        line,
                        message: format!("rows must be sorted by t ({} follows {prev})", values[0]),
                    });
                }
            }
            labels.push(values[0]);
            y.push(values[1]);
            for (series, v) in x.iter_mut().zip(&values[2..]) {
                series.push(*v);
            }
        }
        if y.is_empty() {
            return Err(GcprError::Parse {
                line: 2,
                message: "no observations".into(),
            });
        }
        Self::with_labels(labels, y, x)
    }

    /// Write in the ingestion format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,y");
        for i in 0..self.n_regressors() {
            out.push_str(&format!(",x{}", i + 1));
        }
        out.push('\n');
        for t in 0..self.len() {
            out.push_str(&format!("{},{}", self.labels[t], self.y[t]));
            for s in &self.x {
                out.push_str(&format!(",{}", s[t]));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_valid_csv() {
        let text = "t,y,x1\n1870,1.0,2.0\n1871,1.5,2.5\n1872,2.0,2.25\n";
        let d = Dataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.labels, vec![1870.0, 1871.0, 1872.0]);
        assert_eq!(d.x[0], vec![2.0, 2.5, 2.25]);
        assert_eq!(d.differences()[0], vec![0.5, -0.25]);
    }

    #[test]
    fn rejects_blank_cell_with_line() {
        let text = "t,y,x1\n1,1.0,2.0\n2,,2.5\n";
        match Dataset::from_csv_reader(text.as_bytes()) {
            Err(GcprError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_nan() {
        let text = "t,y\n1,1.0\n2,NaN\n";
        assert!(matches!(
            Dataset::from_csv_reader(text.as_bytes()),
            Err(GcprError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn rejects_bad_header_and_unsorted_rows() {
        assert!(Dataset::from_csv_reader("time,y\n1,2\n".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("t,y,z\n1,2,3\n".as_bytes()).is_err());
        assert!(matches!(
            Dataset::from_csv_reader("t,y\n2,1\n1,2\n".as_bytes()),
            Err(GcprError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(vec![0.1, -2.5, 3.25], vec![vec![1.0, 3.0, 6.0]]).unwrap();
        let back = Dataset::from_csv_reader(d.to_csv_string().as_bytes()).unwrap();
        assert_eq!(d, back);
    }
}
