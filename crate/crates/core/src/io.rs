//! File helpers: JSON documents, labeled CSV point clouds, matrix documents.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::dataset::LabeledPointCloud;
use crate::{Error, Matrix, Result};

/// Row-major matrix as stored in JSON documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Matrix> for MatrixDoc {
    fn from(m: &Matrix) -> Self {
        MatrixDoc {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
    }
}

impl MatrixDoc {
    pub fn to_matrix(&self) -> Result<Matrix> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|e| Error::invalid(format!("matrix document: {e}")))
    }
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        row: e.line(),
        message: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `x0,…,x{d-1},label` rows.
pub fn write_labeled_csv(path: &Path, cloud: &LabeledPointCloud) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header: Vec<String> = (0..cloud.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for (row, label) in cloud.points().rows().into_iter().zip(cloud.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a labeled CSV. When `manifold_count` is `None` it is taken as
/// `max(label) + 1`.
pub fn read_labeled_csv(path: &Path, manifold_count: Option<usize>) -> Result<LabeledPointCloud> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let headers = r.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let d = headers.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| parse_err(1, "expected at least one feature and a label".into()))?;
    if headers.get(d) != Some("label") {
        return Err(parse_err(1, "last column must be `label`".into()));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
        if rec.len() != d + 1 {
            return Err(parse_err(row, format!("expected {} fields, found {}", d + 1, rec.len())));
        }
        for field in rec.iter().take(d) {
            data.push(field.trim().parse::<f64>().map_err(|e| parse_err(row, e.to_string()))?);
        }
        labels.push(rec[d].trim().parse::<usize>().map_err(|e| parse_err(row, e.to_string()))?);
    }
    let n = labels.len();
    let m = manifold_count.unwrap_or_else(|| labels.iter().max().map_or(0, |l| l + 1));
    let points = Array2::from_shape_vec((n, d), data).expect("row count checked");
    LabeledPointCloud::new(points, labels, m)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}
