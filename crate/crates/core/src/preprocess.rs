//! Feature matrix assembly, z-score standardization and stratified
//! train/validation splitting.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{feature_names, FeatureVector};

/// Columns whose standard deviation falls below this are treated as constant.
pub const ZERO_VARIANCE_EPS: f64 = 1e-12;

/// Row-major `S x N` matrix with a label and source path per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    labels: Vec<u8>,
    paths: Vec<String>,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        names: Vec<String>,
        data: Vec<f64>,
        labels: Vec<u8>,
        paths: Vec<String>,
    ) -> Result<Self> {
        let cols = names.len();
        let rows = labels.len();
        if cols == 0 {
            return Err(Error::SchemaMismatch(
                "matrix needs at least one column".into(),
            ));
        }
        if data.len() != rows * cols || paths.len() != rows {
            return Err(Error::SchemaMismatch(format!(
                "{} values, {} labels and {} paths do not describe a {rows}x{cols} matrix",
                data.len(),
                labels.len(),
                paths.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| **l > 1) {
            return Err(Error::SchemaMismatch(format!("label {bad} is not 0 or 1")));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!(
                "row {}, column {}",
                i / cols,
                names[i % cols]
            )));
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            data,
            labels,
            paths,
            names,
        })
    }

    /// Build the canonical 48-column matrix from extracted vectors.
    pub fn from_vectors(rows: &[(String, u8, FeatureVector)]) -> Result<Self> {
        let names = feature_names().map(str::to_string).collect();
        let mut data = Vec::with_capacity(rows.len() * crate::features::FEATURE_COUNT);
        let mut labels = Vec::with_capacity(rows.len());
        let mut paths = Vec::with_capacity(rows.len());
        for (path, label, fv) in rows {
            data.extend_from_slice(&fv.values);
            labels.push(*label);
            paths.push(path.clone());
        }
        FeatureMatrix::new(names, data, labels, paths)
    }

    /// Unlabelled matrix from raw rows; every label is 0 and paths are empty.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let data = rows.iter().flatten().copied().collect();
        FeatureMatrix::new(
            names,
            data,
            vec![0; rows.len()],
            vec![String::new(); rows.len()],
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(j).step_by(self.cols).copied()
    }

    pub fn class_count(&self, label: u8) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// New matrix with the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            paths: indices.iter().map(|&i| self.paths[i].clone()).collect(),
            names: self.names.clone(),
        }
    }

    /// Same rows and labels with new column data (`rows x names.len()`).
    pub(crate) fn with_data(&self, names: Vec<String>, data: Vec<f64>) -> FeatureMatrix {
        debug_assert_eq!(data.len(), self.rows * names.len());
        FeatureMatrix {
            rows: self.rows,
            cols: names.len(),
            data,
            labels: self.labels.clone(),
            paths: self.paths.clone(),
            names,
        }
    }

    /// Append the rows of `other`; column names must match.
    pub fn extend(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.names != self.names {
            return Err(Error::SchemaMismatch("column names differ".into()));
        }
        self.data.extend_from_slice(&other.data);
        self.labels.extend_from_slice(&other.labels);
        self.paths.extend(other.paths.iter().cloned());
        self.rows += other.rows;
        Ok(())
    }

    /// `path,label,<names...>` with shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["path".to_string(), "label".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        self.write_rows(&mut w)?;
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for i in 0..self.rows {
            let mut record = vec![self.paths[i].clone(), self.labels[i].to_string()];
            record.extend(self.row(i).iter().map(|v| format_real(*v)));
            w.write_record(&record).map_err(csv_err)?;
        }
        Ok(())
    }

    /// Read a feature CSV. When `expected` is given the header's feature
    /// columns must equal it exactly.
    pub fn read_csv<R: Read>(input: R, expected: Option<&[&str]>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 3 || &header[0] != "path" || &header[1] != "label" {
            return Err(Error::SchemaMismatch(
                "header must start with path,label and name at least one feature".into(),
            ));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        if let Some(expected) = expected {
            if names.len() != expected.len() || names.iter().zip(expected).any(|(a, b)| a != b) {
                return Err(Error::SchemaMismatch(
                    "feature columns do not match the canonical order".into(),
                ));
            }
        }
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut paths = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(csv_err)?;
            if record.len() != header.len() {
                return Err(Error::SchemaMismatch(format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    record.len(),
                    header.len()
                )));
            }
            paths.push(record[0].to_string());
            labels.push(match &record[1] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::SchemaMismatch(format!(
                        "row {}: label {other:?} is not 0 or 1",
                        line + 1
                    )))
                }
            });
            for field in record.iter().skip(2) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Csv(format!("row {}: {field:?} is not a number", line + 1))
                })?;
                data.push(v);
            }
        }
        FeatureMatrix::new(names, data, labels, paths)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v}")
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns whose deviation was below [`ZERO_VARIANCE_EPS`] (stored as 1).
    pub zero_variance: Vec<bool>,
    pub feature_names: Vec<String>,
}

pub fn fit_scaler(x: &FeatureMatrix) -> Result<Scaler> {
    if x.rows() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: x.rows(),
        });
    }
    let s = x.rows() as f64;
    let mut means = Vec::with_capacity(x.cols());
    let mut stds = Vec::with_capacity(x.cols());
    let mut zero_variance = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let mean = x.column(j).sum::<f64>() / s;
        let var = x.column(j).map(|v| (v - mean) * (v - mean)).sum::<f64>() / s;
        let sd = var.sqrt();
        means.push(mean);
        if sd < ZERO_VARIANCE_EPS {
            stds.push(1.0);
            zero_variance.push(true);
        } else {
            stds.push(sd);
            zero_variance.push(false);
        }
    }
    Ok(Scaler {
        means,
        stds,
        zero_variance,
        feature_names: x.names().to_vec(),
    })
}

impl Scaler {
    fn check_schema(&self, x: &FeatureMatrix) -> Result<()> {
        if x.names() != self.feature_names.as_slice() {
            return Err(Error::SchemaMismatch(format!(
                "scaler fitted on {} columns, matrix has {} (or a different order)",
                self.feature_names.len(),
                x.cols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_schema(x)?;
        let cols = x.cols();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.means[i % cols]) / self.stds[i % cols])
            .collect();
        Ok(x.with_data(x.names().to_vec(), data))
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.means.len() {
            return Err(Error::SchemaMismatch(format!(
                "row width {} != {}",
                row.len(),
                self.means.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn inverse(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_schema(x)?;
        let cols = x.cols();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.stds[i % cols] + self.means[i % cols])
            .collect();
        Ok(x.with_data(x.names().to_vec(), data))
    }
}

pub fn apply_scaler(s: &Scaler, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    s.apply(x)
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: FeatureMatrix,
    pub validation: FeatureMatrix,
    /// Row indices into the input matrix, ascending.
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    /// Labels with no rows at all.
    pub empty_classes: Vec<u8>,
}

/// Number of validation rows drawn from a class of `n` rows.
pub fn validation_share(n: usize, fraction: f64) -> usize {
    // The epsilon keeps e.g. 0.2 * 80 = 16.000000000000004 from rounding up.
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Stratified split: within each class the rows are shuffled by a seeded
/// generator and the first `ceil(fraction * class_size)` go to validation.
pub fn split_train_validation(x: &FeatureMatrix, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut validation_rows = Vec::new();
    let mut empty_classes = Vec::new();
    for label in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..x.rows()).filter(|&i| x.labels()[i] == label).collect();
        if idx.is_empty() {
            empty_classes.push(label);
            continue;
        }
        idx.shuffle(&mut rng);
        let k = validation_share(idx.len(), fraction).min(idx.len());
        validation_rows.extend_from_slice(&idx[..k]);
        train_rows.extend_from_slice(&idx[k..]);
    }
    train_rows.sort_unstable();
    validation_rows.sort_unstable();
    Ok(Split {
        train: x.select_rows(&train_rows),
        validation: x.select_rows(&validation_rows),
        train_rows,
        validation_rows,
        empty_classes,
    })
}
