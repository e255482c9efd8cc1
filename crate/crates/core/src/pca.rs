//! Principal component analysis through the SVD of the centered data
//! matrix. The SVD is a one-sided (Hestenes) Jacobi iteration: column pairs
//! of the data are rotated until mutually orthogonal, and the accumulated
//! rotations are the right singular vectors.

use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub column_means: Vec<f64>,
    /// Right singular vectors, strongest first; each has length N.
    pub components: Vec<Vec<f64>>,
    /// Non-increasing, one per stored component.
    pub singular_values: Vec<f64>,
    /// (S, N) of the fit matrix.
    pub fitted_on: (usize, usize),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rotate columns `a` and `b` by (c, s): a' = c a - s b, b' = s a + c b.
fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (p, q) = (*x, *y);
        *x = c * p - s * q;
        *y = s * p + c * q;
    }
}

/// One-sided Jacobi SVD of the column-major matrix `cols` (N columns of
/// length S). Returns (singular values, right singular vectors as columns),
/// unsorted.
fn one_sided_jacobi(mut cols: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = cols.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
                let (left, right) = v.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    (sigma, v)
}

/// Flip `v` so its largest-magnitude entry is nonnegative. Entries within a
/// relative 1e-12 of the maximum count as ties; the first one decides.
fn orient(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-12))
        .expect("max is attained");
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Center the columns and take the SVD. Stores `min(S, N)` components.
pub fn fit_pca(x: &FeatureMatrix) -> Result<PcaModel> {
    let (s, n) = (x.rows(), x.cols());
    if s < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: s });
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("PCA input".into()));
    }
    let means: Vec<f64> = (0..n)
        .map(|j| x.column(j).sum::<f64>() / s as f64)
        .collect();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| x.column(j).map(|v| v - means[j]).collect())
        .collect();
    let (sigma, v) = one_sided_jacobi(cols);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let k = s.min(n);
    let mut components = Vec::with_capacity(k);
    let mut singular_values = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let mut c = v[j].clone();
        orient(&mut c);
        components.push(c);
        singular_values.push(sigma[j]);
    }
    Ok(PcaModel {
        column_means: means,
        components,
        singular_values,
        fitted_on: (s, n),
    })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.column_means.len()
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    fn check_p(&self, p: usize) -> Result<()> {
        if p == 0 || p > self.component_count() {
            return Err(Error::InvalidComponentCount {
                requested: p,
                available: self.component_count(),
            });
        }
        Ok(())
    }

    /// Y = (X - means) C with C the first `p` components.
    pub fn project(&self, x: &FeatureMatrix, p: usize) -> Result<FeatureMatrix> {
        self.check_p(p)?;
        if x.cols() != self.input_dim() {
            return Err(Error::SchemaMismatch(format!(
                "PCA fitted on {} columns, matrix has {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut data = Vec::with_capacity(x.rows() * p);
        for i in 0..x.rows() {
            data.extend(self.project_centered(x.row(i), p));
        }
        let names = (1..=p).map(|i| format!("PC{i}")).collect();
        Ok(x.with_data(names, data))
    }

    pub fn project_row(&self, row: &[f64], p: usize) -> Result<Vec<f64>> {
        self.check_p(p)?;
        if row.len() != self.input_dim() {
            return Err(Error::SchemaMismatch(format!(
                "row width {} != {}",
                row.len(),
                self.input_dim()
            )));
        }
        Ok(self.project_centered(row, p).collect())
    }

    fn project_centered<'a>(&'a self, row: &'a [f64], p: usize) -> impl Iterator<Item = f64> + 'a {
        self.components[..p].iter().map(move |c| {
            row.iter()
                .zip(&self.column_means)
                .zip(c)
                .map(|((x, m), w)| (x - m) * w)
                .sum()
        })
    }

    /// R_cev(p) = sum of the first p squared singular values over the sum of
    /// all stored ones. A zero spectrum counts as fully explained.
    pub fn cumulative_explained_variance(&self, p: usize) -> Result<f64> {
        self.check_p(p)?;
        Ok(self.explained_variance_curve()[p - 1])
    }

    /// R_cev for p = 1..=component_count.
    pub fn explained_variance_curve(&self) -> Vec<f64> {
        let mut cumulative = Vec::with_capacity(self.singular_values.len());
        let mut acc = 0.0;
        for s in &self.singular_values {
            acc += s * s;
            cumulative.push(acc);
        }
        let total = acc;
        if total == 0.0 {
            return vec![1.0; cumulative.len()];
        }
        cumulative.iter().map(|c| c / total).collect()
    }

    /// Smallest p whose R_cev reaches `target_ratio`.
    pub fn choose_components(&self, target_ratio: f64) -> usize {
        let curve = self.explained_variance_curve();
        curve
            .iter()
            .position(|r| *r >= target_ratio)
            .map_or(curve.len(), |i| i + 1)
            .max(1)
    }

    /// max |v_i . v_j - delta_ij| over stored components.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.components.iter().enumerate() {
            for (j, b) in self.components.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }
}

pub fn project(m: &PcaModel, x: &FeatureMatrix, p: usize) -> Result<FeatureMatrix> {
    m.project(x, p)
}

pub fn cumulative_explained_variance(m: &PcaModel, p: usize) -> Result<f64> {
    m.cumulative_explained_variance(p)
}

pub fn choose_components(m: &PcaModel, target_ratio: f64) -> usize {
    m.choose_components(target_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        let names = (0..rows[0].len()).map(|i| format!("c{i}")).collect();
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        FeatureMatrix::from_rows(names, &rows).unwrap()
    }

    fn spectrum(values: &[f64]) -> PcaModel {
        PcaModel {
            column_means: vec![0.0; values.len()],
            components: (0..values.len())
                .map(|j| {
                    (0..values.len())
                        .map(|i| f64::from(u8::from(i == j)))
                        .collect()
                })
                .collect(),
            singular_values: values.to_vec(),
            fitted_on: (values.len(), values.len()),
        }
    }

    #[test]
    fn rank_one_example() {
        let m = fit_pca(&matrix(&[&[1.0, -1.0], &[-1.0, 1.0]])).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.components[0][0] - h).abs() < 1e-7);
        assert!((m.components[0][1] + h).abs() < 1e-7);
        assert!((m.singular_values[0] - 2.0).abs() < 1e-12);
        assert!(m.singular_values[1].abs() < 1e-12);

        let y = m
            .project(&matrix(&[&[1.0, -1.0], &[-1.0, 1.0]]), 1)
            .unwrap();
        assert!((y.row(0)[0] - 2f64.sqrt()).abs() < 1e-9);
        assert!((y.row(1)[0] + 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_columns_give_axes() {
        let x = matrix(&[&[2.0, 0.0], &[-2.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        let m = fit_pca(&x).unwrap();
        assert!((m.singular_values[0] - 8f64.sqrt()).abs() < 1e-12);
        assert!((m.singular_values[1] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.components[0], vec![1.0, 0.0]);
        assert_eq!(m.components[1], vec![0.0, 1.0]);
    }

    #[test]
    fn explained_variance_hand_values() {
        let m = spectrum(&[2.0, 1.0, 1.0]);
        assert!((m.cumulative_explained_variance(2).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((m.cumulative_explained_variance(2).unwrap() - 0.833_333_3).abs() < 1e-7);
        assert_eq!(m.cumulative_explained_variance(3).unwrap(), 1.0);
        assert_eq!(m.choose_components(0.8), 2);
        assert_eq!(m.choose_components(1.0), 3);
        assert_eq!(spectrum(&[3.0, 0.0, 0.0]).choose_components(0.5), 1);
        assert_eq!(spectrum(&[3.0, 1.0, 0.0]).choose_components(1.0), 2);
        assert_eq!(
            m.cumulative_explained_variance(4).unwrap_err().code(),
            "INVALID_COMPONENT_COUNT"
        );
        assert!(m.cumulative_explained_variance(0).is_err());
    }

    #[test]
    fn errors() {
        assert_eq!(
            fit_pca(&matrix(&[&[1.0, 2.0]])).unwrap_err().code(),
            "INSUFFICIENT_SAMPLES"
        );
        let m = fit_pca(&matrix(&[&[1.0, 2.0], &[3.0, 5.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(
            m.project(&matrix(&[&[1.0]]), 1).unwrap_err().code(),
            "SCHEMA_MISMATCH"
        );
        assert_eq!(
            m.project(&matrix(&[&[1.0, 2.0]]), 3).unwrap_err().code(),
            "INVALID_COMPONENT_COUNT"
        );
    }

    #[test]
    fn dimensionality_reduction_of_32_of_48() {
        let reduction: f64 = 1.0 - 32.0 / 48.0;
        assert!((reduction - 0.333).abs() < 0.001);
        assert!((1.0_f64 - 10.0 / 48.0 - 0.792).abs() < 0.001);
    }
}
