//! Test-only oracles, independent of the library's numerical code.
#![allow(dead_code, clippy::needless_range_loop)]

use pdfsift::preprocess::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending. `a` is row-major `n x n`.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Gram matrix Xc^T Xc of the column-centered rows.
pub fn centered_gram(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let s = rows.len();
    let n = rows[0].len();
    let means: Vec<f64> = (0..n)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / s as f64)
        .collect();
    let mut g = vec![vec![0.0; n]; n];
    for r in rows {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += (r[i] - means[i]) * (r[j] - means[j]);
            }
        }
    }
    g
}

pub fn random_small_matrix(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let s = rng.gen_range(2..=8);
    let n = rng.gen_range(1..=5);
    (0..s)
        .map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect()
}

pub fn to_matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    let names = (0..rows[0].len()).map(|i| format!("c{i}")).collect();
    FeatureMatrix::from_rows(names, rows).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Worst-case discrepancies of one PCA fit against the Gram oracle.
#[derive(Debug, Default, Clone, Copy)]
pub struct PcaCheck {
    pub singular_rel_err: f64,
    pub variance_err: f64,
    pub ortho_err: f64,
    pub recon_err: f64,
}

/// Singular values are compared as relative errors. Singular values the
/// oracle cannot resolve (squared value below 1e-10 of the largest, i.e.
/// the rank-deficient directions created by centering when S <= N) are
/// compared in the squared domain, where the Gram oracle is accurate.
pub fn check_pca_against_oracle(rows: &[Vec<f64>]) -> PcaCheck {
    let x = to_matrix(rows);
    let model = pdfsift::pca::fit_pca(&x).unwrap();
    let ev = jacobi_eigenvalues(centered_gram(rows));
    let s = rows.len();
    let n = rows[0].len();
    let top = ev[0].max(0.0);
    let mut check = PcaCheck::default();
    for (k, sigma) in model.singular_values.iter().enumerate() {
        let e = ev[k].max(0.0);
        let err = if e > 1e-10 * top {
            (sigma - e.sqrt()).abs() / e.sqrt()
        } else {
            (sigma * sigma - e).abs() / top.max(1e-300)
        };
        check.singular_rel_err = check.singular_rel_err.max(err);
    }
    check.ortho_err = model.orthonormality_error();

    let k = model.component_count();
    let y = model.project(&x, k).unwrap();
    for c in 0..k {
        let var = y.column(c).map(|v| v * v).sum::<f64>() / s as f64;
        let expected = model.singular_values[c].powi(2) / s as f64;
        check.variance_err = check.variance_err.max((var - expected).abs());
    }
    if s >= n {
        for i in 0..s {
            let yi = y.row(i);
            for j in 0..n {
                let xc = rows[i][j] - model.column_means[j];
                let back: f64 = (0..k).map(|c| yi[c] * model.components[c][j]).sum();
                check.recon_err = check.recon_err.max((xc - back).abs());
            }
        }
    }
    check
}

/// Central finite differences (h = 1e-5) of the training-mode mean loss,
/// dropout off and running statistics untouched, against the analytic
/// gradients. Returns the worst relative error
/// `|a - n| / max(|a|, |n|, 1e-6)` over every trainable parameter.
pub fn gradient_check(layer_sizes: &[usize], batch: usize, seed: u64) -> f64 {
    use pdfsift::mlp::{mean_loss, MlpModel, Mode};
    let mut rng = seeded(seed);
    let mut m = MlpModel::with_layers(layer_sizes, 0.0, seed).unwrap();
    let params: Vec<f64> = m
        .parameters()
        .iter()
        .map(|p| p + rng.gen_range(-0.3..0.3))
        .collect();
    m.set_parameters(&params).unwrap();
    let x: Vec<f64> = (0..batch * layer_sizes[0])
        .map(|_| rng.gen_range(-2.0..2.0))
        .collect();
    let mut y: Vec<u8> = (0..batch).map(|i| (i % 2) as u8).collect();
    y.rotate_left(rng.gen_range(0..batch));

    let trace = m.trace::<ChaCha8Rng>(&x, Mode::Training, None).unwrap();
    let analytic = m.backward(&trace, &y).unwrap().flatten();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = m.clone();
    for (i, a) in analytic.iter().enumerate() {
        let mut p = params.clone();
        p[i] = params[i] + h;
        probe.set_parameters(&p).unwrap();
        let up = mean_loss(
            &probe
                .trace::<ChaCha8Rng>(&x, Mode::Training, None)
                .unwrap()
                .probabilities,
            &y,
        );
        p[i] = params[i] - h;
        probe.set_parameters(&p).unwrap();
        let down = mean_loss(
            &probe
                .trace::<ChaCha8Rng>(&x, Mode::Training, None)
                .unwrap()
                .probabilities,
            &y,
        );
        let n = (up - down) / (2.0 * h);
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// The 20 toy configurations: the 5-4-3-1 network plus seeded variations.
pub fn gradient_check_suite() -> Vec<(Vec<usize>, usize, u64)> {
    let mut rng = seeded(77);
    let mut out = vec![(vec![5, 4, 3, 1], 8, 0)];
    for seed in 1..20u64 {
        let sizes = vec![
            rng.gen_range(1..=6),
            rng.gen_range(2..=6),
            rng.gen_range(2..=6),
            1,
        ];
        out.push((sizes, rng.gen_range(3..=10), seed));
    }
    out
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// The four XOR points, each repeated 32 times.
pub fn xor_matrix() -> FeatureMatrix {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..32 {
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            data.extend_from_slice(&[a, b]);
            labels.push(u8::from((a == 1.0) != (b == 1.0)));
        }
    }
    let n = labels.len();
    FeatureMatrix::new(names(2), data, labels, vec![String::new(); n]).unwrap()
}

/// 200 points in the plane, labelled by the side of `x0 + x1 = 0`, with no
/// point closer than 0.5 to the boundary (margin 1).
pub fn separable_matrix(seed: u64) -> FeatureMatrix {
    let mut rng = seeded(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    while labels.len() < 200 {
        let (a, b): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let d = (a + b) / 2f64.sqrt();
        if d.abs() < 0.5 {
            continue;
        }
        data.extend_from_slice(&[a, b]);
        labels.push(u8::from(d > 0.0));
    }
    FeatureMatrix::new(names(2), data, labels, vec![String::new(); 200]).unwrap()
}

pub fn corpus_matrix(spec: &pdfsift::synth::CorpusSpec) -> FeatureMatrix {
    let rows: Vec<_> = pdfsift::synth::generate_in_memory(spec)
        .unwrap()
        .into_iter()
        .map(|f| {
            (
                f.name,
                f.label,
                pdfsift::features::extract_from_bytes(&f.bytes),
            )
        })
        .collect();
    FeatureMatrix::from_vectors(&rows).unwrap()
}

/// Canonical-schema matrix with `informative` random columns (class-shifted)
/// and the remaining columns constant up to sub-threshold jitter.
pub fn informative_matrix(rows: usize, informative: usize, seed: u64) -> FeatureMatrix {
    let mut rng = seeded(seed);
    let names: Vec<String> = pdfsift::features::feature_names()
        .map(str::to_string)
        .collect();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..rows {
        let label = (i % 4 == 0) as u8;
        for j in 0..names.len() {
            if j < informative {
                data.push(rng.gen_range(-1.0..1.0) + 2.0 * f64::from(label));
            } else {
                data.push(3.0 + rng.gen_range(-1e-14..1e-14));
            }
        }
        labels.push(label);
    }
    FeatureMatrix::new(names, data, labels, vec![String::new(); rows]).unwrap()
}
