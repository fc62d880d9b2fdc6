#![allow(dead_code)]

use camel::{FeatureSet, Sample};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `views x per_view` samples with uniform entries in `[-1, 1]`, labelled round-robin over `ids`.
pub fn random_features(
    seed: u64,
    views: usize,
    dim: usize,
    per_view: usize,
    ids: Option<usize>,
) -> FeatureSet {
    let mut r = rng(seed);
    let mut samples = Vec::new();
    for p in 0..views {
        for i in 0..per_view {
            let f: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            samples.push(Sample::new(p, ids.map(|k| (i % k) as u64), f));
        }
    }
    FeatureSet::new(views, samples).unwrap()
}

pub fn random_matrix(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// Relative difference `|a - b| / max(|a|, |b|, tiny)`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matching eigenvectors as columns, unsorted.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Ascending eigenvalues of a symmetric matrix via Jacobi.
pub fn jacobi_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v = jacobi_eigen(a).0;
    v.sort_by(f64::total_cmp);
    v
}

/// Ascending generalized eigenvalues of `(a, b)`, `b` SPD, via `b^-1/2 a b^-1/2`.
pub fn jacobi_generalized_values(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let (w, q) = jacobi_eigen(b);
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        w.len(),
        w.iter().map(|x| 1.0 / x.sqrt()),
    ));
    let s = &q * inv_sqrt * q.transpose();
    let c = &s * a * &s;
    let c = (&c + c.transpose()) * 0.5;
    jacobi_values(&c)
}
