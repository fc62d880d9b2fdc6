//! The clustering objective, evaluated directly and through its trace rewrite.

use nalgebra::{DMatrix, DVector};

use crate::block::split_stacked;
use crate::error::{CamelError, Result};
use crate::features::FeatureSet;
use crate::indicator::IndicatorMatrix;
use crate::linalg::frobenius_sq;

/// Terms of the objective `F = intra / N + lambda * consistency`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTerms {
    pub total: f64,
    /// Sum of squared distances from projected samples to their cluster means (not divided by `N`).
    pub intra: f64,
    /// Sum over view pairs `p < q` of `||U^p - U^q||_F^2`.
    pub consistency: f64,
    /// Cluster ids in `[0, K)` that received no samples; they contribute zero.
    pub empty_clusters: Vec<usize>,
}

/// Projects every sample with its own view's transform: `Y = U~^T X~`, a `T x N` matrix.
pub fn project_samples(transforms: &[DMatrix<f64>], fs: &FeatureSet) -> Result<DMatrix<f64>> {
    check_transforms(transforms, fs)?;
    let t = transforms[0].ncols();
    let mut y = DMatrix::zeros(t, fs.len());
    for (p, u) in transforms.iter().enumerate() {
        let r = fs.view_range(p);
        let block = u.tr_mul(&fs.features().columns(r.start, r.len()));
        y.columns_mut(r.start, r.len()).copy_from(&block);
    }
    Ok(y)
}

/// Sum over `p < q` of `||U^p - U^q||_F^2`.
pub fn consistency_penalty(transforms: &[DMatrix<f64>]) -> f64 {
    let mut total = 0.0;
    for p in 0..transforms.len() {
        for q in p + 1..transforms.len() {
            total += frobenius_sq(&(&transforms[p] - &transforms[q]));
        }
    }
    total
}

/// Evaluates the objective from its definition: cluster means of the projected
/// samples, squared distances to them, and pairwise transform differences.
///
/// `u_tilde` is the stacked `VM x T` projection; `assignment` holds zero-based
/// cluster ids for the samples of `fs` in storage order.
pub fn objective_sum_form(
    u_tilde: &DMatrix<f64>,
    fs: &FeatureSet,
    assignment: &[usize],
    clusters: usize,
    lambda: f64,
) -> Result<ObjectiveTerms> {
    if u_tilde.nrows() != fs.views() * fs.dim() {
        return Err(CamelError::dim(format!(
            "stacked projection has {} rows, expected {}",
            u_tilde.nrows(),
            fs.views() * fs.dim()
        )));
    }
    if assignment.len() != fs.len() {
        return Err(CamelError::dim(format!(
            "assignment has {} entries for {} samples",
            assignment.len(),
            fs.len()
        )));
    }
    if let Some(&bad) = assignment.iter().find(|&&c| c >= clusters) {
        return Err(CamelError::invalid(format!(
            "cluster id {} out of range for {clusters} clusters",
            bad + 1
        )));
    }
    let transforms = split_stacked(u_tilde, fs.views());
    let y = project_samples(&transforms, fs)?;
    let t = y.nrows();

    let mut sums = vec![DVector::<f64>::zeros(t); clusters];
    let mut counts = vec![0usize; clusters];
    for (i, &k) in assignment.iter().enumerate() {
        sums[k] += y.column(i);
        counts[k] += 1;
    }
    let centroids: Vec<DVector<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| if n > 0 { s / n as f64 } else { s })
        .collect();
    let intra: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &k)| (y.column(i) - &centroids[k]).norm_squared())
        .sum();

    let consistency = consistency_penalty(&transforms);
    let empty_clusters = (0..clusters).filter(|&k| counts[k] == 0).collect();
    Ok(ObjectiveTerms {
        total: intra / fs.len() as f64 + lambda * consistency,
        intra,
        consistency,
        empty_clusters,
    })
}

/// `(1/N) Tr(X~^T U~ U~^T X~) + lambda Tr(U~^T D U~) - (1/N) Tr(H^T X~^T U~ U~^T X~ H)`.
pub fn objective_trace_form(
    u_tilde: &DMatrix<f64>,
    x_tilde: &DMatrix<f64>,
    h: &IndicatorMatrix,
    d: &DMatrix<f64>,
    lambda: f64,
    n: usize,
) -> Result<f64> {
    if u_tilde.nrows() != x_tilde.nrows() || d.nrows() != u_tilde.nrows() || !d.is_square() {
        return Err(CamelError::dim(format!(
            "U~ is {}x{}, X~ is {}x{}, D is {}x{}",
            u_tilde.nrows(),
            u_tilde.ncols(),
            x_tilde.nrows(),
            x_tilde.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    if h.len() != x_tilde.ncols() {
        return Err(CamelError::dim(format!(
            "indicator has {} rows, X~ has {} columns",
            h.len(),
            x_tilde.ncols()
        )));
    }
    let y = u_tilde.tr_mul(x_tilde);
    let yh = h.right_mul(&y)?;
    let consistency = (u_tilde.transpose() * d * u_tilde).trace();
    let n = n as f64;
    Ok(frobenius_sq(&y) / n + lambda * consistency - frobenius_sq(&yh) / n)
}

fn check_transforms(transforms: &[DMatrix<f64>], fs: &FeatureSet) -> Result<()> {
    if transforms.len() != fs.views() {
        return Err(CamelError::dim(format!(
            "{} transforms for {} views",
            transforms.len(),
            fs.views()
        )));
    }
    let t = transforms[0].ncols();
    for (p, u) in transforms.iter().enumerate() {
        if u.nrows() != fs.dim() || u.ncols() != t {
            return Err(CamelError::dim(format!(
                "transform {} is {}x{}, expected {}x{t}",
                p + 1,
                u.nrows(),
                u.ncols(),
                fs.dim()
            )));
        }
    }
    Ok(())
}
