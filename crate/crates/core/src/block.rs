//! Block-structured matrices that stack the per-view problems into one.

use nalgebra::DMatrix;

use crate::config::Ridge;
use crate::error::{CamelError, Result};
use crate::features::FeatureSet;
use crate::linalg::symmetric_eigenvalues;

/// Stacked data and covariance for a feature set.
#[derive(Debug, Clone)]
pub struct BlockData {
    /// `VM x N`; column `j` holds sample `j` in its view's row block, zeros elsewhere.
    pub x_tilde: DMatrix<f64>,
    /// `VM x VM` block-diagonal of the per-view covariances.
    pub sigma_tilde: DMatrix<f64>,
    pub view_sigma: Vec<DMatrix<f64>>,
    /// Ridge actually applied to each view.
    pub ridges: Vec<f64>,
}

/// Ridge-regularized second-moment matrix `X^p X^pT / N_p + alpha_p I` of every view.
pub fn view_covariances(fs: &FeatureSet, ridge: Ridge) -> Result<(Vec<DMatrix<f64>>, Vec<f64>)> {
    ridge.validate()?;
    let m = fs.dim();
    let mut sigmas = Vec::with_capacity(fs.views());
    let mut ridges = Vec::with_capacity(fs.views());
    for p in 0..fs.views() {
        let x = fs.view_features(p);
        let mut sigma = (&x * x.transpose()) / fs.view_len(p) as f64;
        let alpha = match ridge {
            Ridge::Fixed(a) => a,
            Ridge::Relative(f) => f * sigma.trace() / m as f64,
        };
        if alpha <= 0.0 {
            let eig = symmetric_eigenvalues(&sigma);
            let top = eig.last().copied().unwrap_or(0.0);
            if eig[0] <= 1e-12 * top.max(f64::MIN_POSITIVE) {
                return Err(CamelError::Singular(format!(
                    "covariance of view {} is rank-deficient and no ridge is applied",
                    p + 1
                )));
            }
        }
        for i in 0..m {
            sigma[(i, i)] += alpha;
        }
        sigmas.push(sigma);
        ridges.push(alpha);
    }
    Ok((sigmas, ridges))
}

pub fn build_block_data(fs: &FeatureSet, ridge: Ridge) -> Result<BlockData> {
    let (v, m, n) = (fs.views(), fs.dim(), fs.len());
    let mut x_tilde = DMatrix::zeros(v * m, n);
    for j in 0..n {
        let p = fs.view_of(j);
        x_tilde
            .view_mut((p * m, j), (m, 1))
            .copy_from(&fs.features().column(j));
    }
    let (view_sigma, ridges) = view_covariances(fs, ridge)?;
    let sigma_tilde = block_diagonal(&view_sigma);
    Ok(BlockData {
        x_tilde,
        sigma_tilde,
        view_sigma,
        ridges,
    })
}

pub fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(total, total);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
        at += b.nrows();
    }
    out
}

/// `VM x VM` matrix with `(V-1) I` diagonal blocks and `-I` off-diagonal blocks,
/// so that `Tr(U^T D U)` is the sum over view pairs `p < q` of `||U^p - U^q||_F^2`.
pub fn build_consistency_matrix(views: usize, dim: usize) -> DMatrix<f64> {
    let n = views * dim;
    DMatrix::from_fn(n, n, |r, c| {
        if r % dim != c % dim {
            0.0
        } else if r / dim == c / dim {
            (views - 1) as f64
        } else {
            -1.0
        }
    })
}

/// Stacks per-view `M x T` transforms into the `VM x T` matrix `[U^1; ...; U^V]`.
pub fn stack_transforms(transforms: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = transforms[0].nrows();
    let t = transforms[0].ncols();
    let mut out = DMatrix::zeros(m * transforms.len(), t);
    for (p, u) in transforms.iter().enumerate() {
        out.view_mut((p * m, 0), (m, t)).copy_from(u);
    }
    out
}

/// Splits a stacked `VM x T` matrix back into `views` transforms.
pub fn split_stacked(stacked: &DMatrix<f64>, views: usize) -> Vec<DMatrix<f64>> {
    let m = stacked.nrows() / views;
    (0..views)
        .map(|p| stacked.rows(p * m, m).into_owned())
        .collect()
}
