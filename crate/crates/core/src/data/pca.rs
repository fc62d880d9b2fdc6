use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CamelError, Result};
use crate::features::FeatureSet;
use crate::linalg::{fix_signs, symmetrize};

/// Principal components of the pooled features of all views.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// `M x out_dim`, columns ordered by decreasing variance.
    pub components: DMatrix<f64>,
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(fs: &FeatureSet, out_dim: usize) -> Result<Self> {
        let m = fs.dim();
        if out_dim == 0 || out_dim > m {
            return Err(CamelError::invalid(format!(
                "PCA output dimension must lie in [1, {m}], got {out_dim}"
            )));
        }
        let x = fs.features();
        let n = x.ncols() as f64;
        let mean = x.column_mean();
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        let cov = symmetrize(&((&centered * centered.transpose()) / n));
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        order.truncate(out_dim);
        let mut components = DMatrix::zeros(m, out_dim);
        for (c, &i) in order.iter().enumerate() {
            components.set_column(c, &eig.eigenvectors.column(i));
        }
        fix_signs(&mut components);
        let variances = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        Ok(Self {
            mean,
            components,
            variances,
        })
    }

    pub fn transform(&self, fs: &FeatureSet) -> Result<FeatureSet> {
        if fs.dim() != self.mean.len() {
            return Err(CamelError::dim(format!(
                "PCA fitted on dimension {}, got {}",
                self.mean.len(),
                fs.dim()
            )));
        }
        fs.map_features(|_, x| self.components.tr_mul(&(x - &self.mean)))
    }
}

/// Projects the features onto their top `out_dim` principal components.
pub fn pca_reduce(fs: &FeatureSet, out_dim: usize) -> Result<FeatureSet> {
    Pca::fit(fs, out_dim)?.transform(fs)
}
