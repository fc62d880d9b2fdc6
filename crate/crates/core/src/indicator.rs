//! Scaled cluster-indicator matrices.

use nalgebra::DMatrix;

use crate::error::{CamelError, Result};

/// `N x K` indicator `H` with `H[i, k] = 1/sqrt(n_k)` when sample `i` is in cluster `k`.
///
/// Stored by assignment; columns of empty clusters are all zero. Columns of
/// nonempty clusters are orthonormal, so `H^T H` is the identity restricted to
/// nonempty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl IndicatorMatrix {
    /// Builds `H` from zero-based cluster ids, all of which must be `< k`.
    pub fn from_assignment(assignment: &[usize], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(CamelError::invalid("cluster count must be >= 1"));
        }
        let mut sizes = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            if c >= k {
                return Err(CamelError::invalid(format!(
                    "sample {i} assigned to cluster {} but only {k} clusters exist",
                    c + 1
                )));
            }
            sizes[c] += 1;
        }
        Ok(Self {
            assignment: assignment.to_vec(),
            sizes,
        })
    }

    /// Number of rows (samples).
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Number of columns (clusters), empty ones included.
    pub fn clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn empty_clusters(&self) -> Vec<usize> {
        (0..self.clusters())
            .filter(|&k| self.sizes[k] == 0)
            .collect()
    }

    pub fn entry(&self, i: usize, k: usize) -> f64 {
        if self.assignment[i] == k {
            1.0 / (self.sizes[k] as f64).sqrt()
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.len(), self.clusters());
        for (i, &k) in self.assignment.iter().enumerate() {
            h[(i, k)] = 1.0 / (self.sizes[k] as f64).sqrt();
        }
        h
    }

    /// `M H` for a `d x N` matrix `M`, without materializing `H`.
    pub fn right_mul(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.ncols() != self.len() {
            return Err(CamelError::dim(format!(
                "matrix has {} columns, indicator has {} rows",
                m.ncols(),
                self.len()
            )));
        }
        let mut out = DMatrix::zeros(m.nrows(), self.clusters());
        for (i, &k) in self.assignment.iter().enumerate() {
            let mut col = out.column_mut(k);
            col += m.column(i);
        }
        for (k, &n) in self.sizes.iter().enumerate() {
            if n > 0 {
                out.column_mut(k).scale_mut(1.0 / (n as f64).sqrt());
            }
        }
        Ok(out)
    }

    /// `||H^T H - I_K'||_F` where `I_K'` has ones only on nonempty clusters.
    pub fn orthonormality_error(&self) -> f64 {
        let h = self.to_dense();
        let mut g = h.transpose() * &h;
        for (k, &n) in self.sizes.iter().enumerate() {
            if n > 0 {
                g[(k, k)] -= 1.0;
            }
        }
        g.norm()
    }
}
