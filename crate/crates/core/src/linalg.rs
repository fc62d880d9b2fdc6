//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{CamelError, Result};

/// Eigenpairs of a symmetric-definite pencil `(A, B)`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: DVector<f64>,
    /// Columns are eigenvectors normalized to `u^T B u = scale`.
    pub vectors: DMatrix<f64>,
}

/// Cholesky factor of an SPD matrix, cached for repeated pencil solves.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: DMatrix<f64>,
}

impl SpdFactor {
    pub fn new(b: &DMatrix<f64>) -> Result<Self> {
        if !b.is_square() {
            return Err(CamelError::dim(format!(
                "expected a square matrix, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let sym = symmetrize(b);
        let chol = Cholesky::<f64, Dyn>::new(sym)
            .ok_or_else(|| CamelError::Singular("matrix is not positive definite".into()))?;
        let lower = chol.l();
        if lower
            .diagonal()
            .iter()
            .any(|d| !(d.is_finite() && *d > 0.0))
        {
            return Err(CamelError::Singular(
                "Cholesky factor has a zero pivot".into(),
            ));
        }
        Ok(Self { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Smallest `count` eigenpairs of `A u = gamma B u`, each scaled to `u^T B u = scale`.
    ///
    /// The pencil is reduced to the symmetric problem `L^-1 A L^-T w = gamma w`
    /// so the spectrum is real and the returned vectors are `B`-orthogonal.
    pub fn smallest_eigenpairs(
        &self,
        a: &DMatrix<f64>,
        count: usize,
        scale: f64,
    ) -> Result<GeneralizedEigen> {
        let n = self.dim();
        if a.nrows() != n || a.ncols() != n {
            return Err(CamelError::dim(format!(
                "pencil matrix is {}x{}, factor is {n}x{n}",
                a.nrows(),
                a.ncols()
            )));
        }
        if count == 0 || count > n {
            return Err(CamelError::invalid(format!(
                "cannot select {count} eigenpairs of a {n}x{n} pencil"
            )));
        }
        let left = self
            .lower
            .solve_lower_triangular(a)
            .ok_or_else(|| CamelError::Numerical("triangular solve failed".into()))?;
        let reduced = self
            .lower
            .solve_lower_triangular(&left.transpose())
            .ok_or_else(|| CamelError::Numerical("triangular solve failed".into()))?;
        let reduced = symmetrize(&reduced);
        if reduced.iter().any(|v| !v.is_finite()) {
            return Err(CamelError::Numerical(
                "non-finite entries in reduced pencil".into(),
            ));
        }

        let eig = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        order.truncate(count);

        let mut w = DMatrix::zeros(n, count);
        let mut values = DVector::zeros(count);
        for (col, &idx) in order.iter().enumerate() {
            values[col] = eig.eigenvalues[idx];
            w.set_column(col, &eig.eigenvectors.column(idx));
        }
        let mut vectors = self
            .lower
            .tr_solve_lower_triangular(&w)
            .ok_or_else(|| CamelError::Numerical("triangular solve failed".into()))?;
        vectors *= scale.sqrt();
        fix_signs(&mut vectors);
        Ok(GeneralizedEigen { values, vectors })
    }
}

/// Smallest `count` eigenpairs of the pencil `(a, b)` with `b` SPD.
pub fn generalized_smallest(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    count: usize,
    scale: f64,
) -> Result<GeneralizedEigen> {
    SpdFactor::new(b)?.smallest_eigenpairs(a, count, scale)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Flips each column so that its largest-magnitude entry is positive (first such entry on ties).
pub fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}
