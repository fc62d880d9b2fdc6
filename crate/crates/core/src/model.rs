use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::block::{block_diagonal, stack_transforms};
use crate::config::CamelConfig;
use crate::error::{CamelError, Result};

/// Which training procedure produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Per-view transforms learned by alternating clustering and eigen-solves.
    Camel,
    /// One transform shared by every view.
    Cmel,
    /// Per-view transforms learned from identity labels instead of clusters.
    Supervised,
    /// Identity transforms: plain Euclidean matching.
    Euclidean,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Camel => "camel",
            Variant::Cmel => "cmel",
            Variant::Supervised => "supervised",
            Variant::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = CamelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "camel" => Ok(Variant::Camel),
            "cmel" => Ok(Variant::Cmel),
            "supervised" => Ok(Variant::Supervised),
            "euclidean" => Ok(Variant::Euclidean),
            other => Err(CamelError::invalid(format!("unknown variant '{other}'"))),
        }
    }
}

/// How a model was trained.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInfo {
    pub variant: Variant,
    pub config: CamelConfig,
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl TrainingInfo {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_history.last().copied()
    }
}

/// Learned per-view linear maps `U^1 .. U^V`, each `M x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    transforms: Vec<DMatrix<f64>>,
    pub info: TrainingInfo,
}

impl ProjectionModel {
    pub fn new(transforms: Vec<DMatrix<f64>>, info: TrainingInfo) -> Result<Self> {
        let first = transforms
            .first()
            .ok_or_else(|| CamelError::invalid("model needs at least one view"))?;
        let (m, t) = first.shape();
        if m == 0 || t == 0 {
            return Err(CamelError::dim("transforms must be non-empty"));
        }
        if let Some(p) = transforms.iter().position(|u| u.shape() != (m, t)) {
            return Err(CamelError::dim(format!(
                "transform {} is {:?}, expected {:?}",
                p + 1,
                transforms[p].shape(),
                (m, t)
            )));
        }
        if transforms.iter().any(|u| u.iter().any(|v| !v.is_finite())) {
            return Err(CamelError::Numerical("model has non-finite entries".into()));
        }
        Ok(Self { transforms, info })
    }

    /// Euclidean baseline: `U^p = I_M` for every view.
    pub fn identity(views: usize, dim: usize) -> Self {
        let info = TrainingInfo {
            variant: Variant::Euclidean,
            config: CamelConfig::default(),
            objective_history: Vec::new(),
            iterations: 0,
            converged: true,
        };
        Self {
            transforms: vec![DMatrix::identity(dim, dim); views],
            info,
        }
    }

    pub fn views(&self) -> usize {
        self.transforms.len()
    }

    pub fn in_dim(&self) -> usize {
        self.transforms[0].nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.transforms[0].ncols()
    }

    pub fn transforms(&self) -> &[DMatrix<f64>] {
        &self.transforms
    }

    pub fn transform(&self, view: usize) -> Result<&DMatrix<f64>> {
        self.transforms.get(view).ok_or_else(|| {
            CamelError::invalid(format!(
                "view {} requested, model has {} views",
                view + 1,
                self.views()
            ))
        })
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        stack_transforms(&self.transforms)
    }

    /// `U^pT x`.
    pub fn project(&self, x: &DVector<f64>, view: usize) -> Result<DVector<f64>> {
        let u = self.transform(view)?;
        if x.len() != u.nrows() {
            return Err(CamelError::dim(format!(
                "feature has dimension {}, model expects {}",
                x.len(),
                u.nrows()
            )));
        }
        Ok(u.tr_mul(x))
    }

    /// Multiplies every transform by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            transforms: self.transforms.iter().map(|u| u * factor).collect(),
            info: self.info.clone(),
        }
    }

    /// `||U~^T Sigma~ U~ - V I_T||_F` for the given per-view covariances.
    pub fn constraint_residual(&self, view_sigma: &[DMatrix<f64>]) -> f64 {
        let u = self.stacked();
        let sigma = block_diagonal(view_sigma);
        let gram = u.transpose() * sigma * &u;
        let v = self.views() as f64;
        (gram - DMatrix::identity(self.out_dim(), self.out_dim()) * v).norm()
    }
}
