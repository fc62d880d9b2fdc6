use crate::error::{CamelError, Result};

/// Ridge added to each per-view covariance block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// Fixed `alpha` for every view.
    Fixed(f64),
    /// `alpha_p = factor * Tr(Sigma_p) / M`: a fraction of view `p`'s mean per-feature second moment.
    Relative(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(0.01)
    }
}

impl Ridge {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            Ridge::Fixed(a) | Ridge::Relative(a) => a,
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(CamelError::invalid(format!(
                "ridge must be finite and >= 0, got {v}"
            )));
        }
        Ok(())
    }
}

/// Hyperparameters of the alternating optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct CamelConfig {
    /// Cross-view consistency weight.
    pub lambda: f64,
    /// Number of clusters.
    pub clusters: usize,
    /// Output dimension `T`; `None` means "same as the feature dimension".
    pub out_dim: Option<usize>,
    pub ridge: Ridge,
    /// Stop once the objective decreases by no more than this.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Iteration cap for each inner k-means run.
    pub kmeans_max_iter: usize,
    pub seed: u64,
}

impl Default for CamelConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            clusters: 500,
            out_dim: None,
            ridge: Ridge::default(),
            epsilon: 1e-8,
            max_iter: 100,
            kmeans_max_iter: 100,
            seed: 0,
        }
    }
}

impl CamelConfig {
    pub fn with_clusters(mut self, k: usize) -> Self {
        self.clusters = k;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_out_dim(mut self, t: usize) -> Self {
        self.out_dim = Some(t);
        self
    }

    pub fn with_ridge(mut self, ridge: Ridge) -> Self {
        self.ridge = ridge;
        self
    }

    /// Output dimension for features of dimension `dim`.
    pub fn resolved_out_dim(&self, dim: usize) -> usize {
        self.out_dim.unwrap_or(dim)
    }

    /// Checks the config against a data shape (`views` views of dimension `dim`).
    pub fn validate(&self, views: usize, dim: usize) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(CamelError::invalid(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.clusters < 2 {
            return Err(CamelError::invalid(format!(
                "cluster count must be >= 2, got {}",
                self.clusters
            )));
        }
        let t = self.resolved_out_dim(dim);
        if t == 0 || t > views * dim {
            return Err(CamelError::invalid(format!(
                "output dimension must lie in [1, {}], got {t}",
                views * dim
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(CamelError::invalid(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 || self.kmeans_max_iter == 0 {
            return Err(CamelError::invalid("iteration caps must be >= 1"));
        }
        self.ridge.validate()
    }
}
