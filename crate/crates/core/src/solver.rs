//! Alternating optimization: k-means on the projected data, then a generalized
//! eigen-solve for the stacked projection with the clustering held fixed.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::block::{block_diagonal, build_consistency_matrix, view_covariances, BlockData};
use crate::config::CamelConfig;
use crate::error::{CamelError, Result};
use crate::features::{FeatureSet, IdentityId};
use crate::indicator::IndicatorMatrix;
use crate::kmeans::{kmeans_with_rng, lloyd_from_assignment, KMeansResult, LloydOptions};
use crate::linalg::{frobenius_sq, symmetrize, SpdFactor};
use crate::model::{ProjectionModel, TrainingInfo, Variant};

/// Relative inertia tolerance used by the inner k-means runs.
const KMEANS_TOL: f64 = 1e-12;

/// Result of one projection update.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Stacked projection, one `M`-row block per parameter block.
    pub u_tilde: DMatrix<f64>,
    /// Selected generalized eigenvalues, ascending.
    pub eigenvalues: DVector<f64>,
}

/// Iteration record of a fit.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Final stacked `VM x T` projection.
    pub u_tilde: DMatrix<f64>,
    pub h: IndicatorMatrix,
    /// Cluster assignment produced by the initial k-means.
    pub initial_assignment: Vec<usize>,
    /// Objective after every projection update; entry 0 follows the initial clustering.
    pub objective_history: Vec<f64>,
    /// `||U~^T Sigma~ U~ - V I||_F` after every projection update.
    pub constraint_history: Vec<f64>,
    /// Completed alternation rounds (initial solve excluded).
    pub iteration: usize,
    pub converged: bool,
}

/// The `U~`-update with dense inputs: smallest `t` generalized eigenvectors of
/// `A = lambda D + (1/N) X~ (I - H H^T) X~^T` against `Sigma~`, each scaled to
/// `u^T Sigma~ u = V`.
pub fn solve_projection(
    block: &BlockData,
    h: &IndicatorMatrix,
    d: &DMatrix<f64>,
    lambda: f64,
    t: usize,
) -> Result<Projection> {
    let a = pencil_matrix(block, h, d, lambda)?;
    let factor = SpdFactor::new(&block.sigma_tilde)?;
    let views = block.view_sigma.len() as f64;
    let eig = factor.smallest_eigenpairs(&a, t, views)?;
    Ok(Projection {
        u_tilde: eig.vectors,
        eigenvalues: eig.values,
    })
}

/// `A = lambda D + (1/N) X~ X~^T - (1/N) X~ H H^T X~^T`.
pub fn pencil_matrix(
    block: &BlockData,
    h: &IndicatorMatrix,
    d: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let x = &block.x_tilde;
    if d.shape() != (x.nrows(), x.nrows()) || block.sigma_tilde.shape() != d.shape() {
        return Err(CamelError::dim(format!(
            "X~ has {} rows but D is {:?} and Sigma~ is {:?}",
            x.nrows(),
            d.shape(),
            block.sigma_tilde.shape()
        )));
    }
    let n = x.ncols() as f64;
    let xh = h.right_mul(x)?;
    let a = d * lambda + (x * x.transpose()) / n - (&xh * xh.transpose()) / n;
    Ok(symmetrize(&a))
}

/// Maps views onto parameter blocks: one block per view for the asymmetric
/// model, a single shared block for the symmetric one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    PerView,
    Shared,
}

/// Precomputed pieces of the projection update for one feature set.
///
/// Works on per-block sums instead of the dense `VM x N` block matrix. For the
/// shared layout, the covariance block is `sum_p Sigma^p` so the constraint
/// `U^T (sum_p Sigma^p) U = V I` is the per-view stacked constraint with all
/// `U^p` equal.
struct ProjectionProblem<'a> {
    fs: &'a FeatureSet,
    layout: Layout,
    lambda: f64,
    out_dim: usize,
    /// `lambda D + (1/N) X~ X~^T` in block coordinates.
    base: DMatrix<f64>,
    factor: SpdFactor,
    view_sigma: Vec<DMatrix<f64>>,
}

impl<'a> ProjectionProblem<'a> {
    fn new(fs: &'a FeatureSet, cfg: &CamelConfig, layout: Layout) -> Result<Self> {
        let (v, m, n) = (fs.views(), fs.dim(), fs.len() as f64);
        let (view_sigma, _) = view_covariances(fs, cfg.ridge)?;
        let blocks = match layout {
            Layout::PerView => v,
            Layout::Shared => 1,
        };
        let mut base = DMatrix::zeros(blocks * m, blocks * m);
        for p in 0..v {
            let x = fs.view_features(p);
            let b = block_of(layout, p);
            let mut view = base.view_mut((b * m, b * m), (m, m));
            view += (&x * x.transpose()) / n;
        }
        if blocks > 1 {
            base += build_consistency_matrix(blocks, m) * cfg.lambda;
        }
        let sigma = match layout {
            Layout::PerView => block_diagonal(&view_sigma),
            Layout::Shared => view_sigma
                .iter()
                .fold(DMatrix::zeros(m, m), |acc, s| acc + s),
        };
        let factor = SpdFactor::new(&sigma)?;
        let out_dim = cfg.resolved_out_dim(m);
        if out_dim > blocks * m {
            return Err(CamelError::invalid(format!(
                "output dimension {out_dim} exceeds the {} available directions",
                blocks * m
            )));
        }
        Ok(Self {
            fs,
            layout,
            lambda: cfg.lambda,
            out_dim,
            base,
            factor,
            view_sigma,
        })
    }

    fn blocks(&self) -> usize {
        match self.layout {
            Layout::PerView => self.fs.views(),
            Layout::Shared => 1,
        }
    }

    /// `X~ H` in block coordinates, `BM x K`.
    fn data_times_indicator(&self, h: &IndicatorMatrix) -> DMatrix<f64> {
        let m = self.fs.dim();
        let mut xh = DMatrix::zeros(self.blocks() * m, h.clusters());
        let x = self.fs.features();
        for (i, &k) in h.assignment().iter().enumerate() {
            let b = block_of(self.layout, self.fs.view_of(i));
            let mut dst = xh.view_mut((b * m, k), (m, 1));
            dst += x.column(i);
        }
        for (k, &size) in h.cluster_sizes().iter().enumerate() {
            if size > 0 {
                xh.column_mut(k).scale_mut(1.0 / (size as f64).sqrt());
            }
        }
        xh
    }

    fn pencil(&self, h: &IndicatorMatrix) -> DMatrix<f64> {
        let xh = self.data_times_indicator(h);
        let n = self.fs.len() as f64;
        symmetrize(&(&self.base - (&xh * xh.transpose()) / n))
    }

    fn solve(&self, h: &IndicatorMatrix) -> Result<Projection> {
        let a = self.pencil(h);
        let eig = self
            .factor
            .smallest_eigenpairs(&a, self.out_dim, self.fs.views() as f64)?;
        Ok(Projection {
            u_tilde: eig.vectors,
            eigenvalues: eig.values,
        })
    }

    /// Per-view transforms from a block-coordinate solution.
    fn transforms(&self, u: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let m = self.fs.dim();
        (0..self.fs.views())
            .map(|p| u.rows(block_of(self.layout, p) * m, m).into_owned())
            .collect()
    }

    /// `T x N` projected samples.
    fn project(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.fs.dim();
        let mut y = DMatrix::zeros(u.ncols(), self.fs.len());
        for p in 0..self.fs.views() {
            let r = self.fs.view_range(p);
            let up = u.rows(block_of(self.layout, p) * m, m);
            let block = up.tr_mul(&self.fs.features().columns(r.start, r.len()));
            y.columns_mut(r.start, r.len()).copy_from(&block);
        }
        y
    }

    fn objective(&self, u: &DMatrix<f64>, h: &IndicatorMatrix) -> Result<f64> {
        let y = self.project(u);
        let yh = h.right_mul(&y)?;
        let n = self.fs.len() as f64;
        let transforms = self.transforms(u);
        let consistency = crate::objective::consistency_penalty(&transforms);
        let f = (frobenius_sq(&y) - frobenius_sq(&yh)) / n + self.lambda * consistency;
        if !f.is_finite() {
            return Err(CamelError::Numerical(format!("objective became {f}")));
        }
        Ok(f)
    }

    fn constraint_residual(&self, u: &DMatrix<f64>) -> f64 {
        let t = u.ncols();
        let v = self.fs.views() as f64;
        let mut gram = DMatrix::zeros(t, t);
        for (p, up) in self.transforms(u).iter().enumerate() {
            gram += up.transpose() * &self.view_sigma[p] * up;
        }
        (gram - DMatrix::identity(t, t) * v).norm()
    }
}

fn block_of(layout: Layout, view: usize) -> usize {
    match layout {
        Layout::PerView => view,
        Layout::Shared => 0,
    }
}

/// H-step: Lloyd warm-started from the current partition, raced against a fresh
/// k-means++ run in the projected space. The lower inertia wins, so the
/// within-cluster term never increases.
fn update_clusters(
    y: &DMatrix<f64>,
    h: &IndicatorMatrix,
    k: usize,
    rng: &mut ChaCha8Rng,
    opts: LloydOptions,
) -> Result<KMeansResult> {
    let warm = lloyd_from_assignment(y, h.assignment(), k, opts)?;
    let fresh = kmeans_with_rng(y, k, rng, opts)?;
    Ok(if fresh.inertia < warm.inertia {
        fresh
    } else {
        warm
    })
}

/// Stacked-and-zero-padded data matrix `X~` with samples as columns.
fn padded_columns(fs: &FeatureSet) -> DMatrix<f64> {
    let m = fs.dim();
    let mut x = DMatrix::zeros(fs.views() * m, fs.len());
    for j in 0..fs.len() {
        let p = fs.view_of(j);
        x.view_mut((p * m, j), (m, 1))
            .copy_from(&fs.features().column(j));
    }
    x
}

fn alternate(
    fs: &FeatureSet,
    cfg: &CamelConfig,
    layout: Layout,
    variant: Variant,
) -> Result<(ProjectionModel, SolverState)> {
    cfg.validate(fs.views(), fs.dim())?;
    if cfg.clusters > fs.len() {
        return Err(CamelError::invalid(format!(
            "{} clusters requested for {} samples",
            cfg.clusters,
            fs.len()
        )));
    }
    let problem = ProjectionProblem::new(fs, cfg, layout)?;
    let opts = LloydOptions {
        max_iter: cfg.kmeans_max_iter,
        tol: KMEANS_TOL,
    };
    let k = cfg.clusters;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = {
        let padded = padded_columns(fs);
        kmeans_with_rng(&padded, k, &mut rng, opts)?
    };
    let initial_assignment = init.assignment.clone();
    let mut h = IndicatorMatrix::from_assignment(&init.assignment, k)?;
    let mut u = problem.solve(&h)?.u_tilde;
    let mut f = problem.objective(&u, &h)?;
    let mut objective_history = vec![f];
    let mut constraint_history = vec![problem.constraint_residual(&u)];

    let mut iteration = 0;
    let mut converged = false;
    while iteration < cfg.max_iter {
        let y = problem.project(&u);
        let clustering = update_clusters(&y, &h, k, &mut rng, opts)?;
        let next_h = IndicatorMatrix::from_assignment(&clustering.assignment, k)?;
        let next_u = problem.solve(&next_h)?.u_tilde;
        let next_f = problem.objective(&next_u, &next_h)?;
        iteration += 1;
        objective_history.push(next_f);
        constraint_history.push(problem.constraint_residual(&next_u));
        let decrement = f - next_f;
        u = next_u;
        h = next_h;
        f = next_f;
        if decrement <= cfg.epsilon {
            converged = true;
            break;
        }
    }

    let transforms = problem.transforms(&u);
    let info = TrainingInfo {
        variant,
        config: cfg.clone(),
        objective_history: objective_history.clone(),
        iterations: iteration,
        converged,
    };
    let model = ProjectionModel::new(transforms, info)?;
    let state = SolverState {
        u_tilde: model.stacked(),
        h,
        initial_assignment,
        objective_history,
        constraint_history,
        iteration,
        converged,
    };
    Ok((model, state))
}

/// Learns one projection per view by alternating k-means and eigen-solves
/// until the objective decrement drops to `cfg.epsilon` or `cfg.max_iter` rounds run.
pub fn camel_fit(fs: &FeatureSet, cfg: &CamelConfig) -> Result<(ProjectionModel, SolverState)> {
    alternate(fs, cfg, Layout::PerView, Variant::Camel)
}

/// The symmetric variant: same alternation with a single transform shared by all views.
pub fn cmel_fit(fs: &FeatureSet, cfg: &CamelConfig) -> Result<(ProjectionModel, SolverState)> {
    alternate(fs, cfg, Layout::Shared, Variant::Cmel)
}

/// Dense zero-based cluster ids for the identity labels, in ascending identity order.
pub fn identity_assignment(labels: &[IdentityId]) -> (Vec<usize>, usize) {
    let distinct: BTreeSet<IdentityId> = labels.iter().copied().collect();
    let index: BTreeMap<IdentityId, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    (labels.iter().map(|id| index[id]).collect(), distinct.len())
}

/// Supervised variant: a single projection update with clusters given by the identity labels.
pub fn camel_fit_supervised(fs: &FeatureSet, cfg: &CamelConfig) -> Result<ProjectionModel> {
    let labels = fs
        .identities()
        .ok_or_else(|| CamelError::invalid("supervised fitting needs identity labels"))?;
    let (assignment, k) = identity_assignment(labels);
    let h = IndicatorMatrix::from_assignment(&assignment, k)?;
    let mut cfg = cfg.clone();
    cfg.clusters = k.max(2);
    cfg.validate(fs.views(), fs.dim())?;
    let problem = ProjectionProblem::new(fs, &cfg, Layout::PerView)?;
    let u = problem.solve(&h)?.u_tilde;
    let f = problem.objective(&u, &h)?;
    let info = TrainingInfo {
        variant: Variant::Supervised,
        config: cfg,
        objective_history: vec![f],
        iterations: 0,
        converged: true,
    };
    ProjectionModel::new(problem.transforms(&u), info)
}

/// Composition of one cluster in a purity report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterComposition {
    pub cluster: usize,
    pub size: usize,
    pub distinct_identities: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurityReport {
    /// Fraction of nonempty clusters holding more than one identity.
    pub rate_mixed: f64,
    /// Nonempty clusters in ascending id order.
    pub clusters: Vec<ClusterComposition>,
}

pub fn cluster_purity_report(assignment: &[usize], labels: &[IdentityId]) -> Result<PurityReport> {
    if assignment.len() != labels.len() {
        return Err(CamelError::dim(format!(
            "{} assignments for {} labels",
            assignment.len(),
            labels.len()
        )));
    }
    let mut members: BTreeMap<usize, (usize, BTreeSet<IdentityId>)> = BTreeMap::new();
    for (&c, &id) in assignment.iter().zip(labels) {
        let e = members.entry(c).or_default();
        e.0 += 1;
        e.1.insert(id);
    }
    let clusters: Vec<ClusterComposition> = members
        .into_iter()
        .map(|(cluster, (size, ids))| ClusterComposition {
            cluster,
            size,
            distinct_identities: ids.len(),
        })
        .collect();
    let mixed = clusters
        .iter()
        .filter(|c| c.distinct_identities > 1)
        .count();
    let rate_mixed = if clusters.is_empty() {
        0.0
    } else {
        mixed as f64 / clusters.len() as f64
    };
    Ok(PurityReport {
        rate_mixed,
        clusters,
    })
}
