//! Deterministic Lloyd k-means with k-means++ seeding.
//!
//! Points are the columns of a `d x N` matrix and centroids the columns of a
//! `d x K` matrix. A cluster that loses all of its members keeps its last
//! centroid and is retired: it stays empty for the rest of the run, so `K`
//! never changes and the inertia sequence is non-increasing.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CamelError, Result};

const CHUNK: usize = 512;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Zero-based cluster id per point.
    pub assignment: Vec<usize>,
    /// `d x K`; retired clusters keep their last position.
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
    /// Inertia after every (assign, recenter) pass, in order.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    /// True when a pass changed no assignment.
    pub converged: bool,
}

impl KMeansResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.ncols()];
        for &k in &self.assignment {
            sizes[k] += 1;
        }
        sizes
    }
}

/// Stopping rule shared by the Lloyd passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydOptions {
    pub max_iter: usize,
    /// Stop once a pass lowers the inertia by no more than `tol * inertia`.
    pub tol: f64,
}

impl Default for LloydOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-12,
        }
    }
}

/// k-means++ seeding followed by Lloyd iterations, seeded by `seed`.
pub fn kmeans(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kmeans_with_rng(points, k, &mut rng, LloydOptions { max_iter, tol })
}

pub fn kmeans_with_rng<R: Rng>(
    points: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
    opts: LloydOptions,
) -> Result<KMeansResult> {
    check_options(&opts)?;
    let centroids = kmeans_plus_plus(points, k, rng)?;
    Ok(lloyd(points, centroids, vec![true; k], opts))
}

/// Picks `k` distinct points as initial centroids, each with probability
/// proportional to its squared distance from the centroids chosen so far.
pub fn kmeans_plus_plus<R: Rng>(
    points: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = points.ncols();
    if n == 0 {
        return Err(CamelError::invalid("k-means needs at least one point"));
    }
    if k == 0 {
        return Err(CamelError::invalid("k-means needs at least one cluster"));
    }
    if k > n {
        return Err(CamelError::invalid(format!(
            "cannot seed {k} clusters from {n} points"
        )));
    }
    let mut centroids = DMatrix::zeros(points.nrows(), k);
    let first = rng.random_range(0..n);
    centroids.set_column(0, &points.column(first));
    let mut nearest = sq_dist_to(points, &points.column(first).into_owned());

    for j in 1..k {
        let total: f64 = nearest.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(CamelError::invalid(format!(
                "only {j} distinct points available for {k} clusters"
            )));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in nearest.iter().enumerate() {
            if d > 0.0 {
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
        }
        let pick = pick.expect("positive total implies a positive entry");
        let c = points.column(pick).into_owned();
        centroids.set_column(j, &c);
        let d = sq_dist_to(points, &c);
        for (n, d) in nearest.iter_mut().zip(d) {
            if d < *n {
                *n = d;
            }
        }
    }
    Ok(centroids)
}

/// Lloyd iterations from explicit centroids; only `active` clusters receive points.
pub fn lloyd(
    points: &DMatrix<f64>,
    mut centroids: DMatrix<f64>,
    mut active: Vec<bool>,
    opts: LloydOptions,
) -> KMeansResult {
    let k = centroids.ncols();
    let mut assignment = vec![usize::MAX; points.ncols()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let next = assign_active(points, &centroids, &active);
        let changed = next.iter().zip(&assignment).filter(|(a, b)| a != b).count();
        assignment = next;
        recenter(points, &assignment, &mut centroids, &mut active);
        let inertia = inertia_of(points, &centroids, &assignment);
        let prev = history.last().copied();
        history.push(inertia);
        if changed == 0 {
            converged = true;
            break;
        }
        if let Some(prev) = prev {
            if prev - inertia <= opts.tol * inertia {
                break;
            }
        }
    }
    debug_assert!(assignment.iter().all(|&a| a < k));
    KMeansResult {
        inertia: history.last().copied().unwrap_or(0.0),
        assignment,
        centroids,
        inertia_history: history,
        iterations,
        converged,
    }
}

/// Lloyd iterations starting from the cluster means of an existing assignment.
///
/// Clusters that are empty in `assignment` are retired. The final inertia never
/// exceeds the within-cluster sum of squares of the starting assignment.
pub fn lloyd_from_assignment(
    points: &DMatrix<f64>,
    assignment: &[usize],
    k: usize,
    opts: LloydOptions,
) -> Result<KMeansResult> {
    if assignment.len() != points.ncols() {
        return Err(CamelError::dim(format!(
            "assignment has {} entries for {} points",
            assignment.len(),
            points.ncols()
        )));
    }
    if let Some(&bad) = assignment.iter().find(|&&c| c >= k) {
        return Err(CamelError::invalid(format!(
            "cluster id {bad} out of range for {k}"
        )));
    }
    check_options(&opts)?;
    let mut centroids = DMatrix::zeros(points.nrows(), k);
    let mut active = vec![true; k];
    recenter(points, assignment, &mut centroids, &mut active);
    Ok(lloyd(points, centroids, active, opts))
}

/// Nearest centroid for every point; ties go to the lowest cluster index.
pub fn assign_to_centroids(points: &DMatrix<f64>, centroids: &DMatrix<f64>) -> Result<Vec<usize>> {
    if points.nrows() != centroids.nrows() {
        return Err(CamelError::dim(format!(
            "points have dimension {}, centroids {}",
            points.nrows(),
            centroids.nrows()
        )));
    }
    if centroids.ncols() == 0 {
        return Err(CamelError::invalid("no centroids"));
    }
    Ok(assign_active(
        points,
        centroids,
        &vec![true; centroids.ncols()],
    ))
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn inertia_of(points: &DMatrix<f64>, centroids: &DMatrix<f64>, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &k)| (points.column(i) - centroids.column(k)).norm_squared())
        .sum()
}

fn check_options(opts: &LloydOptions) -> Result<()> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(CamelError::invalid(format!(
            "k-means tolerance must be > 0, got {}",
            opts.tol
        )));
    }
    if opts.max_iter == 0 {
        return Err(CamelError::invalid("k-means max_iter must be >= 1"));
    }
    Ok(())
}

fn sq_dist_to(points: &DMatrix<f64>, c: &DVector<f64>) -> Vec<f64> {
    points
        .column_iter()
        .map(|x| (x - c).norm_squared())
        .collect()
}

fn assign_active(points: &DMatrix<f64>, centroids: &DMatrix<f64>, active: &[bool]) -> Vec<usize> {
    // argmin_k ||x - c_k||^2 = argmin_k (||c_k||^2 - 2 c_k . x)
    let live: Vec<usize> = (0..centroids.ncols()).filter(|&k| active[k]).collect();
    let mut packed = DMatrix::zeros(live.len(), centroids.nrows());
    for (row, &k) in live.iter().enumerate() {
        packed.row_mut(row).tr_copy_from(&centroids.column(k));
    }
    let norms: Vec<f64> = live
        .iter()
        .map(|&k| centroids.column(k).norm_squared())
        .collect();

    let n = points.ncols();
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let chunks: Vec<Vec<usize>> = starts
        .par_iter()
        .map(|&start| {
            let len = CHUNK.min(n - start);
            let dots = &packed * points.columns(start, len);
            (0..len)
                .map(|j| {
                    let mut best = 0;
                    let mut best_score = f64::INFINITY;
                    for (row, norm) in norms.iter().enumerate() {
                        let score = norm - 2.0 * dots[(row, j)];
                        if score < best_score {
                            best_score = score;
                            best = row;
                        }
                    }
                    live[best]
                })
                .collect()
        })
        .collect();
    chunks.concat()
}

fn recenter(
    points: &DMatrix<f64>,
    assignment: &[usize],
    centroids: &mut DMatrix<f64>,
    active: &mut [bool],
) {
    let k = centroids.ncols();
    let mut sums = DMatrix::zeros(points.nrows(), k);
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        let mut col = sums.column_mut(c);
        col += points.column(i);
        counts[c] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            centroids.set_column(c, &(sums.column(c) / counts[c] as f64));
        } else {
            active[c] = false;
        }
    }
}
