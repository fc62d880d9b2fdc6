//! Synthetic cross-view data with known identities and known per-view distortion.
//!
//! Each identity has a latent vector `z ~ N(0, I)` in `latent_dim` dimensions,
//! embedded into `R^M` by a fixed orthonormal map `Q`. View `p` observes
//! `x = A^p Q z + b^p + e` with `A^p = I + bias_strength * R^p`, where `R^p` has
//! i.i.d. `U[-1, 1]` entries with unit-norm columns, `b^p` has i.i.d.
//! `U[-1, 1] * bias_strength` entries, and `e ~ N(0, noise_sigma^2 I)`.
//! Every feature is then divided by `sqrt(M)`, so a noiseless unbiased image has
//! expected squared norm `latent_dim / M`, close to that of an L2-normalized
//! descriptor.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CamelError, Result};
use crate::features::{FeatureSet, Sample};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub views: usize,
    pub ids: usize,
    pub per_view_per_id: usize,
    pub dim: usize,
    pub latent_dim: usize,
    pub bias_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            views: 2,
            ids: 200,
            per_view_per_id: 2,
            dim: 64,
            latent_dim: 64,
            bias_strength: 0.75,
            noise_sigma: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.views < 2 {
            return Err(CamelError::invalid(
                "synthetic data needs at least two views",
            ));
        }
        if self.ids == 0 || self.per_view_per_id == 0 || self.dim == 0 || self.latent_dim == 0 {
            return Err(CamelError::invalid(
                "synthetic counts and dimensions must be >= 1",
            ));
        }
        if self.latent_dim > self.dim {
            return Err(CamelError::invalid(format!(
                "latent dimension {} exceeds feature dimension {}",
                self.latent_dim, self.dim
            )));
        }
        if !(self.bias_strength.is_finite() && self.bias_strength >= 0.0) {
            return Err(CamelError::invalid("bias_strength must be finite and >= 0"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(CamelError::invalid("noise_sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Generated features together with the ground truth used to make them.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub features: FeatureSet,
    /// `M x latent_dim` orthonormal embedding `Q`.
    pub embedding: DMatrix<f64>,
    /// Per-view `A^p`.
    pub view_maps: Vec<DMatrix<f64>>,
    /// Per-view `b^p`.
    pub view_offsets: Vec<DVector<f64>>,
    /// Latent vector of each identity, indexed by identity id.
    pub latents: Vec<DVector<f64>>,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn generate_synthetic_with_truth(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (m, l) = (spec.dim, spec.latent_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let embedding = gaussian_matrix(&mut rng, m, l).qr().q();

    let mut view_maps = Vec::with_capacity(spec.views);
    let mut view_offsets = Vec::with_capacity(spec.views);
    for _ in 0..spec.views {
        let mut r = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..=1.0));
        for mut col in r.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        view_maps.push(DMatrix::identity(m, m) + r * spec.bias_strength);
        view_offsets.push(DVector::from_fn(m, |_, _| {
            rng.random_range(-1.0..=1.0) * spec.bias_strength
        }));
    }

    let latents: Vec<DVector<f64>> = (0..spec.ids)
        .map(|_| DVector::from_fn(l, |_, _| StandardNormal.sample(&mut rng)))
        .collect();

    let scale = 1.0 / (m as f64).sqrt();
    let mut samples = Vec::with_capacity(spec.views * spec.ids * spec.per_view_per_id);
    for (id, z) in latents.iter().enumerate() {
        let shared = &embedding * z;
        for p in 0..spec.views {
            let clean = &view_maps[p] * &shared + &view_offsets[p];
            for _ in 0..spec.per_view_per_id {
                let x: Vec<f64> = clean
                    .iter()
                    .map(|v| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        (v + spec.noise_sigma * e) * scale
                    })
                    .collect();
                samples.push(Sample::new(p, Some(id as u64), x));
            }
        }
    }
    Ok(SyntheticData {
        features: FeatureSet::new(spec.views, samples)?,
        embedding,
        view_maps,
        view_offsets,
        latents,
    })
}

/// Labelled synthetic features; deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FeatureSet> {
    Ok(generate_synthetic_with_truth(spec)?.features)
}

/// Splits a labelled set into identities `< boundary` and identities `>= boundary`.
pub fn split_identities(fs: &FeatureSet, boundary: u64) -> Result<(FeatureSet, FeatureSet)> {
    let ids = fs
        .identities()
        .ok_or_else(|| CamelError::invalid("splitting by identity needs labels"))?
        .to_vec();
    let first = fs.filter(|i| ids[i] < boundary)?;
    let second = fs.filter(|i| ids[i] >= boundary)?;
    Ok((first, second))
}
