//! Cross-view feature collections.

use nalgebra::{DMatrix, DVector};

use crate::error::{CamelError, Result};

/// Identity label attached to a sample (a person, in re-identification terms).
pub type IdentityId = u64;

/// One observation: a feature vector seen from a given camera view.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Zero-based view index.
    pub view: usize,
    pub identity: Option<IdentityId>,
    pub feature: Vec<f64>,
}

impl Sample {
    pub fn new(view: usize, identity: Option<IdentityId>, feature: Vec<f64>) -> Self {
        Self {
            view,
            identity,
            feature,
        }
    }
}

/// Feature vectors from `V >= 2` views, stored column-wise and grouped by view.
///
/// Samples are kept in ascending view order and, within a view, in the order
/// they were supplied. Column `j` of [`FeatureSet::features`] is sample `j`,
/// which fixes the column order of the block data matrix built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    views: usize,
    features: DMatrix<f64>,
    view_of: Vec<usize>,
    identities: Option<Vec<IdentityId>>,
    offsets: Vec<usize>,
}

impl FeatureSet {
    /// Builds a feature set, validating dimensions, view coverage and labelling.
    pub fn new(views: usize, samples: Vec<Sample>) -> Result<Self> {
        if views < 2 {
            return Err(CamelError::invalid(format!(
                "at least two views are required, got {views}"
            )));
        }
        let first = samples
            .first()
            .ok_or_else(|| CamelError::invalid("feature set has no samples"))?;
        let dim = first.feature.len();
        if dim == 0 {
            return Err(CamelError::invalid("feature dimension must be >= 1"));
        }
        let labelled = first.identity.is_some();

        let mut counts = vec![0usize; views];
        for (i, s) in samples.iter().enumerate() {
            if s.view >= views {
                return Err(CamelError::invalid(format!(
                    "sample {i} has view {} but only {views} views exist",
                    s.view + 1
                )));
            }
            if s.feature.len() != dim {
                return Err(CamelError::dim(format!(
                    "sample {i} has dimension {}, expected {dim}",
                    s.feature.len()
                )));
            }
            if s.identity.is_some() != labelled {
                return Err(CamelError::invalid(
                    "identity labels must be present on all samples or on none",
                ));
            }
            if let Some(bad) = s.feature.iter().find(|v| !v.is_finite()) {
                return Err(CamelError::invalid(format!(
                    "sample {i} has non-finite feature value {bad}"
                )));
            }
            counts[s.view] += 1;
        }
        if let Some(p) = counts.iter().position(|&c| c == 0) {
            return Err(CamelError::invalid(format!(
                "view {} has no samples",
                p + 1
            )));
        }

        let mut offsets = Vec::with_capacity(views + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }

        let n = samples.len();
        let mut order: Vec<usize> = (0..n).collect();
        // stable: keeps input order within a view
        order.sort_by_key(|&i| samples[i].view);

        let mut features = DMatrix::zeros(dim, n);
        let mut view_of = Vec::with_capacity(n);
        let mut identities = labelled.then(|| Vec::with_capacity(n));
        for (col, &i) in order.iter().enumerate() {
            let s = &samples[i];
            features.column_mut(col).copy_from_slice(&s.feature);
            view_of.push(s.view);
            if let Some(ids) = identities.as_mut() {
                ids.push(s.identity.unwrap());
            }
        }

        Ok(Self {
            views,
            features,
            view_of,
            identities,
            offsets,
        })
    }

    pub fn views(&self) -> usize {
        self.views
    }

    /// Feature dimension `M`.
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    /// Total sample count `N`.
    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `M x N` matrix whose columns are the samples.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature(&self, i: usize) -> DVector<f64> {
        self.features.column(i).into_owned()
    }

    pub fn view_of(&self, i: usize) -> usize {
        self.view_of[i]
    }

    pub fn view_labels(&self) -> &[usize] {
        &self.view_of
    }

    pub fn identities(&self) -> Option<&[IdentityId]> {
        self.identities.as_deref()
    }

    pub fn is_labelled(&self) -> bool {
        self.identities.is_some()
    }

    /// Column range holding the samples of view `p`.
    pub fn view_range(&self, p: usize) -> std::ops::Range<usize> {
        self.offsets[p]..self.offsets[p + 1]
    }

    /// Sample count `N_p` of view `p`.
    pub fn view_len(&self, p: usize) -> usize {
        self.offsets[p + 1] - self.offsets[p]
    }

    /// `M x N_p` block of view `p`.
    pub fn view_features(&self, p: usize) -> DMatrix<f64> {
        let r = self.view_range(p);
        self.features.columns(r.start, r.len()).into_owned()
    }

    pub fn samples(&self) -> Vec<Sample> {
        (0..self.len())
            .map(|i| {
                Sample::new(
                    self.view_of[i],
                    self.identities.as_ref().map(|ids| ids[i]),
                    self.features.column(i).iter().copied().collect(),
                )
            })
            .collect()
    }

    /// Keeps the samples for which `keep(index)` is true. Fails if a view ends up empty.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> Result<Self> {
        let samples: Vec<Sample> = self
            .samples()
            .into_iter()
            .enumerate()
            .filter_map(|(i, s)| keep(i).then_some(s))
            .collect();
        Self::new(self.views, samples)
    }

    /// Replaces every feature vector with `f(view, feature)`; the output dimension may differ.
    pub fn map_features(
        &self,
        mut f: impl FnMut(usize, &DVector<f64>) -> DVector<f64>,
    ) -> Result<Self> {
        let samples = (0..self.len())
            .map(|i| {
                let y = f(self.view_of[i], &self.feature(i));
                Sample::new(
                    self.view_of[i],
                    self.identities.as_ref().map(|ids| ids[i]),
                    y.iter().copied().collect(),
                )
            })
            .collect();
        Self::new(self.views, samples)
    }
}
