//! Cross-view matching and re-identification metrics (CMC, mAP).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CamelError, Result};
use crate::features::{FeatureSet, IdentityId};
use crate::model::ProjectionModel;

/// `||U^pT x - U^qT y||_2`.
pub fn asymmetric_distance(
    model: &ProjectionModel,
    x: &DVector<f64>,
    p: usize,
    y: &DVector<f64>,
    q: usize,
) -> Result<f64> {
    Ok((model.project(x, p)? - model.project(y, q)?).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    SingleShot,
    MultiShot,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::SingleShot => "single",
            Protocol::MultiShot => "multi",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = CamelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Protocol::SingleShot),
            "multi" => Ok(Protocol::MultiShot),
            other => Err(CamelError::invalid(format!("unknown protocol '{other}'"))),
        }
    }
}

/// A sample referenced by a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitEntry {
    /// Column index into the feature set.
    pub index: usize,
    pub identity: IdentityId,
    pub view: usize,
}

/// Gallery and probe sets for one evaluation round.
///
/// Every identity contributes `shots` gallery images taken from one of its
/// views; its images in the other views become probes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GalleryProbeSplit {
    pub gallery: Vec<SplitEntry>,
    pub probes: Vec<SplitEntry>,
    pub shots: usize,
    /// Identities left out because no view had `shots` images plus a cross-view probe.
    pub excluded_identities: Vec<IdentityId>,
}

/// Draws a gallery/probe split. Single-shot always uses one gallery image per identity.
pub fn build_split(
    fs: &FeatureSet,
    protocol: Protocol,
    shots: usize,
    seed: u64,
) -> Result<GalleryProbeSplit> {
    let labels = fs
        .identities()
        .ok_or_else(|| CamelError::invalid("building a split needs identity labels"))?;
    let shots = match protocol {
        Protocol::SingleShot => 1,
        Protocol::MultiShot => shots,
    };
    if shots == 0 {
        return Err(CamelError::invalid("shots must be >= 1"));
    }

    // identity -> view -> sample indices (ascending)
    let mut by_id: BTreeMap<IdentityId, Vec<Vec<usize>>> = BTreeMap::new();
    for (i, &id) in labels.iter().enumerate() {
        by_id
            .entry(id)
            .or_insert_with(|| vec![Vec::new(); fs.views()])[fs.view_of(i)]
        .push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = GalleryProbeSplit {
        gallery: Vec::new(),
        probes: Vec::new(),
        shots,
        excluded_identities: Vec::new(),
    };
    for (&id, per_view) in &by_id {
        let total: usize = per_view.iter().map(Vec::len).sum();
        let candidates: Vec<usize> = (0..per_view.len())
            .filter(|&v| per_view[v].len() >= shots && total > per_view[v].len())
            .collect();
        if candidates.is_empty() {
            split.excluded_identities.push(id);
            continue;
        }
        let gallery_view = candidates[rng.random_range(0..candidates.len())];
        let pool = &per_view[gallery_view];
        let mut picked: Vec<usize> = sample(&mut rng, pool.len(), shots)
            .into_iter()
            .map(|j| pool[j])
            .collect();
        picked.sort_unstable();
        split
            .gallery
            .extend(picked.into_iter().map(|index| SplitEntry {
                index,
                identity: id,
                view: gallery_view,
            }));
        for (v, idx) in per_view.iter().enumerate() {
            if v != gallery_view {
                split.probes.extend(idx.iter().map(|&index| SplitEntry {
                    index,
                    identity: id,
                    view: v,
                }));
            }
        }
    }
    Ok(split)
}

/// Ranking outcome for one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRanking {
    pub probe: SplitEntry,
    /// Gallery identities ordered by ascending identity score.
    pub ranked_identities: Vec<IdentityId>,
    /// Zero-based position of the true identity.
    pub truth_rank: usize,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    /// Probes whose identity is matchable in the gallery, in probe order.
    pub rankings: Vec<ProbeRanking>,
    /// `cmc[k-1]` is the rank-k accuracy, `k = 1..` number of gallery identities.
    pub cmc: Vec<f64>,
    pub map: f64,
    /// Probes skipped because their identity has no cross-view gallery image.
    pub excluded_probes: usize,
}

impl RankingResult {
    pub fn rank1(&self) -> f64 {
        self.cmc.first().copied().unwrap_or(0.0)
    }
}

/// Ranks the gallery for every probe of `split` with the model's cross-view distance.
pub fn rank_gallery(
    model: &ProjectionModel,
    split: &GalleryProbeSplit,
    fs: &FeatureSet,
) -> Result<RankingResult> {
    if model.views() != fs.views() || model.in_dim() != fs.dim() {
        return Err(CamelError::dim(format!(
            "model expects {} views of dimension {}, features have {} views of dimension {}",
            model.views(),
            model.in_dim(),
            fs.views(),
            fs.dim()
        )));
    }
    let project = |e: &SplitEntry| model.project(&fs.feature(e.index), e.view);
    let gallery: Vec<DVector<f64>> = split.gallery.iter().map(project).collect::<Result<_>>()?;
    let probes: Vec<DVector<f64>> = split.probes.iter().map(project).collect::<Result<_>>()?;

    let rows: Vec<Vec<f64>> = probes
        .par_iter()
        .map(|p| gallery.iter().map(|g| (p - g).norm()).collect())
        .collect();
    let distances = DMatrix::from_fn(probes.len(), gallery.len(), |i, j| rows[i][j]);
    Ok(rank_from_distances(
        &distances,
        &split.probes,
        &split.gallery,
    ))
}

/// Ranking from a precomputed `probes x gallery` distance matrix.
///
/// Gallery images sharing both identity and view with a probe are ignored for
/// that probe. An identity scores the minimum distance over its remaining
/// images; ties go to the lower identity id.
pub fn rank_from_distances(
    distances: &DMatrix<f64>,
    probes: &[SplitEntry],
    gallery: &[SplitEntry],
) -> RankingResult {
    let gallery_ids: BTreeSet<IdentityId> = gallery.iter().map(|g| g.identity).collect();
    let mut rankings = Vec::with_capacity(probes.len());
    let mut excluded = 0;

    for (pi, probe) in probes.iter().enumerate() {
        let valid: Vec<usize> = (0..gallery.len())
            .filter(|&j| !(gallery[j].identity == probe.identity && gallery[j].view == probe.view))
            .collect();

        let mut best: BTreeMap<IdentityId, f64> = BTreeMap::new();
        for &j in &valid {
            let d = distances[(pi, j)];
            best.entry(gallery[j].identity)
                .and_modify(|b| {
                    if d < *b {
                        *b = d
                    }
                })
                .or_insert(d);
        }
        let mut scored: Vec<(IdentityId, f64)> = best.into_iter().collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let ranked_identities: Vec<IdentityId> = scored.iter().map(|s| s.0).collect();
        let Some(truth_rank) = ranked_identities
            .iter()
            .position(|&id| id == probe.identity)
        else {
            excluded += 1;
            continue;
        };

        let mut images = valid.clone();
        images.sort_by(|&a, &b| {
            distances[(pi, a)]
                .total_cmp(&distances[(pi, b)])
                .then(gallery[a].identity.cmp(&gallery[b].identity))
                .then(a.cmp(&b))
        });
        let image_ids: Vec<IdentityId> = images.iter().map(|&j| gallery[j].identity).collect();
        let average_precision = average_precision(&image_ids, probe.identity)
            .expect("truth present among valid images");

        rankings.push(ProbeRanking {
            probe: *probe,
            ranked_identities,
            truth_rank,
            average_precision,
        });
    }

    let width = gallery_ids.len();
    let mut cmc = vec![0.0; width];
    for r in &rankings {
        for c in cmc.iter_mut().skip(r.truth_rank) {
            *c += 1.0;
        }
    }
    let evaluated = rankings.len();
    if evaluated > 0 {
        cmc.iter_mut().for_each(|c| *c /= evaluated as f64);
    }
    let map = if evaluated > 0 {
        rankings.iter().map(|r| r.average_precision).sum::<f64>() / evaluated as f64
    } else {
        0.0
    };
    RankingResult {
        rankings,
        cmc,
        map,
        excluded_probes: excluded,
    }
}

/// Mean of precision@rank over the positions holding `truth`; `None` if it never appears.
///
/// The sum is accumulated as an exact fraction so that, e.g., hits at ranks 1
/// and 3 give exactly `5.0 / 6.0`. Falls back to floating point if the
/// fraction outgrows 128 bits.
pub fn average_precision(ranked: &[IdentityId], truth: IdentityId) -> Option<f64> {
    let positions: Vec<u128> = ranked
        .iter()
        .enumerate()
        .filter(|(_, &id)| id == truth)
        .map(|(pos, _)| pos as u128 + 1)
        .collect();
    if positions.is_empty() {
        return None;
    }
    let hits = positions.len() as u128;
    let exact = positions
        .iter()
        .enumerate()
        .try_fold((0u128, 1u128), |acc, (j, &pos)| {
            add_fraction(acc, (j as u128 + 1, pos))
        })
        .and_then(|(num, den)| Some((num, den.checked_mul(hits)?)));
    Some(match exact {
        Some((num, den)) => {
            let g = gcd(num, den);
            (num / g) as f64 / (den / g) as f64
        }
        None => {
            positions
                .iter()
                .enumerate()
                .map(|(j, &pos)| (j + 1) as f64 / pos as f64)
                .sum::<f64>()
                / hits as f64
        }
    })
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

fn add_fraction((an, ad): (u128, u128), (bn, bd): (u128, u128)) -> Option<(u128, u128)> {
    let g = gcd(ad, bd);
    let den = (ad / g).checked_mul(bd)?;
    let num = an
        .checked_mul(bd / g)?
        .checked_add(bn.checked_mul(ad / g)?)?;
    let r = gcd(num, den);
    Some((num / r, den / r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSummary {
    pub map: f64,
    pub evaluated: usize,
    /// Probes with no relevant item in their ranking.
    pub excluded: usize,
}

/// Mean average precision over image-level rankings.
pub fn mean_average_precision(
    rankings: &[Vec<IdentityId>],
    truths: &[IdentityId],
) -> Result<MapSummary> {
    if rankings.len() != truths.len() {
        return Err(CamelError::dim(format!(
            "{} rankings for {} truths",
            rankings.len(),
            truths.len()
        )));
    }
    let aps: Vec<f64> = rankings
        .iter()
        .zip(truths)
        .filter_map(|(r, &t)| average_precision(r, t))
        .collect();
    let evaluated = aps.len();
    let map = if evaluated > 0 {
        aps.iter().sum::<f64>() / evaluated as f64
    } else {
        0.0
    };
    Ok(MapSummary {
        map,
        evaluated,
        excluded: rankings.len() - evaluated,
    })
}
