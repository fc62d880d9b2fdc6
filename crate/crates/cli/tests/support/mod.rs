//! Oracles shared by the CLI-level test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use camel::eval::SplitEntry;
use camel::IdentityId;
use nalgebra::{DMatrix, DVector};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix; eigenvalues ascending.
pub fn jacobi_values(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `b^-1/2` of an SPD matrix through Jacobi rotations of its eigenvectors.
fn inverse_sqrt(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let mut a = b.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let d = DVector::from_iterator(n, (0..n).map(|i| 1.0 / a[(i, i)].sqrt()));
    &v * DMatrix::from_diagonal(&d) * v.transpose()
}

/// Ascending generalized eigenvalues of `(a, b)` with `b` SPD.
pub fn generalized_values(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let s = inverse_sqrt(b);
    let c = &s * a * &s;
    jacobi_values(&((&c + c.transpose()) * 0.5))
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// AP of an image ranking, accumulated on the common denominator `lcm(1..=len)`.
pub fn ap(image_ids: &[IdentityId], truth: IdentityId) -> Option<f64> {
    let l = (1..=image_ids.len() as u128).fold(1u128, |acc, x| acc / gcd(acc, x) * x);
    let (mut num, mut hits) = (0u128, 0u128);
    for (pos, &id) in image_ids.iter().enumerate() {
        if id == truth {
            hits += 1;
            num += hits * (l / (pos as u128 + 1));
        }
    }
    if hits == 0 {
        return None;
    }
    let den = l * hits;
    let g = gcd(num, den);
    Some((num / g) as f64 / (den / g) as f64)
}

pub struct Ranking {
    pub cmc: Vec<f64>,
    pub map: f64,
    pub excluded: usize,
}

/// Exhaustive ranking: each identity's position is the number of identities beating it.
pub fn brute_force(
    distances: &DMatrix<f64>,
    probes: &[SplitEntry],
    gallery: &[SplitEntry],
) -> Ranking {
    let mut ids: Vec<IdentityId> = gallery.iter().map(|g| g.identity).collect();
    ids.sort();
    ids.dedup();
    let (mut ranks, mut aps, mut excluded) = (Vec::new(), Vec::new(), 0);
    for (i, p) in probes.iter().enumerate() {
        let usable: Vec<usize> = (0..gallery.len())
            .filter(|&j| !(gallery[j].identity == p.identity && gallery[j].view == p.view))
            .collect();
        let mut score: BTreeMap<IdentityId, f64> = BTreeMap::new();
        for &j in &usable {
            let s = score.entry(gallery[j].identity).or_insert(f64::INFINITY);
            *s = s.min(distances[(i, j)]);
        }
        let Some(&truth_score) = score.get(&p.identity) else {
            excluded += 1;
            continue;
        };
        ranks.push(
            score
                .iter()
                .filter(|(&id, &s)| s < truth_score || (s == truth_score && id < p.identity))
                .count(),
        );
        let mut order: Vec<(usize, usize)> = usable
            .iter()
            .map(|&j| {
                let before = usable
                    .iter()
                    .filter(|&&o| {
                        let (a, b) = (distances[(i, o)], distances[(i, j)]);
                        let (ia, ib) = (gallery[o].identity, gallery[j].identity);
                        a < b || (a == b && (ia < ib || (ia == ib && o < j)))
                    })
                    .count();
                (before, j)
            })
            .collect();
        order.sort();
        let image_ids: Vec<IdentityId> = order.iter().map(|&(_, j)| gallery[j].identity).collect();
        aps.push(ap(&image_ids, p.identity).unwrap());
    }
    let evaluated = ranks.len();
    let cmc = (1..=ids.len())
        .map(|k| {
            if evaluated == 0 {
                0.0
            } else {
                ranks.iter().filter(|&&r| r < k).count() as f64 / evaluated as f64
            }
        })
        .collect();
    let map = if evaluated == 0 {
        0.0
    } else {
        aps.iter().sum::<f64>() / evaluated as f64
    };
    Ranking { cmc, map, excluded }
}
