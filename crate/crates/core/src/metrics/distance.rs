//! Distances between a factual and a counterfactual.
//!
//! Sequence metrics take activity slices that already exclude the EoS
//! token; the grid norms take padded matrices.

use crate::error::{Error, Result};
use crate::event_log::ActivityId;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

/// L0, L1 and L2 norms of the elementwise difference of two grids.
pub fn norms(factual: &Matrix, cf: &Matrix) -> Result<Norms> {
    if factual.shape() != cf.shape() {
        return Err(Error::Argument(format!("shape {:?} vs {:?}", factual.shape(), cf.shape())));
    }
    let mut n = Norms { l0: 0.0, l1: 0.0, l2: 0.0 };
    for (a, b) in factual.as_slice().iter().zip(cf.as_slice()) {
        let d = a - b;
        if d != 0.0 {
            n.l0 += 1.0;
        }
        n.l1 += d.abs();
        n.l2 += d * d;
    }
    n.l2 = n.l2.sqrt();
    Ok(n)
}

/// Normalised activity-frequency histogram over `bins` activities.
pub fn histogram(acts: &[ActivityId], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for a in acts {
        h[a.index()] += 1.0;
    }
    let n = acts.len() as f64;
    if n > 0.0 {
        h.iter_mut().for_each(|v| *v /= n);
    }
    h
}

/// Transport cost between two normalised histograms when moving mass
/// between any two distinct bins costs 1, which is their total variation.
pub fn emd_histograms(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// EMD between the activity histograms of two traces. Two empty traces
/// are at distance 0; an empty and a non-empty trace at distance 1.
pub fn emd(a: &[ActivityId], b: &[ActivityId]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return 1.0,
        _ => {}
    }
    let bins = a.iter().chain(b).map(|x| x.index() + 1).max().unwrap_or(0);
    emd_histograms(&histogram(a, bins), &histogram(b, bins))
}

/// Optimal-string-alignment Damerau-Levenshtein distance.
pub fn dl_edit(a: &[ActivityId], b: &[ActivityId]) -> usize {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    d[..=m].iter_mut().enumerate().for_each(|(j, v)| *v = j);
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut v = (d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1).min(d[(i - 1) * w + j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                v = v.min(d[(i - 2) * w + j - 2] + 1);
            }
            d[i * w + j] = v;
        }
    }
    d[n * w + m]
}

pub fn lcp(a: &[ActivityId], b: &[ActivityId]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// `1 / Σ_{i<j} emd(cf_i, cf_j)`; 0 for fewer than two traces and
/// `f64::INFINITY` when every pair is at distance 0.
pub fn diversity(cfs: &[&[ActivityId]]) -> f64 {
    if cfs.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..cfs.len() {
        for j in i + 1..cfs.len() {
            total += emd(cfs[i], cfs[j]);
        }
    }
    if total == 0.0 {
        f64::INFINITY
    } else {
        1.0 / total
    }
}
