use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Equal-length overlapping intervals per embedding dimension.
///
/// Over a range `R = max - min`, each dimension gets `i` intervals of length
/// `ℓ = R / (1 + (i - 1)(1 - o))` placed with stride `ℓ(1 - o)`, so
/// consecutive intervals share a segment of length `o·ℓ` and the first and
/// last intervals start at `min` and end at `max`. A dimension with `R = 0`
/// gets the single interval `[min, min]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub intervals_per_dim: usize,
    pub overlap: f64,
    pub bounds: Vec<(f64, f64)>,
    pub intervals: Vec<Vec<Interval>>,
}

pub fn build_cover(embedding: ArrayView2<'_, f64>, intervals: usize, overlap: f64) -> Result<Cover> {
    if intervals < 1 {
        return Err(Error::invalid("a cover needs at least one interval"));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap {overlap} must lie in [0, 1)")));
    }
    if embedding.nrows() == 0 || embedding.ncols() == 0 {
        return Err(Error::invalid("cannot cover an empty embedding"));
    }
    crate::numerics::ensure_finite(embedding, "embedding")?;
    let mut bounds = Vec::with_capacity(embedding.ncols());
    let mut all = Vec::with_capacity(embedding.ncols());
    for col in embedding.columns() {
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        bounds.push((min, max));
        let range = max - min;
        if range == 0.0 {
            all.push(vec![Interval { lo: min, hi: min }]);
            continue;
        }
        let len = range / (1.0 + (intervals as f64 - 1.0) * (1.0 - overlap));
        let stride = len * (1.0 - overlap);
        let mut dim: Vec<Interval> = (0..intervals)
            .map(|j| {
                let lo = min + j as f64 * stride;
                Interval { lo, hi: lo + len }
            })
            .collect();
        let last = dim.last_mut().expect("at least one interval");
        last.hi = last.hi.max(max);
        all.push(dim);
    }
    Ok(Cover {
        intervals_per_dim: intervals,
        overlap,
        bounds,
        intervals: all,
    })
}

impl Cover {
    pub fn dims(&self) -> usize {
        self.intervals.len()
    }

    /// Indices of the intervals of dimension `dim` that contain `x`.
    pub fn memberships(&self, dim: usize, x: f64) -> Vec<usize> {
        let ivs = &self.intervals[dim];
        if ivs.len() == 1 {
            return if ivs[0].contains(x) { vec![0] } else { Vec::new() };
        }
        let (min, _) = self.bounds[dim];
        let len = ivs[0].hi - ivs[0].lo;
        let stride = ivs[1].lo - ivs[0].lo;
        let last = ivs.len() as i64 - 1;
        let hi_guess = ((x - min) / stride).floor() as i64 + 1;
        let lo_guess = ((x - min - len) / stride).floor() as i64 - 1;
        (lo_guess.max(0)..=hi_guess.min(last))
            .map(|j| j as usize)
            .filter(|&j| ivs[j].contains(x))
            .collect()
    }

    /// Every bin (tuple of per-dimension interval indices) containing `point`.
    pub fn bins_of(&self, point: &[f64]) -> Vec<Vec<usize>> {
        let mut bins: Vec<Vec<usize>> = vec![Vec::new()];
        for (dim, &x) in point.iter().enumerate() {
            let ms = self.memberships(dim, x);
            bins = bins
                .iter()
                .flat_map(|prefix| {
                    ms.iter().map(move |&j| {
                        let mut b = prefix.clone();
                        b.push(j);
                        b
                    })
                })
                .collect();
        }
        bins
    }
}
