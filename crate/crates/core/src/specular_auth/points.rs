use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::ensure_same_dims;
use crate::surface_sim::Frame;

use super::mask::RegionMask;

/// The N brightest masked pixels of one frame, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecularPointSet {
    points: Vec<(usize, usize)>,
    pub frame_id: usize,
    dims: (usize, usize),
}

impl SpecularPointSet {
    /// Sorts and validates the coordinates (distinct, inside `dims`).
    pub fn new(mut points: Vec<(usize, usize)>, frame_id: usize, dims: (usize, usize)) -> Result<Self> {
        points.sort_unstable();
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate specular point".into()));
        }
        if points.iter().any(|&(r, c)| r >= dims.0 || c >= dims.1) {
            return Err(Error::InvalidParameter("specular point outside the frame".into()));
        }
        Ok(Self { points, frame_id, dims })
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Same points shifted by an integer offset; fails if any leaves the frame.
    pub fn shifted(&self, dr: isize, dc: isize) -> Result<Self> {
        let pts = self
            .points
            .iter()
            .map(|&(r, c)| {
                let (r, c) = (r as isize + dr, c as isize + dc);
                if r < 0 || c < 0 {
                    Err(Error::InvalidParameter("shift leaves the frame".into()))
                } else {
                    Ok((r as usize, c as usize))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts, self.frame_id, self.dims)
    }
}

fn brighter(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Masked pixel indices ordered by decreasing intensity, ties by (row, col);
/// only the first `n` are returned.
pub fn ranked_specular_points(f: &Frame, mask: &RegionMask, n: usize) -> Result<Vec<(usize, usize)>> {
    ensure_same_dims(f.dims(), mask.dims())?;
    let cols = f.pixels.cols();
    let mut cand: Vec<(f64, usize)> = f
        .pixels
        .iter()
        .zip(mask.include.iter())
        .enumerate()
        .filter(|(_, (_, &m))| m)
        .map(|(i, (&v, _))| (v, i))
        .collect();
    if n > cand.len() {
        return Err(Error::NotEnoughPixels {
            requested: n,
            available: cand.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n < cand.len() {
        cand.select_nth_unstable_by(n - 1, brighter);
        cand.truncate(n);
    }
    cand.sort_unstable_by(brighter);
    Ok(cand.into_iter().map(|(_, i)| (i / cols, i % cols)).collect())
}

/// [`ranked_specular_points`] for several masks of one frame at once. Only
/// the brightest pixels of the whole frame are sorted, widening the pool
/// until every mask has `n` members in it.
pub fn ranked_specular_points_multi(f: &Frame, masks: &[&RegionMask], n: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    for m in masks {
        ensure_same_dims(f.dims(), m.dims())?;
        let available = m.count();
        if n > available {
            return Err(Error::NotEnoughPixels { requested: n, available });
        }
    }
    let cols = f.pixels.cols();
    let total = f.pixels.len();
    let mut pool = (4 * n).max(64).min(total);
    loop {
        let mut cand: Vec<(f64, usize)> = f.pixels.iter().copied().zip(0..).collect();
        if pool < total {
            cand.select_nth_unstable_by(pool - 1, brighter);
            cand.truncate(pool);
        }
        cand.sort_unstable_by(brighter);
        let picked: Vec<Vec<(usize, usize)>> = masks
            .iter()
            .map(|m| {
                let inc = m.include.as_slice();
                cand.iter()
                    .filter(|&&(_, i)| inc[i])
                    .take(n)
                    .map(|&(_, i)| (i / cols, i % cols))
                    .collect()
            })
            .collect();
        if pool == total || picked.iter().all(|p| p.len() == n) {
            return Ok(picked);
        }
        pool = (pool * 4).min(total);
    }
}

pub fn observed_specular_points(f: &Frame, mask: &RegionMask, n: usize, frame_id: usize) -> Result<SpecularPointSet> {
    let ranked = ranked_specular_points(f, mask, n)?;
    SpecularPointSet::new(ranked, frame_id, f.dims())
}

/// Occupancy of the 3×3 neighbourhoods of a point set, for O(1) robust-point
/// lookups.
#[derive(Debug, Clone)]
pub struct NeighborhoodIndex {
    bits: Vec<u64>,
    dims: (usize, usize),
}

impl NeighborhoodIndex {
    pub fn new(set: &SpecularPointSet) -> Self {
        Self::from_points(set.points(), set.dims())
    }

    pub fn from_points(points: &[(usize, usize)], dims: (usize, usize)) -> Self {
        let (rows, cols) = dims;
        let mut bits = alloc::vec![0u64; (rows * cols).div_ceil(64)];
        for &(r, c) in points {
            for rr in r.saturating_sub(1)..(r + 2).min(rows) {
                for cc in c.saturating_sub(1)..(c + 2).min(cols) {
                    let i = rr * cols + cc;
                    bits[i / 64] |= 1 << (i % 64);
                }
            }
        }
        Self { bits, dims }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Whether some indexed point lies within Chebyshev distance 1 of `(r, c)`.
    pub fn covers(&self, r: usize, c: usize) -> bool {
        let i = r * self.dims.1 + c;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    /// Number of `test` points that have a neighbour in the indexed set.
    pub fn count(&self, test: &[(usize, usize)]) -> usize {
        test.iter().filter(|&&(r, c)| self.covers(r, c)).count()
    }
}

fn check_dims(a: &SpecularPointSet, b: &SpecularPointSet) -> Result<()> {
    ensure_same_dims(a.dims, b.dims)
}

/// `n(test, ref)`: test points whose 3×3 neighbourhood contains a reference point.
pub fn count_robust_points(test: &SpecularPointSet, reference: &SpecularPointSet) -> Result<usize> {
    check_dims(test, reference)?;
    Ok(NeighborhoodIndex::new(reference).count(test.points()))
}

/// Symmetric robust matching score `S^rm`.
pub fn robust_matching_score(a: &SpecularPointSet, b: &SpecularPointSet) -> Result<f64> {
    Ok((count_robust_points(a, b)? + count_robust_points(b, a)?) as f64 / 2.0)
}

/// Per-frame ranked points and their neighbourhood index, for repeated scoring.
#[derive(Debug, Clone)]
pub struct IndexedFrame {
    pub points: Vec<(usize, usize)>,
    pub index: NeighborhoodIndex,
}

impl IndexedFrame {
    pub fn new(points: Vec<(usize, usize)>, dims: (usize, usize)) -> Self {
        let index = NeighborhoodIndex::from_points(&points, dims);
        Self { points, index }
    }

    pub fn score(&self, other: &IndexedFrame) -> f64 {
        (other.index.count(&self.points) + self.index.count(&other.points)) as f64 / 2.0
    }
}

/// Quadratic oracle, for cross-checking the bitmap path.
pub fn count_robust_points_naive(test: &[(usize, usize)], reference: &[(usize, usize)]) -> usize {
    test.iter()
        .filter(|&&(r, c)| reference.iter().any(|&(rr, cc)| r.abs_diff(rr) <= 1 && c.abs_diff(cc) <= 1))
        .count()
}
