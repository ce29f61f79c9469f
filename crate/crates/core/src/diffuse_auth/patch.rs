use alloc::vec::Vec;

use num_complex::Complex64;

use super::{degenerate, NormMap};
use crate::error::{invalid, Result};
use crate::fft::{Direction, Fft2d};
use crate::grid::Grid;

/// Best placement of a needle inside a haystack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMatch {
    pub row: usize,
    pub col: usize,
    pub corr: f64,
}

/// Exhaustive search for the window of `haystack` most correlated with
/// `needle`, using both normal components jointly.
///
/// The score at an offset is the two-channel zero-mean normalized
/// cross-correlation. Offsets are visited on a `stride` grid; ties keep the
/// first offset in row-major order. Windows with zero variance score 0.
pub fn search_best_patch(needle: &NormMap, haystack: &NormMap, stride: usize) -> Result<PatchMatch> {
    let (nr, nc) = needle.dims();
    let (hr, hc) = haystack.dims();
    if nr > hr || nc > hc {
        return Err(invalid("needle is larger than the haystack"));
    }
    if stride == 0 {
        return Err(invalid("stride must be positive"));
    }
    let npx = (nr * nc) as f64;
    let plan = Fft2d::new(hr, hc);
    let (or, oc) = (hr - nr + 1, hc - nc + 1);
    let mut num = Grid::new(or, oc, 0.0);
    let mut wvar = Grid::new(or, oc, 0.0);
    let mut nvar = 0.0;
    for (a, w) in [(&needle.nx, &haystack.nx), (&needle.ny, &haystack.ny)] {
        let mean = a.iter().sum::<f64>() / npx;
        nvar += a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        let mut pad = Grid::new(hr, hc, Complex64::new(0.0, 0.0));
        for r in 0..nr {
            for c in 0..nc {
                pad[(r, c)] = Complex64::new(a[(r, c)] - mean, 0.0);
            }
        }
        plan.process(&mut pad, Direction::Forward);
        let mut spec = w.map(|&v| Complex64::new(v, 0.0));
        plan.process(&mut spec, Direction::Forward);
        for (s, p) in spec.as_mut_slice().iter_mut().zip(pad.iter()) {
            *s *= p.conj();
        }
        plan.process(&mut spec, Direction::Inverse);
        let ii = Integral::new(w);
        for r in 0..or {
            for c in 0..oc {
                num[(r, c)] += spec[(r, c)].re;
                let sum = ii.rect(&ii.sum, r, c, nr, nc);
                let sq = ii.rect(&ii.sq, r, c, nr, nc);
                wvar[(r, c)] += (sq - sum * sum / npx).max(0.0);
            }
        }
    }
    if !(nvar > 0.0) {
        return Err(degenerate("needle has no variance"));
    }
    let scale = libm::sqrt(nvar * max_abs(&wvar).max(1.0)) * 1e-12;
    let mut best = PatchMatch { row: 0, col: 0, corr: f64::NEG_INFINITY };
    for r in (0..or).step_by(stride) {
        for c in (0..oc).step_by(stride) {
            let den = libm::sqrt(nvar * wvar[(r, c)]);
            let corr = if den > scale { (num[(r, c)] / den).clamp(-1.0, 1.0) } else { 0.0 };
            if corr > best.corr {
                best = PatchMatch { row: r, col: c, corr };
            }
        }
    }
    Ok(best)
}

fn max_abs(g: &Grid<f64>) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Summed-area tables of values and squared values.
struct Integral {
    stride: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Integral {
    fn new(w: &Grid<f64>) -> Self {
        let (rows, cols) = w.dims();
        let stride = cols + 1;
        let mut sum = alloc::vec![0.0; (rows + 1) * stride];
        let mut sq = alloc::vec![0.0; (rows + 1) * stride];
        for r in 0..rows {
            let (mut a, mut b) = (0.0, 0.0);
            for c in 0..cols {
                let v = w[(r, c)];
                a += v;
                b += v * v;
                sum[(r + 1) * stride + c + 1] = sum[r * stride + c + 1] + a;
                sq[(r + 1) * stride + c + 1] = sq[r * stride + c + 1] + b;
            }
        }
        Self { stride, sum, sq }
    }

    fn rect(&self, t: &[f64], r: usize, c: usize, h: usize, w: usize) -> f64 {
        let s = self.stride;
        t[(r + h) * s + c + w] - t[r * s + c + w] - t[(r + h) * s + c] + t[r * s + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffuse_auth::NormSource;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rows: usize, cols: usize, seed: u64) -> NormMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nx = Grid::from_fn(rows, cols, |_, _| rng.random_range(-0.5..0.5));
        let ny = Grid::from_fn(rows, cols, |_, _| rng.random_range(-0.5..0.5));
        NormMap::new(nx, ny, 1.0, NormSource::ScannerEstimated).unwrap()
    }

    fn cut(m: &NormMap, r0: usize, c0: usize, h: usize, w: usize) -> NormMap {
        let nx = Grid::from_fn(h, w, |r, c| m.nx[(r0 + r, c0 + c)]);
        let ny = Grid::from_fn(h, w, |r, c| m.ny[(r0 + r, c0 + c)]);
        NormMap::new(nx, ny, m.pitch, m.source).unwrap()
    }

    fn brute(needle: &NormMap, hay: &NormMap) -> PatchMatch {
        let (nr, nc) = needle.dims();
        let (hr, hc) = hay.dims();
        let mut best = PatchMatch { row: 0, col: 0, corr: f64::NEG_INFINITY };
        for r in 0..=hr - nr {
            for c in 0..=hc - nc {
                let w = cut(hay, r, c, nr, nc);
                let mut num = 0.0;
                let (mut va, mut vb) = (0.0, 0.0);
                for (a, b) in [(&needle.nx, &w.nx), (&needle.ny, &w.ny)] {
                    let ma = a.iter().sum::<f64>() / a.len() as f64;
                    let mb = b.iter().sum::<f64>() / b.len() as f64;
                    for (x, y) in a.iter().zip(b.iter()) {
                        num += (x - ma) * (y - mb);
                        va += (x - ma) * (x - ma);
                        vb += (y - mb) * (y - mb);
                    }
                }
                let corr = num / libm::sqrt(va * vb);
                if corr > best.corr {
                    best = PatchMatch { row: r, col: c, corr };
                }
            }
        }
        best
    }

    #[test]
    fn planted_patch_is_found() {
        let hay = random_map(64, 64, 3);
        let needle = cut(&hay, 17, 23, 16, 16);
        let m = search_best_patch(&needle, &hay, 1).unwrap();
        assert_eq!((m.row, m.col), (17, 23));
        assert!((m.corr - 1.0).abs() < 1e-10);
    }

    #[test]
    fn noisy_planted_patch() {
        let hay = random_map(64, 64, 8);
        let mut needle = cut(&hay, 17, 23, 16, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in needle.nx.as_mut_slice().iter_mut().chain(needle.ny.as_mut_slice()) {
            *v += 0.05 * rng.random_range(-1.0..1.0);
        }
        let m = search_best_patch(&needle, &hay, 1).unwrap();
        assert!(m.row.abs_diff(17) <= 1 && m.col.abs_diff(23) <= 1);
    }

    #[test]
    fn fft_path_equals_brute_force() {
        for seed in 0..5 {
            let hay = random_map(40, 37, seed);
            let needle = random_map(9, 12, seed + 100);
            let a = search_best_patch(&needle, &hay, 1).unwrap();
            let b = brute(&needle, &hay);
            assert_eq!((a.row, a.col), (b.row, b.col));
            assert!((a.corr - b.corr).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_oversized_needle() {
        let hay = random_map(16, 16, 0);
        let needle = random_map(17, 4, 0);
        assert!(search_best_patch(&needle, &hay, 1).is_err());
    }

    #[test]
    fn stride_restricts_offsets() {
        let hay = random_map(48, 48, 5);
        let needle = cut(&hay, 20, 12, 16, 16);
        let m = search_best_patch(&needle, &hay, 4).unwrap();
        assert_eq!((m.row, m.col), (20, 12));
    }
}
