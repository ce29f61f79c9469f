use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::fft::{signed_bin, Fft2d};
use crate::grid::Grid;
use crate::surface_sim::HeightMap;

/// One dyadic radial-frequency band of a height map.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFeature {
    /// 1 is the highest-frequency band.
    pub band_index: usize,
    /// Band edges `(low, high]` in cycles per pixel.
    pub low: f64,
    pub high: f64,
    pub coefficients: Grid<f64>,
}

/// Splits a height map into `n_bands` annular bands.
///
/// Band `k` keeps radial frequencies in `(f_max·2^-k, f_max·2^(1-k)]`, where
/// `f_max` is the largest radial frequency on the grid. The last band
/// extends down to (but excludes) DC, so the bands sum to the input minus
/// its mean.
pub fn subband_decompose(h: &HeightMap, n_bands: usize) -> Result<Vec<SubbandFeature>> {
    if n_bands < 6 {
        return Err(invalid("at least 6 subbands are required"));
    }
    let (rows, cols) = h.dims();
    if n_bands >= usize::BITS as usize || rows.min(cols) < (1usize << n_bands) {
        return Err(invalid(alloc::format!(
            "{rows}x{cols} grid is too small for {n_bands} dyadic bands"
        )));
    }
    let plan = Fft2d::new(rows, cols);
    let spec = plan.forward_real(h.heights());
    let radius = Grid::from_fn(rows, cols, |r, c| {
        let fy = signed_bin(r, rows) as f64 / rows as f64;
        let fx = signed_bin(c, cols) as f64 / cols as f64;
        libm::sqrt(fx * fx + fy * fy)
    });
    let f_max = radius.iter().fold(0.0, |m: f64, &v| m.max(v));
    (1..=n_bands)
        .map(|k| {
            let high = f_max * libm::ldexp(1.0, 1 - k as i32);
            let low = if k == n_bands { 0.0 } else { f_max * libm::ldexp(1.0, -(k as i32)) };
            let mut band = spec.clone();
            for (v, &f) in band.as_mut_slice().iter_mut().zip(radius.iter()) {
                if !(f > low && f <= high) {
                    *v = num_complex::Complex64::new(0.0, 0.0);
                }
            }
            Ok(SubbandFeature {
                band_index: k,
                low,
                high,
                coefficients: plan.inverse_real(&band),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_sim::{generate_surface, RoughnessSpectrum};

    fn energy(g: &Grid<f64>) -> f64 {
        g.iter().map(|v| v * v).sum()
    }

    #[test]
    fn bands_sum_to_input_without_dc() {
        let h = generate_surface(
            128,
            128,
            1.0,
            RoughnessSpectrum::PowerLaw {
                correlation_length_px: 3.0,
                exponent: 2.5,
                rms_um: 4.0,
            },
            3,
        )
        .unwrap();
        let shifted = HeightMap::new(h.heights().map(|v| v + 5.0), 1.0, 0).unwrap();
        let bands = subband_decompose(&shifted, 7).unwrap();
        assert_eq!(bands.len(), 7);
        let mean = shifted.heights().iter().sum::<f64>() / shifted.heights().len() as f64;
        let mut err = 0.0;
        for r in 0..128 {
            for c in 0..128 {
                let s: f64 = bands.iter().map(|b| b.coefficients[(r, c)]).sum();
                let d = s - (shifted.heights()[(r, c)] - mean);
                err += d * d;
            }
        }
        assert!(libm::sqrt(err / energy(h.heights())) < 1e-9);
    }

    #[test]
    fn tone_lands_in_one_band() {
        let n = 128;
        // bin 10 of 128 is 0.078 cycles/px: inside band 4 of (0.044, 0.088]
        let h = HeightMap::new(Grid::from_fn(n, n, |_, c| libm::cos(core::f64::consts::TAU * 10.0 * c as f64 / n as f64)), 1.0, 0).unwrap();
        let bands = subband_decompose(&h, 6).unwrap();
        let total: f64 = bands.iter().map(|b| energy(&b.coefficients)).sum();
        let b4 = &bands[3];
        assert!(b4.low < 10.0 / 128.0 && 10.0 / 128.0 <= b4.high);
        assert!(energy(&b4.coefficients) >= 0.99 * total);
    }

    #[test]
    fn constant_map_has_empty_bands() {
        let h = HeightMap::new(Grid::new(64, 64, 3.0), 1.0, 0).unwrap();
        for b in subband_decompose(&h, 6).unwrap() {
            assert!(b.coefficients.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn depth_limits() {
        let h = HeightMap::new(Grid::new(64, 64, 0.0), 1.0, 0).unwrap();
        assert!(subband_decompose(&h, 5).is_err());
        assert!(subband_decompose(&h, 7).is_err());
    }
}
