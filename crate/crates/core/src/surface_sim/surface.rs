use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffuse_auth::{NormMap, NormSource};
use crate::error::{invalid, Result};
use crate::fft::{signed_bin, Fft2d};
use crate::grid::Grid;

/// Smallest grid accepted as a height map.
pub const MIN_DIM: usize = 16;

/// Dense surface height grid in micrometres.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    heights: Grid<f64>,
    pitch: f64,
    seed: u64,
}

impl HeightMap {
    pub fn new(heights: Grid<f64>, pitch: f64, seed: u64) -> Result<Self> {
        let (rows, cols) = heights.dims();
        if rows < MIN_DIM || cols < MIN_DIM {
            return Err(invalid(alloc::format!(
                "height map must be at least {MIN_DIM}x{MIN_DIM}, got {rows}x{cols}"
            )));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(invalid("pixel pitch must be positive"));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(invalid("height map contains non-finite values"));
        }
        Ok(Self { heights, pitch, seed })
    }

    pub fn heights(&self) -> &Grid<f64> {
        &self.heights
    }

    /// Pixel edge length in micrometres.
    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> (usize, usize) {
        self.heights.dims()
    }

    pub fn into_heights(self) -> Grid<f64> {
        self.heights
    }
}

/// Spectral shape of the random height field.
///
/// Correlation lengths are in pixels and follow one convention: the
/// autocorrelation of the Gaussian field is `exp(-4 r² / L²)`, so it falls
/// to `1/e` at a lag of `L/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoughnessSpectrum {
    /// Gaussian-correlated field with the given RMS height (µm).
    Gaussian { correlation_length_px: f64, rms_um: f64 },
    /// Power-law roll-off `(1 + (π L k / 2)²)^(-exponent / 2)` on the power spectrum.
    PowerLaw {
        correlation_length_px: f64,
        exponent: f64,
        rms_um: f64,
    },
}

impl RoughnessSpectrum {
    fn rms(&self) -> f64 {
        match *self {
            Self::Gaussian { rms_um, .. } | Self::PowerLaw { rms_um, .. } => rms_um,
        }
    }

    /// Amplitude (square root of power) at radial frequency `k` in cycles/pixel.
    fn amplitude(&self, k: f64) -> f64 {
        use core::f64::consts::PI;
        match *self {
            Self::Gaussian { correlation_length_px: l, .. } => libm::exp(-PI * PI * l * l * k * k / 8.0),
            Self::PowerLaw {
                correlation_length_px: l,
                exponent,
                ..
            } => {
                let x = PI * l * k / 2.0;
                libm::pow(1.0 + x * x, -exponent / 4.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian {
                correlation_length_px,
                rms_um,
            } => {
                if !(correlation_length_px > 0.0) || !(rms_um >= 0.0) {
                    return Err(invalid("gaussian spectrum needs correlation length > 0 and rms >= 0"));
                }
            }
            Self::PowerLaw {
                correlation_length_px,
                exponent,
                rms_um,
            } => {
                if !(correlation_length_px > 0.0) || !(exponent > 0.0) || !(rms_um >= 0.0) {
                    return Err(invalid("power-law spectrum needs positive length and exponent, rms >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// Random height field synthesized by shaping white noise in the frequency
/// domain. The result has zero mean and the requested RMS height.
pub fn generate_surface(
    rows: usize,
    cols: usize,
    pitch: f64,
    spectrum: RoughnessSpectrum,
    seed: u64,
) -> Result<HeightMap> {
    if rows < MIN_DIM || cols < MIN_DIM {
        return Err(invalid(alloc::format!(
            "surface must be at least {MIN_DIM}x{MIN_DIM}, got {rows}x{cols}"
        )));
    }
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(invalid("pixel pitch must be positive"));
    }
    spectrum.validate()?;
    if spectrum.rms() == 0.0 {
        return HeightMap::new(Grid::new(rows, cols, 0.0), pitch, seed);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise = Grid::from_vec(rows, cols, noise)?;

    let plan = Fft2d::new(rows, cols);
    let mut spec = plan.forward_real(&noise);
    for r in 0..rows {
        let fy = signed_bin(r, rows) as f64 / rows as f64;
        for c in 0..cols {
            let fx = signed_bin(c, cols) as f64 / cols as f64;
            let k = libm::sqrt(fx * fx + fy * fy);
            let a = if r == 0 && c == 0 { 0.0 } else { spectrum.amplitude(k) };
            spec[(r, c)] *= Complex64::new(a, 0.0);
        }
    }
    let mut field = plan.inverse_real(&spec);

    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = if var > 0.0 { spectrum.rms() / libm::sqrt(var) } else { 0.0 };
    for v in field.as_mut_slice() {
        *v = (*v - mean) * scale;
    }
    HeightMap::new(field, pitch, seed)
}

/// Surface slope `(∂h/∂x, ∂h/∂y)` (dimensionless) by central differences,
/// one-sided on the outermost rows and columns.
pub(crate) fn height_gradients(h: &HeightMap) -> (Grid<f64>, Grid<f64>) {
    let g = h.heights();
    let (rows, cols) = g.dims();
    let p = h.pitch();
    let gx = Grid::from_fn(rows, cols, |r, c| {
        if c == 0 {
            (g[(r, 1)] - g[(r, 0)]) / p
        } else if c == cols - 1 {
            (g[(r, c)] - g[(r, c - 1)]) / p
        } else {
            (g[(r, c + 1)] - g[(r, c - 1)]) / (2.0 * p)
        }
    });
    let gy = Grid::from_fn(rows, cols, |r, c| {
        if r == 0 {
            (g[(1, c)] - g[(0, c)]) / p
        } else if r == rows - 1 {
            (g[(r, c)] - g[(r - 1, c)]) / p
        } else {
            (g[(r + 1, c)] - g[(r - 1, c)]) / (2.0 * p)
        }
    });
    (gx, gy)
}

/// Projected unit normals `(n_x, n_y)` of a height map.
pub fn normals_from_height(h: &HeightMap) -> NormMap {
    let (gx, gy) = height_gradients(h);
    let mut nx = gx.clone();
    let mut ny = gy.clone();
    for ((x, y), (&sx, &sy)) in nx
        .as_mut_slice()
        .iter_mut()
        .zip(ny.as_mut_slice().iter_mut())
        .zip(gx.iter().zip(gy.iter()))
    {
        let inv = 1.0 / libm::sqrt(1.0 + sx * sx + sy * sy);
        *x = -sx * inv;
        *y = -sy * inv;
    }
    NormMap {
        nx,
        ny,
        pitch: h.pitch(),
        source: NormSource::DerivedFromHeight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn autocorr_x(h: &Grid<f64>, lag: usize) -> f64 {
        let (rows, cols) = h.dims();
        let mut a = std::vec::Vec::new();
        let mut b = std::vec::Vec::new();
        for r in 0..rows {
            for c in 0..cols - lag {
                a.push(h[(r, c)]);
                b.push(h[(r, c + lag)]);
            }
        }
        crate::stats::correlation(&a, &b).unwrap()
    }

    #[test]
    fn autocorrelation_matches_figure_four_regime() {
        let h = generate_surface(
            256,
            256,
            5.37,
            RoughnessSpectrum::Gaussian {
                correlation_length_px: 4.0,
                rms_um: 1.0,
            },
            7,
        )
        .unwrap();
        let half = autocorr_x(h.heights(), 2);
        let lag4 = autocorr_x(h.heights(), 4);
        let lag8 = autocorr_x(h.heights(), 8);
        assert!(half < 0.5, "lag 2 autocorrelation {half}");
        assert!(lag4 < 0.5, "lag 4 autocorrelation {lag4}");
        assert!(lag8 < 0.2, "lag 8 autocorrelation {lag8}");
        assert!(autocorr_x(h.heights(), 1) > 0.5);
    }

    #[test]
    fn zero_amplitude_gives_flat_surface() {
        let h = generate_surface(
            16,
            16,
            1.0,
            RoughnessSpectrum::Gaussian {
                correlation_length_px: 3.0,
                rms_um: 0.0,
            },
            1,
        )
        .unwrap();
        assert!(h.heights().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = RoughnessSpectrum::PowerLaw {
            correlation_length_px: 5.0,
            exponent: 3.0,
            rms_um: 2.0,
        };
        let a = generate_surface(32, 48, 2.0, spec, 99).unwrap();
        let b = generate_surface(32, 48, 2.0, spec, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_surface(32, 48, 2.0, spec, 100).unwrap();
        assert_ne!(a, c);
        let rms = libm::sqrt(a.heights().iter().map(|v| v * v).sum::<f64>() / a.heights().len() as f64);
        assert!((rms - 2.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let spec = RoughnessSpectrum::Gaussian {
            correlation_length_px: 4.0,
            rms_um: 1.0,
        };
        assert!(generate_surface(8, 64, 1.0, spec, 0).is_err());
        assert!(generate_surface(64, 64, 0.0, spec, 0).is_err());
        assert!(generate_surface(64, 64, -1.0, spec, 0).is_err());
    }

    #[test]
    fn flat_plane_has_vertical_normals() {
        let h = HeightMap::new(Grid::new(16, 16, 3.5), 2.0, 0).unwrap();
        let n = normals_from_height(&h);
        assert!(n.nx.iter().chain(n.ny.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn forty_five_degree_ramp() {
        let pitch = 5.37;
        let h = HeightMap::new(Grid::from_fn(20, 20, |_, c| c as f64 * pitch), pitch, 0).unwrap();
        let n = normals_from_height(&h);
        let expected = -1.0 / libm::sqrt(2.0);
        for v in n.nx.iter() {
            assert!((v - expected).abs() < 1e-12);
        }
        assert!(n.ny.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sloped_plane_normal_formula() {
        // invariant: n_x = -g / sqrt(1 + g²) for a plane of slope g
        let pitch = 3.0;
        for g in [0.1, 0.7, 2.5] {
            let h = HeightMap::new(Grid::from_fn(16, 17, |_, c| g * c as f64 * pitch), pitch, 0).unwrap();
            let n = normals_from_height(&h);
            let expected = -g / libm::sqrt(1.0 + g * g);
            for r in 1..15 {
                for c in 1..16 {
                    assert!((n.nx[(r, c)] - expected).abs() < 1e-12);
                }
            }
        }
    }
}
