//! Diffuse-reflection features: norm maps from opposite-direction scans,
//! height integration, frequency subbands and correlation scores.

mod integrate;
mod patch;
mod resample;
mod subband;

pub use integrate::reconstruct_height;
pub use patch::{search_best_patch, PatchMatch};
pub use resample::{resample, resample_norm_map};
pub use subband::{subband_decompose, SubbandFeature};

use crate::error::{invalid, Error, Result};
use crate::grid::{ensure_same_dims, Grid};
use crate::stats::zncc;
use crate::surface_sim::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormSource {
    ScannerEstimated,
    DerivedFromHeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    X,
    Y,
}

/// Projected surface normals `(n_x, n_y)`.
///
/// Scanner estimates are only proportional to the true components, so they
/// are compared by correlation, never by value.
#[derive(Debug, Clone, PartialEq)]
pub struct NormMap {
    pub nx: Grid<f64>,
    pub ny: Grid<f64>,
    /// Pixel edge length in micrometres.
    pub pitch: f64,
    pub source: NormSource,
}

impl NormMap {
    pub fn new(nx: Grid<f64>, ny: Grid<f64>, pitch: f64, source: NormSource) -> Result<Self> {
        ensure_same_dims(nx.dims(), ny.dims())?;
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(invalid("norm map pitch must be positive"));
        }
        if nx.iter().chain(ny.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("norm map contains non-finite values"));
        }
        if source == NormSource::DerivedFromHeight && nx.iter().zip(ny.iter()).any(|(x, y)| x * x + y * y > 1.0 + 1e-12) {
            return Err(invalid("projected unit normals must satisfy nx² + ny² <= 1"));
        }
        Ok(Self { nx, ny, pitch, source })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.nx.dims()
    }

    pub fn component(&self, c: Component) -> &Grid<f64> {
        match c {
            Component::X => &self.nx,
            Component::Y => &self.ny,
        }
    }
}

/// Zero-mean, unit-variance difference of two opposite-direction scans.
///
/// The 0°/180° pair yields a multiple of `n_y`, the 90°/270° pair of `n_x`.
pub fn estimate_norm_component(i_fwd: &Frame, i_rev: &Frame) -> Result<Grid<f64>> {
    let mut d = i_fwd.pixels.zip_map(&i_rev.pixels, |a, b| a - b)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = libm::sqrt(d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n);
    for v in d.as_mut_slice() {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
    Ok(d)
}

/// Norm map from the four scanner passes (0°, 90°, 180°, 270°).
pub fn estimate_norm_map(i0: &Frame, i90: &Frame, i180: &Frame, i270: &Frame, pitch: f64) -> Result<NormMap> {
    let ny = estimate_norm_component(i0, i180)?;
    let nx = estimate_norm_component(i90, i270)?;
    NormMap::new(nx, ny, pitch, NormSource::ScannerEstimated)
}

/// Zero-mean normalized cross-correlation of one component.
pub fn normmap_correlation(a: &NormMap, b: &NormMap, component: Component) -> Result<f64> {
    if (a.pitch - b.pitch).abs() > 1e-9 * a.pitch.max(b.pitch) {
        return Err(invalid("norm maps must be resampled to a common pitch first"));
    }
    zncc(a.component(component), b.component(component), None)
}

/// NCC between two registered feature grids over an optional background mask.
pub fn diffuse_match_score(test: &Grid<f64>, reference: &Grid<f64>, mask: Option<&Grid<bool>>) -> Result<f64> {
    zncc(test, reference, mask)
}

pub(crate) fn degenerate(msg: &str) -> Error {
    Error::DegenerateInput(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_sim::{
        generate_surface, normals_from_height, render_scanner_pass, LightPose, ReflectionParams, RoughnessSpectrum,
        ScanDirection,
    };

    fn surface(seed: u64) -> crate::surface_sim::HeightMap {
        generate_surface(
            64,
            64,
            43.57,
            RoughnessSpectrum::Gaussian {
                correlation_length_px: 4.0,
                rms_um: 12.0,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn identical_frames_give_zero() {
        let f = Frame::from_pixels(Grid::from_fn(16, 16, |r, c| (r + 2 * c) as f64)).unwrap();
        assert!(estimate_norm_component(&f, &f).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn antisymmetric_in_arguments() {
        let a = Frame::from_pixels(Grid::from_fn(16, 16, |r, c| ((r * 7 + c * 3) % 11) as f64)).unwrap();
        let b = Frame::from_pixels(Grid::from_fn(16, 16, |r, c| ((r * 5 + c) % 13) as f64)).unwrap();
        let ab = estimate_norm_component(&a, &b).unwrap();
        let ba = estimate_norm_component(&b, &a).unwrap();
        assert!(ab.iter().zip(ba.iter()).all(|(x, y)| *x == -*y));
    }

    #[test]
    fn scanner_estimate_matches_truth() {
        let p = ReflectionParams { w_s: 0.0, ..Default::default() };
        let path = LightPose::scanner(-100.0, 100.0, 10.0, 10.0).unwrap();
        let h = surface(4);
        let scans: std::vec::Vec<_> = ScanDirection::ALL.iter().map(|&d| render_scanner_pass(&h, &p, &path, d).unwrap()).collect();
        let est = estimate_norm_map(&scans[0], &scans[1], &scans[2], &scans[3], h.pitch()).unwrap();
        let truth = normals_from_height(&h);
        assert!(normmap_correlation(&est, &truth, Component::Y).unwrap() > 0.95);
        assert!(normmap_correlation(&est, &truth, Component::X).unwrap() > 0.95);
        let other = normals_from_height(&surface(5));
        assert!(normmap_correlation(&est, &other, Component::Y).unwrap().abs() < 0.15);
    }

    #[test]
    fn self_correlation_is_one_and_constant_fails() {
        let h = surface(1);
        let n = normals_from_height(&h);
        assert!((normmap_correlation(&n, &n, Component::X).unwrap() - 1.0).abs() < 1e-12);
        let flat = NormMap::new(Grid::new(16, 16, 0.0), Grid::new(16, 16, 0.0), 1.0, NormSource::DerivedFromHeight).unwrap();
        assert!(matches!(normmap_correlation(&flat, &flat, Component::Y), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn checkerboards_are_uncorrelated() {
        let n = 64;
        let a = Grid::from_fn(n, n, |r, c| if (r + c) % 2 == 0 { 1.0 } else { -1.0 });
        let b = Grid::from_fn(n, n, |r, _| if r % 2 == 0 { 1.0 } else { -1.0 });
        let s = diffuse_match_score(&a, &b, None).unwrap();
        assert!(s.abs() <= 1.0 / n as f64);
        assert!((diffuse_match_score(&a, &a, None).unwrap() - 1.0).abs() < 1e-12);
    }
}
