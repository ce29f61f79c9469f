use alloc::vec::Vec;

use num_complex::Complex64;

use super::transform::wrap_angle;
use super::warp::warp_grid;
use super::{AlignmentResult, SimilarityTransform};
use crate::error::{Error, Result};
use crate::fft::{signed_bin, Direction, Fft2d};
use crate::grid::{ensure_same_dims, Grid};
use crate::surface_sim::Frame;

/// Shift of `b` relative to `a` and the normalized correlation peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationEstimate {
    pub tx: f64,
    pub ty: f64,
    pub peak: f64,
}

/// Settings of the log-polar similarity estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    /// Alignments with a weaker translation peak are rejected.
    pub min_peak: f64,
    pub angles: usize,
    pub radii: usize,
    /// Smallest sampled spectral radius, in frequency bins.
    pub min_radius: f64,
    /// Rounds of estimate-then-correct.
    pub iterations: usize,
}

impl Default for PhaseParams {
    fn default() -> Self {
        Self {
            min_peak: 0.03,
            angles: 360,
            radii: 256,
            min_radius: 4.0,
            iterations: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Window {
    None,
    Hann,
    /// Hann taper along columns only (the log-radius axis of a log-polar map).
    HannCols,
}

/// Translation `(t_x, t_y)` such that `b(x) ≈ a(x − t)`.
///
/// Unwindowed, so integer circular shifts are recovered exactly. Sub-pixel
/// offsets come from a 3-point quadratic fit on each axis.
pub fn phase_correlate_translation(a: &Frame, b: &Frame) -> Result<TranslationEstimate> {
    phase_translation(&a.pixels, &b.pixels, Window::None)
}

pub(crate) fn phase_translation(a: &Grid<f64>, b: &Grid<f64>, window: Window) -> Result<TranslationEstimate> {
    ensure_same_dims(a.dims(), b.dims())?;
    let (rows, cols) = a.dims();
    let plan = Fft2d::new(rows, cols);
    let mut fa = prepare(a, window)?;
    let mut fb = prepare(b, window)?;
    plan.process(&mut fa, Direction::Forward);
    plan.process(&mut fb, Direction::Forward);
    let mut cross: Vec<Complex64> = fb.iter().zip(fa.iter()).map(|(x, y)| x * y.conj()).collect();
    for z in cross.iter_mut() {
        let n = z.norm();
        *z = if n > 0.0 && n.is_finite() { *z / n } else { Complex64::new(0.0, 0.0) };
    }
    // both inputs are mean-free, so the DC bin holds only round-off
    cross[0] = Complex64::new(0.0, 0.0);
    let mut corr = Grid::from_vec(rows, cols, cross)?;
    plan.process(&mut corr, Direction::Inverse);
    let surface = corr.map(|z| z.re);
    Ok(locate_peak(&surface))
}

fn prepare(g: &Grid<f64>, window: Window) -> Result<Grid<Complex64>> {
    let (rows, cols) = g.dims();
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    if g.iter().all(|&v| v == g.as_slice()[0]) {
        return Err(Error::DegenerateInput("phase correlation of a constant image".into()));
    }
    let hann = |i: usize, n: usize| {
        if n < 2 {
            1.0
        } else {
            0.5 - 0.5 * libm::cos(core::f64::consts::TAU * i as f64 / (n - 1) as f64)
        }
    };
    Ok(Grid::from_fn(rows, cols, |r, c| {
        let w = match window {
            Window::None => 1.0,
            Window::Hann => hann(r, rows) * hann(c, cols),
            Window::HannCols => hann(c, cols),
        };
        Complex64::new((g[(r, c)] - mean) * w, 0.0)
    }))
}

fn locate_peak(s: &Grid<f64>) -> TranslationEstimate {
    let (rows, cols) = s.dims();
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize, 0isize, 0isize);
    for r in 0..rows {
        let sy = signed_bin(r, rows);
        for c in 0..cols {
            let sx = signed_bin(c, cols);
            let v = s[(r, c)];
            if v > best.0 || (v == best.0 && (sx, sy) < (best.3, best.4)) {
                best = (v, r, c, sx, sy);
            }
        }
    }
    let (peak, r, c, sx, sy) = best;
    let fit = |l: f64, m: f64, h: f64| {
        let den = l - 2.0 * m + h;
        let d = if den < 0.0 { ((l - h) / (2.0 * den)).clamp(-0.5, 0.5) } else { 0.0 };
        // offsets this small are round-off around an integer shift
        if d.abs() < 1e-6 {
            0.0
        } else {
            d
        }
    };
    let dx = if cols >= 3 {
        fit(s[(r, (c + cols - 1) % cols)], peak, s[(r, (c + 1) % cols)])
    } else {
        0.0
    };
    let dy = if rows >= 3 {
        fit(s[((r + rows - 1) % rows, c)], peak, s[((r + 1) % rows, c)])
    } else {
        0.0
    };
    TranslationEstimate {
        tx: sx as f64 + dx,
        ty: sy as f64 + dy,
        peak: peak.clamp(0.0, 1.0),
    }
}

/// Similarity transform `t` with `b ≈ warp(a, t)`.
///
/// Rotation and scale come from phase-correlating log-polar resamplings of
/// the high-passed log magnitude spectra; the half-turn ambiguity of the
/// magnitude spectrum is resolved by the stronger translation peak.
pub fn phase_correlate_similarity(a: &Frame, b: &Frame) -> Result<AlignmentResult> {
    phase_correlate_similarity_with(&a.pixels, &b.pixels, &PhaseParams::default())
}

pub fn phase_correlate_similarity_with(a: &Grid<f64>, b: &Grid<f64>, params: &PhaseParams) -> Result<AlignmentResult> {
    ensure_same_dims(a.dims(), b.dims())?;
    let la = log_polar_spectrum(a, params)?;
    let mut total = SimilarityTransform::IDENTITY;
    let mut peak = 0.0;
    for round in 0..params.iterations.max(1) {
        let current = if round == 0 {
            b.clone()
        } else {
            warp_grid(b, &total.inverse(), b.dims()).0
        };
        let (step, p) = similarity_round(a, &la, &current, params)?;
        total = total.compose(&step);
        peak = p;
    }
    if peak < params.min_peak || !total.scale_acceptable() {
        return Err(Error::AlignmentFailed { peak });
    }
    Ok(AlignmentResult {
        transform: total,
        peak_response: peak,
        refined: false,
    })
}

fn similarity_round(a: &Grid<f64>, la: &Grid<f64>, b: &Grid<f64>, params: &PhaseParams) -> Result<(SimilarityTransform, f64)> {
    let lb = log_polar_spectrum(b, params)?;
    let lp = phase_translation(la, &lb, Window::HannCols)?;
    let (rows, cols) = a.dims();
    let r_max = rows.min(cols) as f64 / 2.0;
    let dlog = libm::log(r_max / params.min_radius) / (params.radii - 1) as f64;
    let rotation = lp.ty * core::f64::consts::PI / params.angles as f64;
    let scale = libm::exp(-lp.tx * dlog);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::AlignmentFailed { peak: 0.0 });
    }
    let mut best: Option<(SimilarityTransform, f64)> = None;
    for theta in [rotation, rotation + core::f64::consts::PI] {
        let rs = SimilarityTransform {
            scale,
            rotation: wrap_angle(theta),
            tx: 0.0,
            ty: 0.0,
        };
        let (unrotated, _) = warp_grid(b, &rs.inverse(), b.dims());
        let tr = match phase_translation(a, &unrotated, Window::Hann) {
            Ok(tr) => tr,
            Err(_) => continue,
        };
        // b'(q) = a(q − τ') with τ = s·R·τ'
        let (tx, ty) = SimilarityTransform { tx: 0.0, ty: 0.0, ..rs }.apply(tr.tx, tr.ty);
        let cand = SimilarityTransform { tx, ty, ..rs };
        if best.map_or(true, |(_, p)| tr.peak > p) {
            best = Some((cand, tr.peak));
        }
    }
    best.ok_or(Error::AlignmentFailed { peak: 0.0 })
}

/// High-passed log magnitude spectrum resampled onto `angles × radii`
/// (rows: angle over `[0, π)`, columns: log radius).
fn log_polar_spectrum(g: &Grid<f64>, params: &PhaseParams) -> Result<Grid<f64>> {
    let (rows, cols) = g.dims();
    let plan = Fft2d::new(rows, cols);
    let mut f = prepare(g, Window::Hann)?;
    plan.process(&mut f, Direction::Forward);
    // centred (fft-shifted) filtered log magnitude
    let (hr, hc) = (rows / 2, cols / 2);
    let pi = core::f64::consts::PI;
    let shifted = Grid::from_fn(rows, cols, |r, c| {
        let sr = (r + rows - hr) % rows;
        let sc = (c + cols - hc) % cols;
        let xi = signed_bin(sc, cols) as f64 / cols as f64;
        let eta = signed_bin(sr, rows) as f64 / rows as f64;
        let x = libm::cos(pi * xi) * libm::cos(pi * eta);
        (1.0 - x) * (2.0 - x) * libm::log1p(f[(sr, sc)].norm())
    });
    let m = rows.min(cols) as f64;
    let r_max = m / 2.0;
    if !(params.min_radius > 0.0 && params.min_radius < r_max) || params.angles < 2 || params.radii < 2 {
        return Err(crate::error::invalid("log-polar grid does not fit the image"));
    }
    let dlog = libm::log(r_max / params.min_radius) / (params.radii - 1) as f64;
    Ok(Grid::from_fn(params.angles, params.radii, |i, j| {
        let theta = pi * i as f64 / params.angles as f64;
        let f = params.min_radius * libm::exp(j as f64 * dlog) / m;
        let x = hc as f64 + f * libm::cos(theta) * cols as f64;
        let y = hr as f64 + f * libm::sin(theta) * rows as f64;
        bilinear_clamped(&shifted, x, y)
    }))
}

fn bilinear_clamped(g: &Grid<f64>, x: f64, y: f64) -> f64 {
    let (rows, cols) = g.dims();
    let x = x.clamp(0.0, cols as f64 - 1.0);
    let y = y.clamp(0.0, rows as f64 - 1.0);
    let (x0, y0) = (libm::floor(x) as usize, libm::floor(y) as usize);
    let (x1, y1) = ((x0 + 1).min(cols - 1), (y0 + 1).min(rows - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = g[(y0, x0)] * (1.0 - fx) + g[(y0, x1)] * fx;
    let bot = g[(y1, x0)] * (1.0 - fx) + g[(y1, x1)] * fx;
    top * (1.0 - fy) + bot * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::testutil::{pair, rough_frame};
    use crate::registration::warp;
    use crate::surface_sim::{generate_surface, RoughnessSpectrum};

    fn textured(n: usize, seed: u64) -> Frame {
        let h = generate_surface(
            n,
            n,
            1.0,
            RoughnessSpectrum::Gaussian {
                correlation_length_px: 6.0,
                rms_um: 1.0,
            },
            seed,
        )
        .unwrap();
        Frame::from_pixels(h.heights().map(|v| 100.0 + 10.0 * v)).unwrap()
    }

    fn circular_shift(f: &Frame, dx: isize, dy: isize) -> Frame {
        let (rows, cols) = f.dims();
        Frame::from_pixels(Grid::from_fn(rows, cols, |r, c| {
            let sr = (r as isize - dy).rem_euclid(rows as isize) as usize;
            let sc = (c as isize - dx).rem_euclid(cols as isize) as usize;
            f.pixels[(sr, sc)]
        }))
        .unwrap()
    }

    #[test]
    fn integer_circular_shift_is_exact() {
        let a = textured(64, 1);
        let b = circular_shift(&a, 5, -3);
        let t = phase_correlate_translation(&a, &b).unwrap();
        assert_eq!((t.tx, t.ty), (5.0, -3.0));
        assert!(t.peak > 0.999);
        let id = phase_correlate_translation(&a, &a).unwrap();
        assert_eq!((id.tx, id.ty), (0.0, 0.0));
        assert!((id.peak - 1.0).abs() < 1e-3);
    }

    #[test]
    fn half_pixel_shift() {
        let a = textured(96, 2);
        let b = warp(&a, &SimilarityTransform::translation(2.5, 0.0), a.dims()).frame;
        let t = phase_correlate_translation(&a, &b).unwrap();
        assert!(t.tx >= 2.3 && t.tx <= 2.7, "tx {}", t.tx);
        assert!(t.ty.abs() < 0.3);
    }

    #[test]
    fn constant_image_is_degenerate() {
        let a = Frame::from_pixels(Grid::new(16, 16, 4.0)).unwrap();
        let b = textured(16, 3);
        assert!(matches!(phase_correlate_translation(&a, &b), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn recovers_rotation() {
        let truth = SimilarityTransform::new(1.0, 3f64.to_radians(), 0.0, 0.0).unwrap();
        let (a, b) = pair(256, &truth, 4);
        let r = phase_correlate_similarity(&a, &b).unwrap();
        let deg = r.transform.rotation.to_degrees();
        assert!(deg > 2.8 && deg < 3.2, "rotation {deg}");
        assert!(r.transform.scale > 0.995 && r.transform.scale < 1.005, "scale {}", r.transform.scale);
    }

    #[test]
    fn recovers_scale_and_translation() {
        let truth = SimilarityTransform::new(1.06, -7f64.to_radians(), 6.0, -4.0).unwrap();
        let (a, b) = pair(256, &truth, 5);
        let r = phase_correlate_similarity(&a, &b).unwrap().transform;
        assert!((r.rotation - truth.rotation).abs().to_degrees() < 0.2);
        assert!((r.scale / truth.scale - 1.0).abs() < 0.005);
        assert!((r.tx - truth.tx).abs() < 1.0 && (r.ty - truth.ty).abs() < 1.0, "{r:?}");
    }

    #[test]
    fn identity_pair() {
        let a = textured(128, 6);
        let r = phase_correlate_similarity(&a, &a).unwrap();
        let t = r.transform;
        assert!((t.scale - 1.0).abs() < 1e-3 && t.rotation.abs() < 1e-3 && t.tx.abs() < 0.05 && t.ty.abs() < 0.05, "{t:?}");
    }

    #[test]
    fn unrelated_frames_fail() {
        let a = rough_frame(256, 7);
        let b = rough_frame(256, 8);
        assert!(matches!(phase_correlate_similarity(&a, &b), Err(Error::AlignmentFailed { .. })));
    }
}
