use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::render::ReflectionParams;
use super::surface::HeightMap;
use super::video::Frame;
use crate::error::{invalid, Result};
use crate::grid::Grid;

/// One row of laser-marked characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextLine {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub chars: usize,
    pub char_width: usize,
    pub gap: usize,
}

/// Package marking shared by every unit of a product: engraved seven-segment
/// glyphs whose strokes reflect more diffusely than the bare mould compound.
#[derive(Debug, Clone, PartialEq)]
pub struct TextMarking {
    pub lines: Vec<TextLine>,
    pub stroke_px: usize,
    pub depth_um: f64,
    /// Multiplier on `w_d` inside the strokes.
    pub ink_gain: f64,
    /// Seed of the glyph sequence; identical across chips of one product.
    pub layout_seed: u64,
    /// Spacing of the marking laser's dot raster; 0 disables it.
    pub raster_pitch_px: usize,
    /// Extra diffuse multiplier on raster dots. The dots sit at the same
    /// place on every unit, so they light up identically across chips.
    pub raster_gain: f64,
    /// Fraction of the roughness removed at the bottom of the strokes.
    pub floor_smoothing: f64,
}

// segments a, b, c, d, e, f, g of the digits 0-9
const DIGITS: [u8; 10] = [
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110, 0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111,
];

impl TextMarking {
    /// Three centred lines of ten characters, scaled to the frame.
    pub fn default_for(rows: usize, cols: usize, layout_seed: u64) -> Self {
        let height = rows * 5 / 64;
        let char_width = cols * 3 / 64;
        let gap = cols / 64;
        let chars = 10;
        let width = chars * (char_width + gap) - gap;
        let left = cols.saturating_sub(width) / 2;
        let lines = [rows * 19 / 64, rows * 29 / 64, rows * 39 / 64]
            .iter()
            .map(|&top| TextLine {
                top,
                left,
                height,
                chars,
                char_width,
                gap,
            })
            .collect();
        Self {
            lines,
            stroke_px: (cols / 128).max(2),
            depth_um: 12.0,
            ink_gain: 1.8,
            layout_seed,
            raster_pitch_px: 3,
            raster_gain: 1.5,
            floor_smoothing: 0.9,
        }
    }

    /// Pixels covered by glyph strokes.
    pub fn stroke_mask(&self, rows: usize, cols: usize) -> Grid<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.layout_seed);
        let mut mask = Grid::new(rows, cols, false);
        let s = self.stroke_px;
        for line in &self.lines {
            for k in 0..line.chars {
                let segs = DIGITS[rng.random_range(0..10)];
                let x0 = line.left + k * (line.char_width + line.gap);
                let (x1, y0) = (x0 + line.char_width, line.top);
                let (ym, y1) = (y0 + line.height / 2, y0 + line.height);
                let mut paint = |r0: usize, r1: usize, c0: usize, c1: usize| {
                    for r in r0..r1.min(rows) {
                        for c in c0..c1.min(cols) {
                            mask[(r, c)] = true;
                        }
                    }
                };
                let rects = [
                    (y0, y0 + s, x0, x1),
                    (y0, ym + s / 2, x1.saturating_sub(s), x1),
                    (ym.saturating_sub(s / 2), y1, x1.saturating_sub(s), x1),
                    (y1.saturating_sub(s), y1, x0, x1),
                    (ym.saturating_sub(s / 2), y1, x0, x0 + s),
                    (y0, ym + s / 2, x0, x0 + s),
                    (ym.saturating_sub(s / 2), ym + s - s / 2, x0, x1),
                ];
                for (bit, &(r0, r1, c0, c1)) in rects.iter().enumerate() {
                    if segs & (1 << bit) != 0 {
                        paint(r0, r1, c0, c1);
                    }
                }
            }
        }
        mask
    }

    /// Stroke coverage softened by two 3×3 box filters, in `[0, 1]`.
    pub fn profile(&self, rows: usize, cols: usize) -> Grid<f64> {
        let hard = self.stroke_mask(rows, cols).map(|&b| if b { 1.0 } else { 0.0 });
        box3(&box3(&hard))
    }

    /// Engraves the marking into `h` and returns the diffuse gain map.
    pub fn apply(&self, h: &HeightMap) -> Result<(HeightMap, Grid<f64>)> {
        if !(self.depth_um >= 0.0) || !(self.ink_gain >= 0.0) || !(self.raster_gain >= 0.0) {
            return Err(invalid("marking depth and gains must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.floor_smoothing) {
            return Err(invalid("floor smoothing must lie in [0, 1]"));
        }
        let (rows, cols) = h.dims();
        let prof = self.profile(rows, cols);
        let heights = h
            .heights()
            .zip_map(&prof, |z, s| z * (1.0 - self.floor_smoothing * s) - self.depth_um * s)?;
        let pitch = self.raster_pitch_px;
        let gain = Grid::from_fn(rows, cols, |r, c| {
            let s = prof[(r, c)];
            let ink = 1.0 + (self.ink_gain - 1.0) * s;
            if pitch > 0 && r % pitch == 0 && c % pitch == 0 {
                ink * (1.0 + (self.raster_gain - 1.0) * s)
            } else {
                ink
            }
        });
        Ok((HeightMap::new(heights, h.pitch(), h.seed())?, gain))
    }
}

fn box3(g: &Grid<f64>) -> Grid<f64> {
    let (rows, cols) = g.dims();
    Grid::from_fn(rows, cols, |r, c| {
        let mut acc = 0.0;
        for rr in r.saturating_sub(1)..(r + 2).min(rows) {
            for cc in c.saturating_sub(1)..(c + 2).min(cols) {
                acc += g[(rr, cc)];
            }
        }
        acc / 9.0
    })
}

/// Glints on the rounded rim of the package body.
///
/// The rim slope falls linearly from `rim_slope` at the boundary to zero at
/// `rim_width_px` inside. With an overhead camera a rim pixel reflects the
/// lamp where its slope equals `tan(θ/2)`, so the bright band sits at
/// `rim_width_px · (1 − tan(θ/2) / rim_slope)` from the edge and creeps
/// inward as the lamp rises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGlare {
    /// Peak glint relative to a mirror reflection at the chip centre.
    pub strength: f64,
    pub corner_radius_px: f64,
    pub rim_width_px: f64,
    pub rim_slope: f64,
    pub band_sigma_px: f64,
    /// Exponent on the cosine between rim normal azimuth and light azimuth.
    pub facing_exponent: f64,
}

impl Default for EdgeGlare {
    fn default() -> Self {
        Self {
            strength: 0.9,
            corner_radius_px: 60.0,
            rim_width_px: 24.0,
            rim_slope: 0.45,
            band_sigma_px: 1.0,
            facing_exponent: 8.0,
        }
    }
}

impl EdgeGlare {
    /// Distance of each pixel centre from the rounded-rectangle boundary and
    /// the azimuth (radians) of the outward boundary normal.
    fn rim_geometry(&self, rows: usize, cols: usize) -> (Grid<f64>, Grid<f64>) {
        let (w, h) = (cols as f64, rows as f64);
        let rc = self.corner_radius_px.clamp(0.0, w.min(h) / 2.0);
        let mut dist = Grid::new(rows, cols, 0.0);
        let mut az = Grid::new(rows, cols, 0.0);
        for r in 0..rows {
            for c in 0..cols {
                let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
                let (cx, cy) = (x.clamp(rc, w - rc), y.clamp(rc, h - rc));
                let (dx, dy) = (x - cx, y - cy);
                let inner = libm::sqrt(dx * dx + dy * dy);
                if inner > 0.0 {
                    dist[(r, c)] = rc - inner;
                    az[(r, c)] = libm::atan2(dy, dx);
                } else {
                    let sides = [(x, core::f64::consts::PI), (w - x, 0.0), (y, -core::f64::consts::FRAC_PI_2), (h - y, core::f64::consts::FRAC_PI_2)];
                    let (d, a) = sides.iter().copied().fold((f64::INFINITY, 0.0), |acc, s| if s.0 < acc.0 { s } else { acc });
                    dist[(r, c)] = d;
                    az[(r, c)] = a;
                }
            }
        }
        (dist, az)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.strength >= 0.0
            && self.corner_radius_px >= 0.0
            && self.rim_width_px > 0.0
            && self.rim_slope > 0.0
            && self.band_sigma_px > 0.0
            && self.facing_exponent >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(invalid("edge glare parameters must be non-negative with positive widths"))
        }
    }
}

/// Precomputed rim geometry for repeated glare injection on one frame size.
#[derive(Debug, Clone)]
pub struct GlareField {
    glare: EdgeGlare,
    dist: Grid<f64>,
    azimuth: Grid<f64>,
}

impl GlareField {
    pub fn new(glare: EdgeGlare, rows: usize, cols: usize) -> Result<Self> {
        glare.validate()?;
        let (dist, azimuth) = glare.rim_geometry(rows, cols);
        Ok(Self { glare, dist, azimuth })
    }

    /// Adds the rim glints for the frame's light pose.
    pub fn apply(&self, frame: &mut Frame, p: &ReflectionParams) -> Result<()> {
        crate::grid::ensure_same_dims(self.dist.dims(), frame.dims())?;
        let g = &self.glare;
        let theta = frame.light.polar_deg().to_radians();
        let phi = frame.light.azimuth_deg().to_radians();
        let dist = frame.light.distance();
        let d0 = g.rim_width_px * (1.0 - libm::tan(theta / 2.0) / g.rim_slope);
        if d0 < 0.0 || g.strength == 0.0 {
            return Ok(());
        }
        let amp = g.strength * p.l * p.w_s / (dist * dist);
        let px = frame.pixels.as_mut_slice();
        for ((v, &d), &a) in px.iter_mut().zip(self.dist.iter()).zip(self.azimuth.iter()) {
            let z = (d - d0) / g.band_sigma_px;
            if z.abs() > 6.0 {
                continue;
            }
            let facing = libm::cos(a - phi).max(0.0);
            *v += amp * libm::pow(facing, g.facing_exponent) * libm::exp(-0.5 * z * z);
        }
        Ok(())
    }
}

/// Adds rim glints to a single frame.
pub fn inject_edge_glare(frame: &Frame, glare: &EdgeGlare, p: &ReflectionParams) -> Result<Frame> {
    let (rows, cols) = frame.dims();
    let mut out = frame.clone();
    GlareField::new(*glare, rows, cols)?.apply(&mut out, p)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_sim::LightPose;

    #[test]
    fn marking_is_deterministic_and_inside_frame() {
        let m = TextMarking::default_for(256, 256, 9);
        let a = m.stroke_mask(256, 256);
        assert_eq!(a, m.stroke_mask(256, 256));
        let count = a.iter().filter(|&&b| b).count();
        assert!(count > 500 && count < 256 * 256 / 4, "{count}");
        for r in 0..256 {
            assert!(!a[(r, 0)] && !a[(r, 255)]);
        }
        let other = TextMarking { layout_seed: 10, ..m.clone() }.stroke_mask(256, 256);
        assert_ne!(a, other);
    }

    #[test]
    fn engraving_lowers_strokes_and_raises_gain() {
        let m = TextMarking::default_for(128, 128, 1);
        let h = HeightMap::new(Grid::new(128, 128, 0.0), 40.0, 0).unwrap();
        let (eng, gain) = m.apply(&h).unwrap();
        let mask = m.stroke_mask(128, 128);
        for i in 0..mask.len() {
            let (r, c) = (i / 128, i % 128);
            if mask[(r, c)] {
                assert!(eng.heights()[(r, c)] < 0.0);
                assert!(gain[(r, c)] > 1.0);
            }
        }
    }

    #[test]
    fn raster_dots_boost_gain_inside_strokes_only() {
        let m = TextMarking::default_for(128, 128, 1);
        let h = HeightMap::new(Grid::new(128, 128, 0.0), 40.0, 0).unwrap();
        let (_, gain) = m.apply(&h).unwrap();
        let (_, plain) = TextMarking { raster_pitch_px: 0, ..m.clone() }.apply(&h).unwrap();
        let prof = m.profile(128, 128);
        for r in 0..128 {
            for c in 0..128 {
                let dot = r % 3 == 0 && c % 3 == 0 && prof[(r, c)] > 0.0;
                if dot {
                    assert!(gain[(r, c)] > plain[(r, c)]);
                } else {
                    assert_eq!(gain[(r, c)], plain[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn glare_band_follows_light_and_facing_side() {
        let n = 200;
        let p = ReflectionParams::default();
        let base = Frame::new(Grid::new(n, n, 0.0), LightPose::spherical(45.0, 180.0, 100.0).unwrap(), 0).unwrap();
        let g = EdgeGlare::default();
        let lit = inject_edge_glare(&base, &g, &p).unwrap();
        let row = n / 2;
        // light towards -x: left rim glints, right rim stays dark
        let left: f64 = (0..30).map(|c| lit.pixels[(row, c)]).sum();
        let right: f64 = (n - 30..n).map(|c| lit.pixels[(row, c)]).sum();
        assert!(left > 0.0 && right < 1e-12 * left);
        let peak = |f: &Frame| (0..30).max_by(|&a, &b| f.pixels[(row, a)].total_cmp(&f.pixels[(row, b)])).unwrap();
        let high = Frame {
            light: LightPose::spherical(30.0, 180.0, 100.0).unwrap(),
            ..base.clone()
        };
        let lit_high = inject_edge_glare(&high, &g, &p).unwrap();
        assert!(peak(&lit_high) > peak(&lit));
    }
}
