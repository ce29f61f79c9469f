use alloc::vec::Vec;

use super::surface::{height_gradients, HeightMap};
use super::video::Frame;
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;

/// Quadrature nodes used for the scanner lamp integral.
pub const DEFAULT_SCANNER_SAMPLES: usize = 64;

/// Weights of the diffuse + specular reflection model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionParams {
    pub w_d: f64,
    pub w_s: f64,
    /// Gloss exponent of the specular lobe.
    pub k_e: f64,
    /// Light strength in mm²; a mirror 100 mm from the lamp renders at `l / 1e4`.
    pub l: f64,
}

impl Default for ReflectionParams {
    fn default() -> Self {
        Self {
            w_d: 0.6,
            w_s: 0.4,
            k_e: 200.0,
            l: 1.0e4,
        }
    }
}

impl ReflectionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w_d >= 0.0
            && self.w_s >= 0.0
            && self.w_d + self.w_s > 0.0
            && self.k_e > 0.0
            && self.l > 0.0
            && [self.w_d, self.w_s, self.k_e, self.l].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(invalid("reflection params need w_d, w_s >= 0 with w_d + w_s > 0, k_e > 0 and l > 0"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightKind {
    Point,
    /// Scanner lamp sweeping `x` over `[x1, x2]` at the pose's `y` offset and height.
    LinearPath { x1: f64, x2: f64 },
}

/// Light-source position in surface coordinates (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightPose {
    pub o: [f64; 3],
    pub kind: LightKind,
}

impl LightPose {
    pub fn point(o: [f64; 3]) -> Result<Self> {
        let pose = Self { o, kind: LightKind::Point };
        pose.validate()?;
        Ok(pose)
    }

    /// Point light at `distance` mm, `polar_deg` from the surface normal and
    /// `azimuth_deg` counter-clockwise from the `+x` axis.
    pub fn spherical(polar_deg: f64, azimuth_deg: f64, distance: f64) -> Result<Self> {
        let (t, p) = (polar_deg.to_radians(), azimuth_deg.to_radians());
        Self::point([
            distance * libm::sin(t) * libm::cos(p),
            distance * libm::sin(t) * libm::sin(p),
            distance * libm::cos(t),
        ])
    }

    /// Scanner lamp travelling from `x1` to `x2` at lateral offset `y_offset` and height `z`.
    pub fn scanner(x1: f64, x2: f64, y_offset: f64, z: f64) -> Result<Self> {
        let pose = Self {
            o: [0.0, y_offset, z],
            kind: LightKind::LinearPath { x1, x2 },
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.o[2] > 0.0) || self.o.iter().any(|v| !v.is_finite()) {
            return Err(invalid("light must sit above the surface (o_z > 0)"));
        }
        if let LightKind::LinearPath { x1, x2 } = self.kind {
            if !(x1 < x2) {
                return Err(invalid("scanner path needs x1 < x2"));
            }
        }
        Ok(())
    }

    /// Polar angle of the light direction seen from the surface origin, in degrees.
    pub fn polar_deg(&self) -> f64 {
        let [x, y, z] = self.o;
        libm::atan2(libm::sqrt(x * x + y * y), z).to_degrees()
    }

    pub fn azimuth_deg(&self) -> f64 {
        libm::atan2(self.o[1], self.o[0]).to_degrees()
    }

    pub fn distance(&self) -> f64 {
        let [x, y, z] = self.o;
        libm::sqrt(x * x + y * y + z * z)
    }
}

/// Orthographic camera: only the viewing direction enters the shading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    /// Unit vector from the surface towards the camera.
    pub v_c: [f64; 3],
    pub position: [f64; 3],
}

impl CameraPose {
    pub fn new(v_c: [f64; 3], position: [f64; 3]) -> Result<Self> {
        let n = libm::sqrt(v_c.iter().map(|v| v * v).sum::<f64>());
        if !((n - 1.0).abs() < 1e-9) {
            return Err(invalid("camera direction must be a unit vector"));
        }
        Ok(Self { v_c, position })
    }

    /// Camera straight above the chip at `height` mm.
    pub fn overhead(height: f64) -> Self {
        Self {
            v_c: [0.0, 0.0, 1.0],
            position: [0.0, 0.0, height],
        }
    }
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::overhead(200.0)
    }
}

/// Opposite-direction scanner passes; 90° and 270° rotate the chip on the platen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanDirection {
    Deg0,
    Deg90,
    Deg180,
    Deg270,
}

impl ScanDirection {
    pub const ALL: [ScanDirection; 4] = [Self::Deg0, Self::Deg90, Self::Deg180, Self::Deg270];

    pub fn degrees(self) -> u32 {
        match self {
            Self::Deg0 => 0,
            Self::Deg90 => 90,
            Self::Deg180 => 180,
            Self::Deg270 => 270,
        }
    }

    pub fn from_degrees(d: u32) -> Result<Self> {
        match d {
            0 => Ok(Self::Deg0),
            90 => Ok(Self::Deg90),
            180 => Ok(Self::Deg180),
            270 => Ok(Self::Deg270),
            _ => Err(invalid("scan direction must be 0, 90, 180 or 270")),
        }
    }
}

/// Per-pixel positions (mm), unit normals and diffuse gain of a surface,
/// precomputed once and reused for every frame of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGeometry {
    rows: usize,
    cols: usize,
    positions: Vec<[f64; 3]>,
    normals: Vec<[f64; 3]>,
    diffuse_gain: Option<Vec<f64>>,
}

impl SurfaceGeometry {
    pub fn new(h: &HeightMap) -> Self {
        let (rows, cols) = h.dims();
        let (gx, gy) = height_gradients(h);
        let mm = h.pitch() / 1000.0;
        let (cr, cc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
        let mut positions = Vec::with_capacity(rows * cols);
        let mut normals = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                positions.push([(c as f64 - cc) * mm, (r as f64 - cr) * mm, h.heights()[(r, c)] / 1000.0]);
                let (sx, sy) = (gx[(r, c)], gy[(r, c)]);
                let inv = 1.0 / libm::sqrt(1.0 + sx * sx + sy * sy);
                normals.push([-sx * inv, -sy * inv, inv]);
            }
        }
        Self {
            rows,
            cols,
            positions,
            normals,
            diffuse_gain: None,
        }
    }

    /// Spatially varying multiplier on `w_d` (e.g. printed marking ink).
    pub fn with_diffuse_gain(mut self, gain: &Grid<f64>) -> Result<Self> {
        crate::grid::ensure_same_dims((self.rows, self.cols), gain.dims())?;
        if gain.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(invalid("diffuse gain must be finite and non-negative"));
        }
        self.diffuse_gain = Some(gain.as_slice().to_vec());
        Ok(self)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Shading with a point light at `o`, accumulated into `out` with `weight`.
    pub(crate) fn shade_into(&self, p: &ReflectionParams, o: [f64; 3], v_c: [f64; 3], weight: f64, out: &mut [f64]) -> Result<()> {
        for (i, (pos, n)) in self.positions.iter().zip(&self.normals).enumerate() {
            let d = [o[0] - pos[0], o[1] - pos[1], o[2] - pos[2]];
            out[i] += weight * self.shade_offset(p, d, *n, v_c, i)?;
        }
        Ok(())
    }

    #[inline]
    fn shade_offset(&self, p: &ReflectionParams, d: [f64; 3], n: [f64; 3], v_c: [f64; 3], i: usize) -> Result<f64> {
        let dist2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if !(dist2 > 0.0) {
            return Err(Error::Geometry("light coincides with a surface point".into()));
        }
        let inv = 1.0 / libm::sqrt(dist2);
        let vi = [d[0] * inv, d[1] * inv, d[2] * inv];
        let ndv = n[0] * vi[0] + n[1] * vi[1] + n[2] * vi[2];
        let gain = self.diffuse_gain.as_ref().map_or(1.0, |g| g[i]);
        let diffuse = p.w_d * gain * ndv.max(0.0);
        let specular = if p.w_s > 0.0 {
            let vr = [2.0 * ndv * n[0] - vi[0], 2.0 * ndv * n[1] - vi[1], 2.0 * ndv * n[2] - vi[2]];
            let cos = (v_c[0] * vr[0] + v_c[1] * vr[1] + v_c[2] * vr[2]).clamp(0.0, 1.0);
            if cos > 0.0 {
                p.w_s * lobe(cos, p.k_e)
            } else {
                0.0
            }
        } else {
            0.0
        };
        Ok(p.l / dist2 * (diffuse + specular))
    }

    /// One scanner pass. The lamp rides with the scan head, so its offset
    /// relative to each pixel row is fixed while `x` sweeps the path.
    pub(crate) fn scanner_pass(&self, p: &ReflectionParams, path: &LightPose, dir: ScanDirection, samples: usize) -> Result<Vec<f64>> {
        let (x1, x2) = match path.kind {
            LightKind::LinearPath { x1, x2 } => (x1, x2),
            LightKind::Point => return Err(invalid("scanner pass needs a linear-path light")),
        };
        if samples < 6 {
            return Err(invalid("scanner quadrature needs at least 6 samples"));
        }
        let (oy, oz) = (path.o[1], path.o[2]);
        let v_c = [0.0, 0.0, 1.0];
        let step = (x2 - x1) / (samples - 1) as f64;
        let mut out = alloc::vec![0.0; self.positions.len()];
        for k in 0..samples {
            let s = x1 + step * k as f64;
            let w = step * end_corrected_weight(k, samples);
            for (i, (pos, n)) in self.positions.iter().zip(&self.normals).enumerate() {
                let d = match dir {
                    ScanDirection::Deg0 => [s - pos[0], oy, oz - pos[2]],
                    ScanDirection::Deg180 => [-s - pos[0], -oy, oz - pos[2]],
                    ScanDirection::Deg90 => [oy, s - pos[1], oz - pos[2]],
                    ScanDirection::Deg270 => [-oy, -s - pos[1], oz - pos[2]],
                };
                out[i] += w * self.shade_offset(p, d, *n, v_c, i)?;
            }
        }
        Ok(out)
    }
}

/// `x^k`, by repeated squaring when `k` is a small integer.
#[inline]
fn lobe(x: f64, k: f64) -> f64 {
    if k.fract() == 0.0 && (0.0..=4096.0).contains(&k) {
        let (mut n, mut base, mut acc) = (k as u32, x, 1.0);
        while n > 0 {
            if n & 1 == 1 {
                acc *= base;
            }
            base *= base;
            n >>= 1;
        }
        acc
    } else {
        libm::pow(x, k)
    }
}

/// Trapezoid rule with third-order end corrections on uniform nodes.
fn end_corrected_weight(k: usize, n: usize) -> f64 {
    match k.min(n - 1 - k) {
        0 => 3.0 / 8.0,
        1 => 7.0 / 6.0,
        2 => 23.0 / 24.0,
        _ => 1.0,
    }
}

/// Renders one frame lit by a point light.
pub fn render_point_light(h: &HeightMap, p: &ReflectionParams, light: &LightPose, cam: &CameraPose) -> Result<Frame> {
    render_point_light_geometry(&SurfaceGeometry::new(h), p, light, cam, 0)
}

pub(crate) fn render_point_light_geometry(
    geo: &SurfaceGeometry,
    p: &ReflectionParams,
    light: &LightPose,
    cam: &CameraPose,
    t: usize,
) -> Result<Frame> {
    p.validate()?;
    light.validate()?;
    if light.kind != LightKind::Point {
        return Err(invalid("render_point_light needs a point light"));
    }
    let mut out = alloc::vec![0.0; geo.positions.len()];
    geo.shade_into(p, light.o, cam.v_c, 1.0, &mut out)?;
    Frame::new(Grid::from_vec(geo.rows, geo.cols, out)?, *light, t)
}

/// Integrates the lamp sweep of a flatbed scanner with the trapezoid rule.
pub fn render_scanner_pass(h: &HeightMap, p: &ReflectionParams, path: &LightPose, direction: ScanDirection) -> Result<Frame> {
    SurfaceGeometry::new(h).render_scanner(p, path, direction, DEFAULT_SCANNER_SAMPLES)
}

impl SurfaceGeometry {
    /// Scanner pass with an explicit number of quadrature nodes.
    pub fn render_scanner(&self, p: &ReflectionParams, path: &LightPose, direction: ScanDirection, samples: usize) -> Result<Frame> {
        p.validate()?;
        path.validate()?;
        let out = self.scanner_pass(p, path, direction, samples)?;
        Frame::new(Grid::from_vec(self.rows, self.cols, out)?, *path, 0)
    }

    pub fn render_point(&self, p: &ReflectionParams, light: &LightPose, cam: &CameraPose, t: usize) -> Result<Frame> {
        render_point_light_geometry(self, p, light, cam, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_sim::{generate_surface, normals_from_height, RoughnessSpectrum};

    #[test]
    fn integer_lobe_matches_pow() {
        for x in [0.0, 0.3, 0.97, 0.999_9, 1.0] {
            for k in [0.0, 1.0, 7.0, 200.0, 2.5] {
                let (a, b) = (lobe(x, k), libm::pow(x, k));
                assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "{x} {k} {a} {b}");
            }
        }
    }

    fn flat(n: usize) -> HeightMap {
        HeightMap::new(Grid::new(n, n, 0.0), 10.0, 0).unwrap()
    }

    fn rough(seed: u64) -> HeightMap {
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
    fn overhead_diffuse_value() {
        let p = ReflectionParams {
            w_d: 0.6,
            w_s: 0.0,
            k_e: 10.0,
            l: 2.0e4,
        };
        let d = 120.0;
        let f = render_point_light(&flat(17), &p, &LightPose::point([0.0, 0.0, d]).unwrap(), &CameraPose::default()).unwrap();
        let centre = f.pixels[(8, 8)];
        assert!((centre - p.l * p.w_d / (d * d)).abs() < 1e-12);
    }

    #[test]
    fn mirror_alignment_peak() {
        let p = ReflectionParams {
            w_d: 0.0,
            w_s: 1.0,
            k_e: 50.0,
            l: 1.0e4,
        };
        let h = flat(33);
        let light = LightPose::point([0.0, 0.0, 100.0]).unwrap();
        let f = render_point_light(&h, &p, &light, &CameraPose::overhead(100.0)).unwrap();
        let (mut best, mut at) = (0.0, (0, 0));
        for r in 0..33 {
            for c in 0..33 {
                if f.pixels[(r, c)] > best {
                    best = f.pixels[(r, c)];
                    at = (r, c);
                }
            }
        }
        assert_eq!(at, (16, 16));
        assert!((best - 1.0e4 / 1.0e4).abs() < 1e-12);
    }

    #[test]
    fn linear_in_light_strength_and_diffuse_weight() {
        let h = rough(3);
        let light = LightPose::spherical(40.0, 225.0, 120.0).unwrap();
        let cam = CameraPose::default();
        let p = ReflectionParams::default();
        let a = render_point_light(&h, &p, &light, &cam).unwrap();
        let b = render_point_light(&h, &ReflectionParams { l: 2.0 * p.l, ..p }, &light, &cam).unwrap();
        for (x, y) in a.pixels.iter().zip(b.pixels.iter()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        let path = LightPose::scanner(-100.0, 100.0, 10.0, 10.0).unwrap();
        let pd = ReflectionParams { w_s: 0.0, ..p };
        let ph = ReflectionParams { w_d: 0.3, ..pd };
        let diff = |q: &ReflectionParams| {
            let f0 = render_scanner_pass(&h, q, &path, ScanDirection::Deg0).unwrap();
            let f1 = render_scanner_pass(&h, q, &path, ScanDirection::Deg180).unwrap();
            f0.pixels.zip_map(&f1.pixels, |x, y| x - y).unwrap()
        };
        let (full, half) = (diff(&pd), diff(&ph));
        for (x, y) in full.iter().zip(half.iter()) {
            assert!((x / 2.0 - y).abs() < 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn flat_scanner_passes_are_mirror_images() {
        let h = flat(32);
        let p = ReflectionParams::default();
        let path = LightPose::scanner(-100.0, 100.0, 10.0, 10.0).unwrap();
        let f0 = render_scanner_pass(&h, &p, &path, ScanDirection::Deg0).unwrap();
        let f1 = render_scanner_pass(&h, &p, &path, ScanDirection::Deg180).unwrap();
        for r in 0..32 {
            for c in 0..32 {
                // 180° equals 0° seen through a point reflection of the chip
                let mirrored = f1.pixels[(31 - r, 31 - c)];
                assert!((f0.pixels[(r, c)] - mirrored).abs() < 1e-9 * f0.pixels[(r, c)]);
            }
        }
        // symmetric lamp path on a flat chip: the centre sees identical light
        let c0 = f0.pixels[(15, 15)] + f0.pixels[(16, 16)];
        let c1 = f1.pixels[(15, 15)] + f1.pixels[(16, 16)];
        assert!((c0 - c1).abs() < 1e-9 * c0);
    }

    #[test]
    fn scanner_difference_tracks_normal_component() {
        let p = ReflectionParams { w_s: 0.0, ..ReflectionParams::default() };
        let path = LightPose::scanner(-100.0, 100.0, 10.0, 10.0).unwrap();
        for seed in 0..3 {
            let h = rough(seed);
            let n = normals_from_height(&h);
            let geo = SurfaceGeometry::new(&h);
            let f0 = geo.render_scanner(&p, &path, ScanDirection::Deg0, 64).unwrap();
            let f1 = geo.render_scanner(&p, &path, ScanDirection::Deg180, 64).unwrap();
            let d = f0.pixels.zip_map(&f1.pixels, |a, b| a - b).unwrap();
            let r = crate::stats::correlation(d.as_slice(), n.ny.as_slice()).unwrap();
            assert!(r > 0.95, "n_y correlation {r}");
            let f90 = geo.render_scanner(&p, &path, ScanDirection::Deg90, 64).unwrap();
            let f270 = geo.render_scanner(&p, &path, ScanDirection::Deg270, 64).unwrap();
            let d = f90.pixels.zip_map(&f270.pixels, |a, b| a - b).unwrap();
            let r = crate::stats::correlation(d.as_slice(), n.nx.as_slice()).unwrap();
            assert!(r > 0.95, "n_x correlation {r}");
        }
    }

    #[test]
    fn quadrature_converges() {
        let h = generate_surface(
            64,
            64,
            43.57,
            RoughnessSpectrum::Gaussian {
                correlation_length_px: 4.0,
                rms_um: 2.0,
            },
            5,
        )
        .unwrap();
        let p = ReflectionParams { w_s: 0.0, ..ReflectionParams::default() };
        let path = LightPose::scanner(-100.0, 100.0, 10.0, 10.0).unwrap();
        let geo = SurfaceGeometry::new(&h);
        let a = geo.render_scanner(&p, &path, ScanDirection::Deg0, 64).unwrap();
        let b = geo.render_scanner(&p, &path, ScanDirection::Deg0, 128).unwrap();
        let worst = a
            .pixels
            .iter()
            .zip(b.pixels.iter())
            .map(|(x, y)| (x - y).abs() / y.abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "relative change {worst}");
    }

    #[test]
    fn rejects_degenerate_geometry() {
        let h = flat(16);
        let p = ReflectionParams::default();
        let cam = CameraPose::default();
        // light placed exactly on a pixel centre of a zero-height chip is impossible
        // since o_z > 0 is enforced; construct the error through the raw path instead
        let geo = SurfaceGeometry::new(&h);
        let pos = geo.positions[0];
        let mut out = alloc::vec![0.0; 256];
        assert!(matches!(geo.shade_into(&p, pos, cam.v_c, 1.0, &mut out), Err(Error::Geometry(_))));
        assert!(LightPose::point([0.0, 0.0, 0.0]).is_err());
        assert!(LightPose::scanner(5.0, 5.0, 1.0, 1.0).is_err());
        assert!(CameraPose::new([0.0, 0.0, 2.0], [0.0; 3]).is_err());
        assert!(ReflectionParams { w_d: 0.0, w_s: 0.0, ..p }.validate().is_err());
    }
}
