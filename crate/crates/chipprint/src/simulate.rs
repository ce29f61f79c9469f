//! Synthetic chips and captures: one rough moulded surface per chip, a
//! scanner template, and camera clips with per-capture lamp jitter, chip
//! placement and read noise.

use chipprint_core::registration::{warp, SimilarityTransform};
use chipprint_core::seed::{derive_seed, hash_str, mix64};
use chipprint_core::surface_sim::{
    add_capture_noise, generate_surface, CameraPose, Frame, GlareField, HeightMap, LightPose, LightTrajectory, LightWaypoint,
    ScanDirection, SurfaceGeometry,
};
use chipprint_core::{Grid, Result};

use crate::config::PipelineConfig;
use crate::error::AppResult;

/// Uniform draw in `[-1, 1)` from a seed and a stream index.
fn symmetric_unit(seed: u64, stream: u64) -> f64 {
    let bits = mix64(seed ^ mix64(stream)) >> 11;
    bits as f64 / (1u64 << 52) as f64 - 1.0
}

pub fn chip_id(index: usize) -> String {
    format!("chip{index:02}")
}

pub fn clip_id(index: usize) -> String {
    format!("clip{index}")
}

pub fn chip_seed(base_seed: u64, chip_id: &str) -> u64 {
    derive_seed(base_seed, &[hash_str("chip"), hash_str(chip_id)])
}

pub fn clip_seed(chip_seed: u64, clip_id: &str) -> u64 {
    derive_seed(chip_seed, &[hash_str("clip"), hash_str(clip_id)])
}

/// Simulated unit: engraved rough surface and its flatbed template.
pub struct SimChip {
    pub chip_id: String,
    pub seed: u64,
    pub height: HeightMap,
    pub geometry: SurfaceGeometry,
}

impl SimChip {
    pub fn new(cfg: &PipelineConfig, chip_id: &str, base_seed: u64) -> Result<Self> {
        let s = &cfg.surface;
        let seed = chip_seed(base_seed, chip_id);
        let rough = generate_surface(s.rows, s.cols, s.pitch_um, s.spectrum(), seed)?;
        Self::from_height(cfg, chip_id, seed, rough)
    }

    /// Marks a given height map with the product text.
    pub fn from_height(cfg: &PipelineConfig, chip_id: &str, seed: u64, rough: HeightMap) -> Result<Self> {
        let (height, geometry) = match cfg.surface.marking() {
            Some(m) => {
                let (h, gain) = m.apply(&rough)?;
                let g = SurfaceGeometry::new(&h).with_diffuse_gain(&gain)?;
                (h, g)
            }
            None => {
                let g = SurfaceGeometry::new(&rough);
                (rough, g)
            }
        };
        Ok(Self {
            chip_id: chip_id.to_string(),
            seed,
            height,
            geometry,
        })
    }

    pub fn scanner_pass(&self, cfg: &PipelineConfig, dir: ScanDirection) -> Result<Frame> {
        let r = &cfg.render;
        let path = LightPose::scanner(
            -r.scanner_half_length_mm,
            r.scanner_half_length_mm,
            r.scanner_offset_mm,
            r.scanner_height_mm,
        )?;
        self.geometry.render_scanner(&r.reflection(), &path, dir, r.scanner_samples)
    }

    /// Mean of the four scan directions.
    pub fn template(&self, cfg: &PipelineConfig) -> Result<Frame> {
        let passes = ScanDirection::ALL
            .iter()
            .map(|&d| self.scanner_pass(cfg, d))
            .collect::<Result<Vec<_>>>()?;
        let (rows, cols) = passes[0].dims();
        let px = Grid::from_fn(rows, cols, |r, c| passes.iter().map(|p| p.pixels[(r, c)]).sum::<f64>() / 4.0);
        Frame::from_pixels(px)
    }

    /// Four noisy scanner passes for one capture session.
    pub fn scanner_capture(&self, cfg: &PipelineConfig, session_seed: u64) -> Result<[Frame; 4]> {
        let mut out = Vec::with_capacity(4);
        for (k, &d) in ScanDirection::ALL.iter().enumerate() {
            let f = self.scanner_pass(cfg, d)?;
            out.push(noisy(&f, cfg.capture.noise_fraction, derive_seed(session_seed, &[hash_str("scan"), k as u64]))?);
        }
        Ok(out.try_into().expect("four directions"))
    }
}

fn noisy(f: &Frame, fraction: f64, seed: u64) -> Result<Frame> {
    let peak = f.pixels.iter().copied().fold(0.0, f64::max);
    add_capture_noise(f, fraction * peak, seed)
}

/// Template for mask construction shared by all units of the product: the
/// marking on an otherwise flat surface.
pub fn product_template(cfg: &PipelineConfig) -> Result<Frame> {
    let s = &cfg.surface;
    let flat = HeightMap::new(Grid::new(s.rows, s.cols, 0.0), s.pitch_um, 0)?;
    SimChip::from_height(cfg, "product", 0, flat)?.template(cfg)
}

/// Everything that differs between two captures of one chip.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSetup {
    pub seed: u64,
    pub trajectory: LightTrajectory,
    /// Maps chip coordinates to camera coordinates.
    pub placement: SimilarityTransform,
}

impl CaptureSetup {
    pub fn new(cfg: &PipelineConfig, seed: u64) -> Result<Self> {
        let c = &cfg.capture;
        let u = |k| symmetric_unit(seed, k);
        let mut trajectory = cfg.render.trajectory();
        let (dp, da, dd) = (u(1) * c.polar_jitter_deg, u(2) * c.azimuth_jitter_deg, 1.0 + u(3) * c.distance_jitter_fraction);
        for w in trajectory.waypoints.iter_mut() {
            *w = LightWaypoint {
                polar_deg: (w.polar_deg + dp).clamp(0.0, 89.0),
                azimuth_deg: w.azimuth_deg + da,
                distance_mm: w.distance_mm * dd,
            };
        }
        let placement = SimilarityTransform::new(
            1.0 + u(4) * c.max_scale_change,
            u(5) * c.max_rotation_deg.to_radians(),
            u(6) * c.max_translation_px,
            u(7) * c.max_translation_px,
        )?;
        Ok(Self {
            seed,
            trajectory,
            placement,
        })
    }
}

/// Renders the frames of one capture on demand.
pub struct ClipRenderer<'a> {
    cfg: &'a PipelineConfig,
    chip: &'a SimChip,
    setup: CaptureSetup,
    glare: Option<GlareField>,
    camera: CameraPose,
}

impl<'a> ClipRenderer<'a> {
    pub fn new(cfg: &'a PipelineConfig, chip: &'a SimChip, setup: CaptureSetup) -> Result<Self> {
        let (rows, cols) = chip.geometry.dims();
        let glare = if cfg.render.edge_glare {
            Some(GlareField::new(cfg.render.glare.params(), rows, cols)?)
        } else {
            None
        };
        let camera = CameraPose::overhead(cfg.render.camera_height_mm);
        Ok(Self {
            cfg,
            chip,
            setup,
            glare,
            camera,
        })
    }

    pub fn setup(&self) -> &CaptureSetup {
        &self.setup
    }

    pub fn len(&self) -> usize {
        self.cfg.render.n_frames
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frame `t` before placement and noise.
    pub fn clean_frame(&self, t: usize) -> Result<Frame> {
        let p = self.cfg.render.reflection();
        let pose = self.setup.trajectory.frame_waypoint(t, self.len())?.pose()?;
        let mut f = self.chip.geometry.render_point(&p, &pose, &self.camera, t)?;
        if let Some(g) = &self.glare {
            g.apply(&mut f, &p)?;
        }
        Ok(f)
    }

    /// Frame `t` as the camera records it.
    pub fn frame(&self, t: usize) -> Result<Frame> {
        let clean = self.clean_frame(t)?;
        let placed = warp(&clean, &self.setup.placement, clean.dims());
        let mut f = placed.frame;
        f.light = clean.light;
        f.t = t;
        noisy(&f, self.cfg.capture.noise_fraction, derive_seed(self.setup.seed, &[hash_str("frame"), t as u64]))
    }
}

/// Renders a dataset on demand instead of reading it from disk.
pub struct SimSource<'a> {
    cfg: &'a PipelineConfig,
    chips: Vec<SimChip>,
    templates: Vec<Frame>,
    clips: Vec<chipprint_core::evaluation::ClipRef>,
    chip_of_clip: Vec<usize>,
    mask_template: Frame,
}

impl<'a> SimSource<'a> {
    pub fn new(cfg: &'a PipelineConfig, n_chips: usize, clips_per_chip: usize, base_seed: u64) -> Result<Self> {
        use rayon::prelude::*;
        let built = (0..n_chips)
            .into_par_iter()
            .map(|i| {
                let chip = SimChip::new(cfg, &chip_id(i), base_seed)?;
                let template = chip.template(cfg)?;
                Ok((chip, template))
            })
            .collect::<Result<Vec<_>>>()?;
        let (chips, templates): (Vec<_>, Vec<_>) = built.into_iter().unzip();
        let mut clips = Vec::new();
        let mut chip_of_clip = Vec::new();
        for (i, chip) in chips.iter().enumerate() {
            for k in 0..clips_per_chip {
                clips.push(chipprint_core::evaluation::ClipRef::new(chip.chip_id.clone(), clip_id(k)));
                chip_of_clip.push(i);
            }
        }
        Ok(Self {
            cfg,
            chips,
            templates,
            clips,
            chip_of_clip,
            mask_template: product_template(cfg)?,
        })
    }

    pub fn chip(&self, clip: usize) -> &SimChip {
        &self.chips[self.chip_of_clip[clip]]
    }

    pub fn renderer(&self, clip: usize) -> Result<ClipRenderer<'_>> {
        let chip = self.chip(clip);
        let setup = CaptureSetup::new(self.cfg, clip_seed(chip.seed, &self.clips[clip].clip_id))?;
        ClipRenderer::new(self.cfg, chip, setup)
    }
}

impl crate::bench::CaptureSource for SimSource<'_> {
    fn clips(&self) -> &[chipprint_core::evaluation::ClipRef] {
        &self.clips
    }

    fn template(&self, clip: usize) -> AppResult<Frame> {
        Ok(self.templates[self.chip_of_clip[clip]].clone())
    }

    fn mask_template(&self) -> AppResult<Frame> {
        Ok(self.mask_template.clone())
    }

    fn frame_count(&self, _clip: usize) -> usize {
        self.cfg.render.n_frames
    }

    fn visit_frames(&self, clip: usize, visit: &mut dyn FnMut(Frame) -> Result<()>) -> AppResult<()> {
        let r = self.renderer(clip)?;
        for t in 0..r.len() {
            visit(r.frame(t)?)?;
        }
        Ok(())
    }

    fn scanner_capture(&self, clip: usize) -> AppResult<Option<[Frame; 4]>> {
        let chip = self.chip(clip);
        let seed = clip_seed(chip.seed, &self.clips[clip].clip_id);
        Ok(Some(self.chip(clip).scanner_capture(self.cfg, seed)?))
    }

    fn pitch_um(&self) -> f64 {
        self.cfg.surface.pitch_um
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.surface.rows = 96;
        cfg.surface.cols = 96;
        cfg.render.n_frames = 6;
        cfg.render.scanner_samples = 8;
        cfg.render.glare.rim_width_px = 8.0;
        cfg.render.glare.corner_radius_px = 12.0;
        cfg.mask.edge_margin_px = 10;
        cfg.specular.n_points = 20;
        cfg.specular.frame_count = 3;
        cfg
    }

    #[test]
    fn unit_draws_cover_range() {
        let xs: Vec<f64> = (0..10_000).map(|k| symmetric_unit(3, k)).collect();
        assert!(xs.iter().all(|x| (-1.0..1.0).contains(x)));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03);
    }

    #[test]
    fn chips_are_deterministic_and_distinct() {
        let cfg = small_config();
        let a = SimChip::new(&cfg, "chip00", 1).unwrap();
        let b = SimChip::new(&cfg, "chip00", 1).unwrap();
        let c = SimChip::new(&cfg, "chip01", 1).unwrap();
        assert_eq!(a.height, b.height);
        assert_ne!(a.height, c.height);
    }

    #[test]
    fn captures_differ_but_repeat() {
        let cfg = small_config();
        let chip = SimChip::new(&cfg, "chip00", 1).unwrap();
        let s1 = CaptureSetup::new(&cfg, clip_seed(chip.seed, "clip0")).unwrap();
        let s2 = CaptureSetup::new(&cfg, clip_seed(chip.seed, "clip1")).unwrap();
        assert_ne!(s1, s2);
        let r = ClipRenderer::new(&cfg, &chip, s1.clone()).unwrap();
        let f = r.frame(2).unwrap();
        assert_eq!(f, ClipRenderer::new(&cfg, &chip, s1).unwrap().frame(2).unwrap());
        assert_eq!(f.t, 2);
        assert!(f.pixels.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn product_template_shows_text() {
        let cfg = small_config();
        let t = product_template(&cfg).unwrap();
        let marking = cfg.surface.marking().unwrap().stroke_mask(96, 96);
        let (mut ink, mut bare) = (vec![], vec![]);
        for (v, m) in t.pixels.iter().zip(marking.iter()) {
            if *m {
                ink.push(*v)
            } else {
                bare.push(*v)
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&ink) > 1.3 * mean(&bare));
    }
}
