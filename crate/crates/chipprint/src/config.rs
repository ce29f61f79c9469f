//! Pipeline configuration, read from TOML with one table per stage.

use std::path::Path;

use chipprint_core::evaluation::{PdfFamily, StatisticKind, DEFAULT_REPEATS};
use chipprint_core::registration::{PhaseParams, PhaseRefineEstimator, RefineParams};
use chipprint_core::specular_auth::{MaskParams, DEFAULT_FRAME_COUNT, DEFAULT_N, DEFAULT_TAU};
use chipprint_core::surface_sim::{EdgeGlare, LightTrajectory, ReflectionParams, RoughnessSpectrum, TextMarking};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub surface: SurfaceConfig,
    pub render: RenderConfig,
    pub capture: CaptureConfig,
    pub registration: RegistrationConfig,
    pub mask: MaskConfig,
    pub specular: SpecularConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Gaussian,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub rows: usize,
    pub cols: usize,
    pub pitch_um: f64,
    pub spectrum: SpectrumKind,
    pub correlation_length_px: f64,
    pub rms_um: f64,
    /// Only used by the power-law spectrum.
    pub exponent: f64,
    pub text: bool,
    pub text_depth_um: f64,
    pub ink_gain: f64,
    pub raster_pitch_px: usize,
    pub raster_gain: f64,
    pub floor_smoothing: f64,
    pub layout_seed: u64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            rows: 512,
            cols: 512,
            pitch_um: 43.57,
            spectrum: SpectrumKind::Gaussian,
            correlation_length_px: 4.0,
            rms_um: 12.0,
            exponent: 3.0,
            text: true,
            text_depth_um: 12.0,
            ink_gain: 1.8,
            raster_pitch_px: 3,
            raster_gain: 1.5,
            floor_smoothing: 0.9,
            layout_seed: 2024,
        }
    }
}

impl SurfaceConfig {
    pub fn spectrum(&self) -> RoughnessSpectrum {
        match self.spectrum {
            SpectrumKind::Gaussian => RoughnessSpectrum::Gaussian {
                correlation_length_px: self.correlation_length_px,
                rms_um: self.rms_um,
            },
            SpectrumKind::PowerLaw => RoughnessSpectrum::PowerLaw {
                correlation_length_px: self.correlation_length_px,
                exponent: self.exponent,
                rms_um: self.rms_um,
            },
        }
    }

    pub fn marking(&self) -> Option<TextMarking> {
        self.text.then(|| {
            let mut m = TextMarking::default_for(self.rows, self.cols, self.layout_seed);
            m.depth_um = self.text_depth_um;
            m.ink_gain = self.ink_gain;
            m.raster_pitch_px = self.raster_pitch_px;
            m.raster_gain = self.raster_gain;
            m.floor_smoothing = self.floor_smoothing;
            m
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub w_d: f64,
    pub w_s: f64,
    /// Gloss exponent. Glossier than the library default, so highlights
    /// wander as the lamp moves along its path.
    pub k_e: f64,
    pub l: f64,
    pub camera_height_mm: f64,
    pub polar_from_deg: f64,
    pub polar_to_deg: f64,
    pub azimuth_deg: f64,
    pub distance_from_mm: f64,
    pub distance_to_mm: f64,
    pub n_frames: usize,
    pub scanner_samples: usize,
    /// Lamp offset from the scan line and lamp height, in mm.
    pub scanner_offset_mm: f64,
    pub scanner_height_mm: f64,
    pub scanner_half_length_mm: f64,
    pub edge_glare: bool,
    pub glare: GlareConfig,
}

impl Default for RenderConfig {
    fn default() -> Self {
        let p = ReflectionParams::default();
        Self {
            w_d: p.w_d,
            w_s: p.w_s,
            k_e: 600.0,
            l: p.l,
            camera_height_mm: 200.0,
            polar_from_deg: 45.0,
            polar_to_deg: 30.0,
            azimuth_deg: 225.0,
            distance_from_mm: 150.0,
            distance_to_mm: 100.0,
            n_frames: 100,
            scanner_samples: 24,
            scanner_offset_mm: 10.0,
            scanner_height_mm: 10.0,
            scanner_half_length_mm: 100.0,
            edge_glare: true,
            glare: GlareConfig::default(),
        }
    }
}

impl RenderConfig {
    pub fn reflection(&self) -> ReflectionParams {
        ReflectionParams {
            w_d: self.w_d,
            w_s: self.w_s,
            k_e: self.k_e,
            l: self.l,
        }
    }

    pub fn trajectory(&self) -> LightTrajectory {
        LightTrajectory::sweep(
            self.polar_from_deg,
            self.polar_to_deg,
            self.azimuth_deg,
            self.distance_from_mm,
            self.distance_to_mm,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlareConfig {
    pub strength: f64,
    pub corner_radius_px: f64,
    pub rim_width_px: f64,
    pub rim_slope: f64,
    pub band_sigma_px: f64,
    pub facing_exponent: f64,
}

impl Default for GlareConfig {
    fn default() -> Self {
        let g = EdgeGlare::default();
        Self {
            strength: g.strength,
            corner_radius_px: g.corner_radius_px,
            rim_width_px: g.rim_width_px,
            rim_slope: g.rim_slope,
            band_sigma_px: g.band_sigma_px,
            facing_exponent: g.facing_exponent,
        }
    }
}

impl GlareConfig {
    pub fn params(&self) -> EdgeGlare {
        EdgeGlare {
            strength: self.strength,
            corner_radius_px: self.corner_radius_px,
            rim_width_px: self.rim_width_px,
            rim_slope: self.rim_slope,
            band_sigma_px: self.band_sigma_px,
            facing_exponent: self.facing_exponent,
        }
    }
}

/// Per-clip variation between captures of the same chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureConfig {
    /// Gaussian read noise as a fraction of each frame's peak intensity.
    pub noise_fraction: f64,
    pub polar_jitter_deg: f64,
    pub azimuth_jitter_deg: f64,
    pub distance_jitter_fraction: f64,
    /// Bounds of the random placement of the chip in the camera frame.
    pub max_rotation_deg: f64,
    pub max_scale_change: f64,
    pub max_translation_px: f64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            noise_fraction: 0.01,
            polar_jitter_deg: 1.0,
            azimuth_jitter_deg: 2.0,
            distance_jitter_fraction: 0.03,
            max_rotation_deg: 2.0,
            max_scale_change: 0.01,
            max_translation_px: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub min_peak: f64,
    pub angles: usize,
    pub radii: usize,
    pub min_radius: f64,
    pub iterations: usize,
    pub refine_blur_sigma: f64,
    pub refine_scale_radius: f64,
    pub refine_rotation_radius_deg: f64,
    pub refine_translation_radius_px: f64,
    pub refine_max_evals: usize,
    pub gradient_magnitude: bool,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        let ph = PhaseParams::default();
        let rf = RefineParams::default();
        Self {
            min_peak: ph.min_peak,
            angles: ph.angles,
            radii: ph.radii,
            min_radius: ph.min_radius,
            iterations: ph.iterations,
            refine_blur_sigma: rf.blur_sigma,
            refine_scale_radius: rf.scale_radius,
            refine_rotation_radius_deg: rf.rotation_radius.to_degrees(),
            refine_translation_radius_px: rf.translation_radius,
            refine_max_evals: rf.max_evals,
            gradient_magnitude: PhaseRefineEstimator::default().gradient_magnitude,
        }
    }
}

impl RegistrationConfig {
    pub fn estimator(&self) -> PhaseRefineEstimator {
        PhaseRefineEstimator {
            phase: PhaseParams {
                min_peak: self.min_peak,
                angles: self.angles,
                radii: self.radii,
                min_radius: self.min_radius,
                iterations: self.iterations,
            },
            refine: RefineParams {
                blur_sigma: self.refine_blur_sigma,
                scale_radius: self.refine_scale_radius,
                rotation_radius: self.refine_rotation_radius_deg.to_radians(),
                translation_radius: self.refine_translation_radius_px,
                max_evals: self.refine_max_evals,
                ..RefineParams::default()
            },
            gradient_magnitude: self.gradient_magnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub edge_margin_px: usize,
    pub detailed: bool,
    pub exclude_text: bool,
    pub text_k: f64,
    pub text_pad_px: usize,
    pub smooth_radius: usize,
}

impl Default for MaskConfig {
    fn default() -> Self {
        let m = MaskParams::default();
        Self {
            edge_margin_px: m.edge_margin_px,
            detailed: m.detailed,
            exclude_text: m.exclude_text,
            text_k: m.text_k,
            text_pad_px: m.text_pad_px,
            smooth_radius: m.smooth_radius,
        }
    }
}

impl MaskConfig {
    pub fn params(&self) -> MaskParams {
        MaskParams {
            edge_margin_px: self.edge_margin_px,
            detailed: self.detailed,
            exclude_text: self.exclude_text,
            text_k: self.text_k,
            text_pad_px: self.text_pad_px,
            smooth_radius: self.smooth_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecularConfig {
    pub n_points: usize,
    pub frame_count: usize,
    pub tau: f64,
    /// `verify` accepts when `T^r` exceeds this.
    pub accept_threshold: f64,
}

impl Default for SpecularConfig {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_N,
            frame_count: DEFAULT_FRAME_COUNT,
            tau: DEFAULT_TAU,
            accept_threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub repeats: usize,
    pub seed: u64,
    pub statistics: Vec<String>,
    pub families: Vec<String>,
    pub frame_sweep: Vec<usize>,
    pub point_sweep: Vec<usize>,
    pub seed_sweep: Vec<u64>,
    /// Binning factor applied to frames before the raw-correlation baseline.
    pub maxcorr_bin: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            repeats: DEFAULT_REPEATS,
            seed: 1,
            statistics: vec!["trobust".into(), "tmax".into(), "srm".into()],
            families: vec!["laplace".into(), "gaussian".into()],
            frame_sweep: vec![1, 2, 5, 10, 15, 20],
            point_sweep: vec![10, 25, 50, 100, 200],
            seed_sweep: vec![1, 2, 3, 4, 5],
            maxcorr_bin: 4,
        }
    }
}

impl EvalConfig {
    pub fn statistic_kinds(&self) -> AppResult<Vec<StatisticKind>> {
        self.statistics
            .iter()
            .map(|s| s.parse().map_err(|_| AppError::Config(format!("unknown statistic {s:?}"))))
            .collect()
    }

    pub fn pdf_families(&self) -> AppResult<Vec<PdfFamily>> {
        self.families
            .iter()
            .map(|s| {
                PdfFamily::ALL
                    .into_iter()
                    .find(|f| f.as_str() == s)
                    .ok_or_else(|| AppError::Config(format!("unknown family {s:?}")))
            })
            .collect()
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> AppResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Checks each section against the invariants of the stage that uses it.
    pub fn validate(&self) -> AppResult<()> {
        let bad = |m: &str| Err(AppError::Config(m.to_string()));
        let s = &self.surface;
        if s.rows < 64 || s.cols < 64 {
            return bad("surface must be at least 64x64");
        }
        if !(s.pitch_um > 0.0 && s.correlation_length_px > 0.0 && s.rms_um >= 0.0) {
            return bad("surface pitch, correlation length and rms must be positive");
        }
        let r = &self.render;
        self.render.reflection().validate().map_err(|e| AppError::Config(e.to_string()))?;
        if r.n_frames == 0 || r.scanner_samples < 6 {
            return bad("render needs n_frames >= 1 and scanner_samples >= 6");
        }
        r.glare.params().validate().map_err(|e| AppError::Config(e.to_string()))?;
        let c = &self.capture;
        if [c.noise_fraction, c.polar_jitter_deg, c.azimuth_jitter_deg, c.distance_jitter_fraction, c.max_rotation_deg, c.max_scale_change, c.max_translation_px]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return bad("capture variations must be non-negative");
        }
        if c.max_scale_change >= 0.5 {
            return bad("capture scale change must stay below 0.5");
        }
        let sp = &self.specular;
        if sp.n_points == 0 || sp.frame_count == 0 || !(0.0..=1.0).contains(&sp.tau) {
            return bad("specular needs n_points >= 1, frame_count >= 1 and tau in [0, 1]");
        }
        if sp.frame_count > r.n_frames {
            return bad("frame_count exceeds n_frames");
        }
        if self.eval.repeats == 0 || self.eval.maxcorr_bin == 0 {
            return bad("eval repeats and maxcorr_bin must be positive");
        }
        self.eval.statistic_kinds()?;
        self.eval.pdf_families()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn partial_tables_keep_defaults() {
        let c = PipelineConfig::from_toml("[specular]\nn_points = 50\n[mask]\ndetailed = false\n").unwrap();
        assert_eq!(c.specular.n_points, 50);
        assert_eq!(c.specular.frame_count, DEFAULT_FRAME_COUNT);
        assert!(!c.mask.detailed);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(PipelineConfig::from_toml("[specular]\nn = 5\n"), Err(AppError::Config(_))));
        assert!(matches!(PipelineConfig::from_toml("[nope]\n"), Err(AppError::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PipelineConfig::from_toml("[specular]\ntau = 2.0\n").is_err());
        assert!(PipelineConfig::from_toml("[eval]\nstatistics = [\"bogus\"]\n").is_err());
        assert!(PipelineConfig::from_toml("[render]\nn_frames = 5\n").is_err());
    }
}
