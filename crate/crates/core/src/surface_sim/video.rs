use alloc::string::String;
use alloc::vec::Vec;

use super::render::{render_point_light_geometry, CameraPose, LightPose, ReflectionParams, SurfaceGeometry};
use super::surface::HeightMap;
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;

/// A registered grayscale capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub pixels: Grid<f64>,
    pub light: LightPose,
    pub t: usize,
}

impl Frame {
    pub fn new(pixels: Grid<f64>, light: LightPose, t: usize) -> Result<Self> {
        if pixels.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("frame intensities must be finite and non-negative"));
        }
        Ok(Self { pixels, light, t })
    }

    /// Frame built from arbitrary intensities with an overhead placeholder light.
    pub fn from_pixels(pixels: Grid<f64>) -> Result<Self> {
        Self::new(
            pixels,
            LightPose {
                o: [0.0, 0.0, 1.0],
                kind: super::render::LightKind::Point,
            },
            0,
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dims()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub frames: Vec<Frame>,
    pub chip_id: String,
    pub clip_id: String,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>, chip_id: impl Into<String>, clip_id: impl Into<String>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| invalid("a clip needs at least one frame"))?;
        let dims = first.dims();
        if let Some(bad) = frames.iter().find(|f| f.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: bad.dims(),
            });
        }
        Ok(Self {
            frames,
            chip_id: chip_id.into(),
            clip_id: clip_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// Light position on a camera-clip trajectory, in spherical coordinates
/// around the chip centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightWaypoint {
    pub polar_deg: f64,
    pub azimuth_deg: f64,
    pub distance_mm: f64,
}

impl LightWaypoint {
    pub fn pose(&self) -> Result<LightPose> {
        LightPose::spherical(self.polar_deg, self.azimuth_deg, self.distance_mm)
    }
}

/// Piecewise-linear path through waypoints, parametrized by `s ∈ [0, 1]`
/// with the waypoints spread evenly.
#[derive(Debug, Clone, PartialEq)]
pub struct LightTrajectory {
    pub waypoints: Vec<LightWaypoint>,
}

impl Default for LightTrajectory {
    /// Lamp approaching the chip from the upper-left corner, polar angle 45° → 30°.
    fn default() -> Self {
        Self::sweep(45.0, 30.0, 225.0, 150.0, 100.0)
    }
}

impl LightTrajectory {
    pub fn sweep(polar_from: f64, polar_to: f64, azimuth: f64, dist_from: f64, dist_to: f64) -> Self {
        Self {
            waypoints: alloc::vec![
                LightWaypoint {
                    polar_deg: polar_from,
                    azimuth_deg: azimuth,
                    distance_mm: dist_from,
                },
                LightWaypoint {
                    polar_deg: polar_to,
                    azimuth_deg: azimuth,
                    distance_mm: dist_to,
                },
            ],
        }
    }

    pub fn at(&self, s: f64) -> Result<LightWaypoint> {
        let w = &self.waypoints;
        match w.len() {
            0 => Err(invalid("light trajectory has no waypoints")),
            1 => Ok(w[0]),
            n => {
                let x = s.clamp(0.0, 1.0) * (n - 1) as f64;
                let i = (x as usize).min(n - 2);
                let f = x - i as f64;
                let lerp = |a: f64, b: f64| a + (b - a) * f;
                Ok(LightWaypoint {
                    polar_deg: lerp(w[i].polar_deg, w[i + 1].polar_deg),
                    azimuth_deg: lerp(w[i].azimuth_deg, w[i + 1].azimuth_deg),
                    distance_mm: lerp(w[i].distance_mm, w[i + 1].distance_mm),
                })
            }
        }
    }

    /// Waypoint of frame `t` in an `n_frames` clip.
    pub fn frame_waypoint(&self, t: usize, n_frames: usize) -> Result<LightWaypoint> {
        let s = if n_frames > 1 { t as f64 / (n_frames - 1) as f64 } else { 0.0 };
        self.at(s)
    }
}

/// Renders a clip with the light moving along `trajectory`.
pub fn render_video(
    h: &HeightMap,
    p: &ReflectionParams,
    cam: &CameraPose,
    trajectory: &LightTrajectory,
    n_frames: usize,
) -> Result<VideoClip> {
    if n_frames == 0 {
        return Err(invalid("a clip needs at least one frame"));
    }
    if trajectory.waypoints.is_empty() {
        return Err(invalid("light trajectory has no waypoints"));
    }
    let geo = SurfaceGeometry::new(h);
    let frames = (0..n_frames)
        .map(|t| {
            let pose = trajectory.frame_waypoint(t, n_frames)?.pose()?;
            render_point_light_geometry(&geo, p, &pose, cam, t)
        })
        .collect::<Result<Vec<_>>>()?;
    VideoClip::new(frames, String::new(), String::new())
}
