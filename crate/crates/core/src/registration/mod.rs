//! Image registration: FFT phase correlation for translation, rotation and
//! scale, followed by an NCC direct-search refinement.
//!
//! A transform `t` relates two images by `b ≈ warp(a, t)`, i.e.
//! `b(q) = a(t⁻¹ q)` in centred pixel coordinates.

mod phase;
#[cfg(test)]
pub(crate) mod testutil;
mod refine;
mod transform;
mod warp;

pub use phase::{phase_correlate_similarity, phase_correlate_similarity_with, phase_correlate_translation, PhaseParams, TranslationEstimate};
pub use refine::{refine_alignment, refine_alignment_with, RefineParams, Refinement};
pub use transform::{SimilarityTransform, SCALE_RANGE};
pub use warp::{warp, Warped};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, Grid};
use crate::surface_sim::{Frame, VideoClip};

/// A transform with `frame ≈ warp(template, transform)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub transform: SimilarityTransform,
    /// Phase-correlation peak in `[0, 1]`.
    pub peak_response: f64,
    pub refined: bool,
}

/// Estimates how a frame sits relative to a template.
pub trait TransformEstimator {
    fn estimate(&self, frame: &Frame, template: &Frame) -> Result<AlignmentResult>;
}

/// Log-polar phase correlation, then two-pass NCC refinement.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseRefineEstimator {
    pub phase: PhaseParams,
    pub refine: RefineParams,
    /// Register gradient magnitudes instead of intensities, for captures
    /// whose shading differs from the template's.
    pub gradient_magnitude: bool,
}

impl TransformEstimator for PhaseRefineEstimator {
    fn estimate(&self, frame: &Frame, template: &Frame) -> Result<AlignmentResult> {
        ensure_same_dims(template.dims(), frame.dims())?;
        let (a, b) = if self.gradient_magnitude {
            (gradient_magnitude(&template.pixels), gradient_magnitude(&frame.pixels))
        } else {
            (template.pixels.clone(), frame.pixels.clone())
        };
        let coarse = phase_correlate_similarity_with(&a, &b, &self.phase)?;
        let fine = refine_alignment_with(&b, &a, &coarse.transform, &self.refine)?;
        if !fine.transform.scale_acceptable() {
            return Err(Error::AlignmentFailed { peak: coarse.peak_response });
        }
        Ok(AlignmentResult {
            transform: fine.transform,
            peak_response: coarse.peak_response,
            refined: fine.refined,
        })
    }
}

/// Sobel gradient magnitude with edge clamping.
pub fn gradient_magnitude(g: &Grid<f64>) -> Grid<f64> {
    let (rows, cols) = g.dims();
    let at = |r: isize, c: isize| g[(r.clamp(0, rows as isize - 1) as usize, c.clamp(0, cols as isize - 1) as usize)];
    Grid::from_fn(rows, cols, |r, c| {
        let (r, c) = (r as isize, c as isize);
        let gx = at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1) - at(r - 1, c - 1) - 2.0 * at(r, c - 1) - at(r + 1, c - 1);
        let gy = at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1) - at(r - 1, c - 1) - 2.0 * at(r - 1, c) - at(r - 1, c + 1);
        libm::sqrt(gx * gx + gy * gy)
    })
}

/// A clip resampled onto its template grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedClip {
    pub clip: VideoClip,
    pub alignment: AlignmentResult,
    /// Template pixels covered by every aligned frame.
    pub valid: Grid<bool>,
}

/// Streams frames through one alignment estimated from the first frame.
pub struct ClipAligner<'a, E: TransformEstimator + ?Sized> {
    estimator: &'a E,
    template: &'a Frame,
    alignment: Option<AlignmentResult>,
    valid: Option<Grid<bool>>,
}

impl<'a, E: TransformEstimator + ?Sized> ClipAligner<'a, E> {
    pub fn new(estimator: &'a E, template: &'a Frame) -> Self {
        Self {
            estimator,
            template,
            alignment: None,
            valid: None,
        }
    }

    /// Aligns the next frame; the first call fixes the transform.
    pub fn push(&mut self, frame: &Frame) -> Result<Warped> {
        let alignment = match self.alignment {
            Some(a) => a,
            None => {
                let a = self.estimator.estimate(frame, self.template)?;
                self.alignment = Some(a);
                a
            }
        };
        let w = warp(frame, &alignment.transform.inverse(), self.template.dims());
        match self.valid.as_mut() {
            None => self.valid = Some(w.valid.clone()),
            Some(v) => {
                for (a, b) in v.as_mut_slice().iter_mut().zip(w.valid.iter()) {
                    *a &= *b;
                }
            }
        }
        Ok(w)
    }

    pub fn alignment(&self) -> Option<AlignmentResult> {
        self.alignment
    }

    pub fn valid(&self) -> Option<&Grid<bool>> {
        self.valid.as_ref()
    }
}

/// Aligns every frame of a clip with one transform estimated from frame 0.
pub fn align_clip(clip: &VideoClip, template: &Frame) -> Result<AlignedClip> {
    align_clip_with(clip, template, &PhaseRefineEstimator::default())
}

pub fn align_clip_with<E: TransformEstimator + ?Sized>(clip: &VideoClip, template: &Frame, estimator: &E) -> Result<AlignedClip> {
    if clip.frames.is_empty() {
        return Err(crate::error::invalid("cannot align an empty clip"));
    }
    let mut aligner = ClipAligner::new(estimator, template);
    let frames = clip
        .frames
        .iter()
        .map(|f| aligner.push(f).map(|w| w.frame))
        .collect::<Result<Vec<_>>>()?;
    let alignment = aligner.alignment().ok_or_else(|| crate::error::invalid("no frames aligned"))?;
    let valid = aligner.valid().cloned().unwrap_or_else(|| Grid::new(0, 0, false));
    Ok(AlignedClip {
        clip: VideoClip::new(frames, clip.chip_id.clone(), clip.clip_id.clone())?,
        alignment,
        valid,
    })
}
