use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::surface_sim::{Frame, VideoClip};

use super::mask::RegionMask;
use super::points::{observed_specular_points, robust_matching_score, SpecularPointSet};

/// Default zero-ratio gate.
pub const DEFAULT_TAU: f64 = 0.25;
/// Default number of observed specular points per frame.
pub const DEFAULT_N: usize = 100;
/// Default frames sampled per clip (√K).
pub const DEFAULT_FRAME_COUNT: usize = 10;

/// `count` distinct frame indices out of `len`, uniform, sorted.
pub fn sample_frames(len: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > len {
        return Err(invalid("cannot sample more frames than the clip holds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, len, count).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Enrolled specular points for √K sampled frames of one registered clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    pub chip_id: String,
    pub clip_id: String,
    pub frames: Vec<SpecularPointSet>,
    pub mask_digest: String,
    pub n: usize,
    pub sample_seed: u64,
}

impl Fingerprint {
    pub fn new(
        chip_id: impl Into<String>,
        clip_id: impl Into<String>,
        frames: Vec<SpecularPointSet>,
        mask_digest: impl Into<String>,
        n: usize,
        sample_seed: u64,
    ) -> Result<Self> {
        let first = frames.first().ok_or_else(|| invalid("a fingerprint needs at least one frame"))?;
        let dims = first.dims();
        if frames.iter().any(|f| f.n() != n || f.dims() != dims) {
            return Err(invalid("fingerprint frames disagree on N or frame size"));
        }
        let mask_digest = mask_digest.into();
        if super::mask::digest_dims(&mask_digest).is_some_and(|d| d != dims) {
            return Err(invalid("mask digest does not match the frame size"));
        }
        Ok(Self {
            chip_id: chip_id.into(),
            clip_id: clip_id.into(),
            frames,
            mask_digest,
            n,
            sample_seed,
        })
    }

    /// Samples `count` frames of a registered clip and keeps their N
    /// brightest masked pixels.
    pub fn extract(clip: &VideoClip, mask: &RegionMask, n: usize, count: usize, seed: u64) -> Result<Self> {
        let ids = sample_frames(clip.len(), count, seed)?;
        let frames = ids
            .iter()
            .map(|&i| observed_specular_points(&clip.frames[i], mask, n, i))
            .collect::<Result<Vec<_>>>()?;
        Self::new(clip.chip_id.clone(), clip.clip_id.clone(), frames, mask.digest(), n, seed)
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn compatible_with(&self, other: &Fingerprint) -> bool {
        self.n == other.n && self.mask_digest == other.mask_digest && self.frames[0].dims() == other.frames[0].dims()
    }
}

/// Pairwise scores and the statistics derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBundle {
    pub raw_scores: Vec<f64>,
    pub t_max: f64,
    pub zero_ratio: f64,
    pub t_robust: f64,
    pub tau: f64,
}

impl ScoreBundle {
    pub fn from_scores(raw_scores: Vec<f64>, tau: f64) -> Result<Self> {
        if raw_scores.is_empty() {
            return Err(invalid("no raw scores"));
        }
        if !tau.is_finite() {
            return Err(invalid("tau must be finite"));
        }
        let t_max = raw_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let zeros = raw_scores.iter().filter(|&&s| s == 0.0).count();
        let zero_ratio = zeros as f64 / raw_scores.len() as f64;
        let t_robust = if zero_ratio < tau { t_max } else { 0.0 };
        Ok(Self {
            raw_scores,
            t_max,
            zero_ratio,
            t_robust,
            tau,
        })
    }
}

/// All test × reference frame scores, gated by the zero ratio.
pub fn score_bundle(test: &Fingerprint, reference: &Fingerprint, tau: f64) -> Result<ScoreBundle> {
    if test.n != reference.n {
        return Err(Error::IncompatibleFingerprints(format!("N {} vs {}", test.n, reference.n)));
    }
    if !test.compatible_with(reference) {
        return Err(Error::IncompatibleFingerprints(format!(
            "mask {} vs {}",
            test.mask_digest, reference.mask_digest
        )));
    }
    let mut raw = Vec::with_capacity(test.frames.len() * reference.frames.len());
    for t in &test.frames {
        for r in &reference.frames {
            raw.push(robust_matching_score(t, r)?);
        }
    }
    ScoreBundle::from_scores(raw, tau)
}

/// Masked pixels of a frame scaled to zero mean and unit norm, so that the
/// correlation of two frames is a dot product.
#[derive(Debug, Clone)]
pub struct StandardizedFrame(Vec<f64>);

impl StandardizedFrame {
    pub fn new(f: &Frame, mask: &RegionMask) -> Result<Self> {
        crate::grid::ensure_same_dims(f.dims(), mask.dims())?;
        let mut v: Vec<f64> = f
            .pixels
            .iter()
            .zip(mask.include.iter())
            .filter(|(_, &m)| m)
            .map(|(&x, _)| x)
            .collect();
        let mean = crate::stats::mean(&v);
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateInput("masked background is constant".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(Self(v))
    }

    pub fn correlation(&self, other: &StandardizedFrame) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0)
    }
}

/// Largest masked-background correlation over `count × count` sampled frame
/// pairs. Test and reference samples use independent seeds derived from `seed`.
pub fn raw_frame_max_correlation(
    test: &VideoClip,
    reference: &VideoClip,
    mask: &RegionMask,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let ti = sample_frames(test.len(), count, crate::seed::derive_seed(seed, &[0]))?;
    let ri = sample_frames(reference.len(), count, crate::seed::derive_seed(seed, &[1]))?;
    let ts = ti
        .iter()
        .map(|&i| StandardizedFrame::new(&test.frames[i], mask))
        .collect::<Result<Vec<_>>>()?;
    let rs = ri
        .iter()
        .map(|&i| StandardizedFrame::new(&reference.frames[i], mask))
        .collect::<Result<Vec<_>>>()?;
    let mut best = f64::NEG_INFINITY;
    for t in &ts {
        for r in &rs {
            best = best.max(t.correlation(r));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;
    use alloc::string::ToString;
    use rand::Rng;

    #[test]
    fn sampling_properties() {
        assert_eq!(sample_frames(7, 7, 3).unwrap(), (0..7).collect::<Vec<_>>());
        assert_eq!(sample_frames(100, 10, 42).unwrap(), sample_frames(100, 10, 42).unwrap());
        assert!(sample_frames(5, 6, 0).is_err());
        let s = sample_frames(100, 10, 9).unwrap();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sampling_is_uniform() {
        let mut hits = [0u32; 100];
        let draws = 10_000;
        for seed in 0..draws {
            for i in sample_frames(100, 10, seed).unwrap() {
                hits[i] += 1;
            }
        }
        let (p, n) = (0.1, draws as f64);
        let sd = libm::sqrt(n * p * (1.0 - p));
        for h in hits {
            assert!((h as f64 - n * p).abs() < 5.0 * sd, "{h}");
        }
    }

    fn random_fp(seed: u64, frames: usize, n: usize) -> Fingerprint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets = (0..frames)
            .map(|i| {
                let mut pts = alloc::collections::BTreeSet::new();
                while pts.len() < n {
                    pts.insert((rng.random_range(0..64), rng.random_range(0..64)));
                }
                SpecularPointSet::new(pts.into_iter().collect(), i, (64, 64)).unwrap()
            })
            .collect();
        Fingerprint::new("c", "k", sets, "64x64:0000000000000000", n, seed).unwrap()
    }

    #[test]
    fn self_comparison() {
        let fp = random_fp(1, 10, 100);
        let b = score_bundle(&fp, &fp, DEFAULT_TAU).unwrap();
        assert_eq!(b.raw_scores.len(), 100);
        assert_eq!(b.t_max, 100.0);
        assert!(b.zero_ratio < 0.25);
        assert_eq!(b.t_robust, 100.0);
    }

    #[test]
    fn constructed_bundles() {
        let b = ScoreBundle::from_scores(alloc::vec![0.0; 9], DEFAULT_TAU).unwrap();
        assert_eq!((b.t_max, b.zero_ratio, b.t_robust), (0.0, 1.0, 0.0));
        let mut raw = alloc::vec![0.0; 30];
        raw.extend((0..70).map(|i| 1.0 + (i % 12) as f64));
        let b = ScoreBundle::from_scores(raw, 0.25).unwrap();
        assert_eq!(b.t_max, 12.0);
        assert_eq!(b.zero_ratio, 0.3);
        assert_eq!(b.t_robust, 0.0);
    }

    #[test]
    fn incompatible_fingerprints() {
        let a = random_fp(1, 3, 10);
        let b = random_fp(2, 3, 11);
        assert!(matches!(score_bundle(&a, &b, 0.25), Err(Error::IncompatibleFingerprints(_))));
        let mut c = random_fp(3, 3, 10);
        c.mask_digest = "64x64:1111111111111111".into();
        assert!(matches!(score_bundle(&a, &c, 0.25), Err(Error::IncompatibleFingerprints(_))));
    }

    #[test]
    fn fingerprint_validation() {
        let s = SpecularPointSet::new(alloc::vec![(1, 1)], 0, (8, 8)).unwrap();
        assert!(Fingerprint::new("a", "b", alloc::vec![], "8x8:00", 1, 0).is_err());
        assert!(Fingerprint::new("a", "b", alloc::vec![s.clone()], "8x8:00", 2, 0).is_err());
        assert!(Fingerprint::new("a", "b", alloc::vec![s.clone()], "9x8:00", 1, 0).is_err());
        assert!(Fingerprint::new("a", "b", alloc::vec![s], "8x8:00", 1, 0).is_ok());
    }

    fn noise_clip(seed: u64, frames: usize, dims: (usize, usize)) -> VideoClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = (0..frames)
            .map(|_| Frame::from_pixels(Grid::from_fn(dims.0, dims.1, |_, _| rng.random::<f64>())).unwrap())
            .collect();
        VideoClip::new(fs, "c", seed.to_string()).unwrap()
    }

    #[test]
    fn raw_correlation_self_and_noise() {
        let mask = RegionMask::interior(48, 48, 4).unwrap();
        let a = noise_clip(1, 20, (48, 48));
        let same = raw_frame_max_correlation(&a, &a, &mask, 20, 5).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
        let bound = 5.0 / libm::sqrt(mask.count() as f64);
        let mut below = 0;
        for k in 0..100 {
            let b = noise_clip(100 + k, 10, (48, 48));
            let c = noise_clip(500 + k, 10, (48, 48));
            if raw_frame_max_correlation(&b, &c, &mask, 10, k).unwrap() < bound {
                below += 1;
            }
        }
        assert!(below >= 99, "{below}");
    }

    #[test]
    fn constant_background_is_degenerate() {
        let mask = RegionMask::interior(16, 16, 2).unwrap();
        let clip = VideoClip::new(alloc::vec![Frame::from_pixels(Grid::new(16, 16, 3.0)).unwrap()], "c", "k").unwrap();
        assert!(matches!(
            raw_frame_max_correlation(&clip, &clip, &mask, 1, 0),
            Err(Error::DegenerateInput(_))
        ));
    }

    proptest! {
        #[test]
        fn gating_law(raw in proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..100.0], 1..120), tau in 0.0f64..1.0) {
            let b = ScoreBundle::from_scores(raw.clone(), tau).unwrap();
            prop_assert_eq!(b.t_max, raw.iter().copied().fold(f64::MIN, f64::max));
            let zeros = raw.iter().filter(|&&x| x == 0.0).count();
            prop_assert_eq!(b.zero_ratio, zeros as f64 / raw.len() as f64);
            prop_assert_eq!(b.t_robust, if b.zero_ratio < tau { b.t_max } else { 0.0 });
            prop_assert!(0.0 <= b.t_robust && b.t_robust <= b.t_max);
        }
    }
}
