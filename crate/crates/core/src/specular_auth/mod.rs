//! Specular-point fingerprints: masking, top-N bright points, robust
//! matching and the zero-ratio gated score.

mod mask;
mod points;
mod score;

pub use mask::{build_mask, build_mask_with, detect_text, digest_dims, MaskParams, RegionMask};
pub use points::{
    count_robust_points, count_robust_points_naive, observed_specular_points, ranked_specular_points, ranked_specular_points_multi,
    robust_matching_score, IndexedFrame, NeighborhoodIndex, SpecularPointSet,
};
pub use score::{
    raw_frame_max_correlation, sample_frames, score_bundle, Fingerprint, ScoreBundle, StandardizedFrame, DEFAULT_FRAME_COUNT,
    DEFAULT_N, DEFAULT_TAU,
};
