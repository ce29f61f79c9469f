use super::{warp, SimilarityTransform};
use crate::grid::Grid;
use crate::surface_sim::{generate_surface, Frame, RoughnessSpectrum};

fn texture(n: usize, corr: f64, seed: u64) -> Frame {
    let h = generate_surface(
        n,
        n,
        1.0,
        RoughnessSpectrum::Gaussian {
            correlation_length_px: corr,
            rms_um: 1.0,
        },
        seed,
    )
    .unwrap();
    Frame::from_pixels(h.heights().map(|v| 100.0 + 10.0 * v)).unwrap()
}

fn crop(f: &Frame, n: usize) -> Frame {
    let off = (f.dims().0 - n) / 2;
    Frame::from_pixels(Grid::from_fn(n, n, |r, c| f.pixels[(r + off, c + off)])).unwrap()
}

/// `(a, b)` of size `n` with `b ≈ warp(a, t)` and no empty border: both are
/// centre crops of a surface twice as large.
pub(crate) fn pair(n: usize, t: &SimilarityTransform, seed: u64) -> (Frame, Frame) {
    assert!(n % 2 == 0);
    let big = texture(2 * n, 5.0, seed);
    let moved = warp(&big, t, big.dims()).frame;
    (crop(&big, n), crop(&moved, n))
}

/// Nearly white random frame.
pub(crate) fn rough_frame(n: usize, seed: u64) -> Frame {
    texture(n, 1.5, seed)
}
