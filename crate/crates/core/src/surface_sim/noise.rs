use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::video::Frame;
use crate::error::{invalid, Result};

/// Additive Gaussian sensor noise, clipped at zero.
pub fn add_capture_noise(f: &Frame, sigma: f64, seed: u64) -> Result<Frame> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("noise sigma must be finite and non-negative"));
    }
    if sigma == 0.0 {
        return Ok(f.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| invalid("bad noise sigma"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = f.clone();
    for v in out.pixels.as_mut_slice() {
        *v = (*v + normal.sample(&mut rng)).max(0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn zero_sigma_is_identity() {
        let f = Frame::from_pixels(Grid::from_fn(16, 16, |r, c| (r * c) as f64)).unwrap();
        assert_eq!(add_capture_noise(&f, 0.0, 5).unwrap(), f);
    }

    #[test]
    fn noise_is_zero_mean() {
        let sigma = 0.5;
        let f = Frame::from_pixels(Grid::new(1000, 1000, 100.0)).unwrap();
        let g = add_capture_noise(&f, sigma, 42).unwrap();
        let mean = g.pixels.iter().map(|v| v - 100.0).sum::<f64>() / 1.0e6;
        assert!(mean.abs() < 3.0 * sigma / 1000.0, "mean {mean}");
        assert!(add_capture_noise(&f, -1.0, 0).is_err());
    }

    #[test]
    fn clipped_at_zero() {
        let f = Frame::from_pixels(Grid::new(32, 32, 0.0)).unwrap();
        let g = add_capture_noise(&f, 1.0, 1).unwrap();
        assert!(g.pixels.iter().all(|&v| v >= 0.0));
        assert!(g.pixels.iter().any(|&v| v > 0.0));
    }
}
