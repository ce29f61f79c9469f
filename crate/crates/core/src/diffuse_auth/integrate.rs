use num_complex::Complex64;

use super::NormMap;
use crate::error::Result;
use crate::fft::{Direction, Fft2d};
use crate::grid::Grid;
use crate::surface_sim::HeightMap;

/// Lower bound on `n_z` when turning projected normals into slopes.
const MIN_NZ: f64 = 0.2;

/// Least-squares height from the gradient field implied by a norm map.
///
/// The mean slope is integrated analytically as a plane. The remaining
/// gradients are mirror-extended so the periodic solve sees no seams, then
/// divided by the spectrum of the central-difference operator. The result
/// has zero mean.
pub fn reconstruct_height(nm: &NormMap) -> Result<HeightMap> {
    let (rows, cols) = nm.dims();
    let pitch = nm.pitch;
    let slope = |x: f64, y: f64, v: f64| {
        let nz = libm::sqrt((1.0 - x * x - y * y).max(0.0)).max(MIN_NZ);
        -v / nz
    };
    let p = Grid::from_fn(rows, cols, |r, c| slope(nm.nx[(r, c)], nm.ny[(r, c)], nm.nx[(r, c)]));
    let q = Grid::from_fn(rows, cols, |r, c| slope(nm.nx[(r, c)], nm.ny[(r, c)], nm.ny[(r, c)]));
    let n = (rows * cols) as f64;
    let pm = p.iter().sum::<f64>() / n;
    let qm = q.iter().sum::<f64>() / n;

    let (er, ec) = (2 * rows, 2 * cols);
    let extend = |g: &Grid<f64>, mean: f64, odd_x: bool| {
        Grid::from_fn(er, ec, |r, c| {
            let (sr, flip_r) = if r < rows { (r, false) } else { (er - 1 - r, true) };
            let (sc, flip_c) = if c < cols { (c, false) } else { (ec - 1 - c, true) };
            let v = g[(sr, sc)] - mean;
            let flipped = if odd_x { flip_c } else { flip_r };
            Complex64::new(if flipped { -v } else { v }, 0.0)
        })
    };
    let mut ps = extend(&p, pm, true);
    let mut qs = extend(&q, qm, false);
    let plan = Fft2d::new(er, ec);
    plan.process(&mut ps, Direction::Forward);
    plan.process(&mut qs, Direction::Forward);

    let tau = core::f64::consts::TAU;
    let mut hs = Grid::new(er, ec, Complex64::new(0.0, 0.0));
    for r in 0..er {
        let sy = libm::sin(tau * r as f64 / er as f64) / pitch;
        for c in 0..ec {
            let sx = libm::sin(tau * c as f64 / ec as f64) / pitch;
            let den = sx * sx + sy * sy;
            if den * pitch * pitch < 1e-12 {
                continue;
            }
            // conj(i·s) = -i·s
            let num = ps[(r, c)] * Complex64::new(0.0, -sx) + qs[(r, c)] * Complex64::new(0.0, -sy);
            hs[(r, c)] = num / den;
        }
    }
    plan.process(&mut hs, Direction::Inverse);

    let (cr, cc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let mut h = Grid::from_fn(rows, cols, |r, c| hs[(r, c)].re);
    let mean = h.iter().sum::<f64>() / n;
    for r in 0..rows {
        for c in 0..cols {
            h[(r, c)] += pm * (c as f64 - cc) * pitch + qm * (r as f64 - cr) * pitch - mean;
        }
    }
    HeightMap::new(h, pitch, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffuse_auth::NormSource;
    use crate::surface_sim::{generate_surface, normals_from_height, RoughnessSpectrum};

    #[test]
    fn plane_is_recovered() {
        let pitch = 5.0;
        let h = HeightMap::new(Grid::from_fn(32, 40, |r, c| 0.3 * c as f64 * pitch - 0.2 * r as f64 * pitch + 7.0), pitch, 0).unwrap();
        let rec = reconstruct_height(&normals_from_height(&h)).unwrap();
        let mean = h.heights().iter().sum::<f64>() / h.heights().len() as f64;
        let range = 0.3 * 39.0 * pitch + 0.2 * 31.0 * pitch;
        for (a, b) in rec.heights().iter().zip(h.heights().iter()) {
            assert!((a - (b - mean)).abs() < 1e-6 * range);
        }
    }

    #[test]
    fn zero_map_gives_zero_height() {
        let z = NormMap::new(Grid::new(16, 16, 0.0), Grid::new(16, 16, 0.0), 2.0, NormSource::DerivedFromHeight).unwrap();
        assert!(reconstruct_height(&z).unwrap().heights().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip_of_random_surface() {
        for seed in 0..3 {
            let h = generate_surface(
                96,
                80,
                5.37,
                RoughnessSpectrum::Gaussian {
                    correlation_length_px: 6.0,
                    rms_um: 1.0,
                },
                seed,
            )
            .unwrap();
            let rec = reconstruct_height(&normals_from_height(&h)).unwrap();
            let r = crate::stats::correlation(rec.heights().as_slice(), h.heights().as_slice()).unwrap();
            assert!(r > 0.99, "round-trip correlation {r}");
        }
    }
}
