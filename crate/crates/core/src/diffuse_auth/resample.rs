use alloc::vec::Vec;

use super::NormMap;
use crate::error::{invalid, Result};
use crate::grid::Grid;

/// Resamples a grid from one pixel pitch to another.
///
/// Upsampling uses Keys bicubic interpolation (a = −0.5) with edge clamping;
/// downsampling averages the source area under each output pixel.
pub fn resample(g: &Grid<f64>, from_pitch: f64, to_pitch: f64) -> Result<Grid<f64>> {
    if !(from_pitch > 0.0 && to_pitch > 0.0) || !from_pitch.is_finite() || !to_pitch.is_finite() {
        return Err(invalid("pitches must be positive"));
    }
    let ratio = to_pitch / from_pitch;
    let (rows, cols) = g.dims();
    let out_rows = libm::round(rows as f64 / ratio) as usize;
    let out_cols = libm::round(cols as f64 / ratio) as usize;
    if out_rows == 0 || out_cols == 0 {
        return Err(invalid("resampled grid would be empty"));
    }
    // columns first, then rows
    let mut tmp = Grid::new(rows, out_cols, 0.0);
    for r in 0..rows {
        let line = resample_line(g.row(r), out_cols, ratio);
        tmp.row_mut(r).copy_from_slice(&line);
    }
    let mut out = Grid::new(out_rows, out_cols, 0.0);
    let mut col = Vec::with_capacity(rows);
    for c in 0..out_cols {
        col.clear();
        col.extend((0..rows).map(|r| tmp[(r, c)]));
        for (r, v) in resample_line(&col, out_rows, ratio).into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

/// Resamples both components of a norm map to `to_pitch`.
pub fn resample_norm_map(nm: &NormMap, to_pitch: f64) -> Result<NormMap> {
    Ok(NormMap {
        nx: resample(&nm.nx, nm.pitch, to_pitch)?,
        ny: resample(&nm.ny, nm.pitch, to_pitch)?,
        pitch: to_pitch,
        source: nm.source,
    })
}

fn resample_line(src: &[f64], n_out: usize, ratio: f64) -> Vec<f64> {
    let n = src.len();
    let at = |i: isize| src[i.clamp(0, n as isize - 1) as usize];
    if ratio <= 1.0 {
        (0..n_out)
            .map(|i| {
                let x = (i as f64 + 0.5) * ratio - 0.5;
                let x0 = libm::floor(x);
                let t = x - x0;
                let i0 = x0 as isize;
                (-1..=2).map(|k| at(i0 + k) * keys(t - k as f64)).sum()
            })
            .collect()
    } else {
        (0..n_out)
            .map(|i| {
                let (a, b) = (i as f64 * ratio, ((i + 1) as f64 * ratio).min(n as f64));
                let mut acc = 0.0;
                let mut j = libm::floor(a) as usize;
                while (j as f64) < b && j < n {
                    let w = ((j + 1) as f64).min(b) - (j as f64).max(a);
                    acc += w * src[j];
                    j += 1;
                }
                acc / (b - a)
            })
            .collect()
    }
}

fn keys(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x < 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}
