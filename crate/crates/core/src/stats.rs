//! Small statistics helpers shared by the feature and scoring modules.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, Grid};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by n).
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Median of a slice (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Pearson correlation of two equally long sequences.
///
/// Fails with [`Error::DegenerateInput`] when either side is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: (1, a.len()),
            found: (1, b.len()),
        });
    }
    if a.len() < 2 {
        return Err(Error::DegenerateInput("correlation needs at least two samples".into()));
    }
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::DegenerateInput("correlation of a constant signal".into()));
    }
    Ok((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Zero-mean normalized cross-correlation of two grids, optionally restricted
/// to the pixels where `mask` is true.
pub fn zncc(a: &Grid<f64>, b: &Grid<f64>, mask: Option<&Grid<bool>>) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    match mask {
        None => correlation(a.as_slice(), b.as_slice()),
        Some(m) => {
            ensure_same_dims(a.dims(), m.dims())?;
            let (xa, xb): (Vec<f64>, Vec<f64>) = a
                .iter()
                .zip(b.iter())
                .zip(m.iter())
                .filter(|(_, &keep)| keep)
                .map(|((x, y), _)| (*x, *y))
                .unzip();
            correlation(&xa, &xb)
        }
    }
}
