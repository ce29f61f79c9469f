use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

use super::pdf::FittedPdf;

/// Operating point where false-positive and false-negative rates meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerPoint {
    pub eer: f64,
    pub threshold: f64,
    /// True when matched scores sit below unmatched ones, so acceptance means
    /// `score ≤ threshold`.
    pub flipped: bool,
}

/// Crossing of the two fitted error curves, found by bisection between the
/// fitted locations. Acceptance is `score ≥ threshold` unless the fits are
/// in reverse order.
pub fn eer_parametric(matched: &FittedPdf, unmatched: &FittedPdf) -> Result<EerPoint> {
    for f in [matched, unmatched] {
        if !f.location.is_finite() || !f.scale.is_finite() || f.scale <= 0.0 {
            return Err(Error::Numeric("non-finite fit".into()));
        }
    }
    let flipped = matched.location < unmatched.location;
    // (FNR, FPR) at a threshold
    let rates = |t: f64| {
        if flipped {
            (matched.sf(t), unmatched.cdf(t))
        } else {
            (matched.cdf(t), unmatched.sf(t))
        }
    };
    let (mut lo, mut hi) = if flipped {
        (matched.location, unmatched.location)
    } else {
        (unmatched.location, matched.location)
    };
    // FNR − FPR rises with the threshold in the normal sense and falls when flipped.
    let rising = |t: f64| {
        let (fnr, fpr) = rates(t);
        if flipped {
            fpr - fnr
        } else {
            fnr - fpr
        }
    };
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rising(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = if rising(lo).abs() <= rising(hi).abs() { lo } else { hi };
    let (fnr, fpr) = rates(threshold);
    Ok(EerPoint {
        eer: (0.5 * (fnr + fpr)).clamp(0.0, 0.5),
        threshold,
        flipped,
    })
}

fn check_scores(matched: &[f64], unmatched: &[f64]) -> Result<()> {
    if matched.is_empty() || unmatched.is_empty() {
        return Err(Error::InsufficientData("EER needs both matched and unmatched scores".into()));
    }
    if matched.iter().chain(unmatched).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite score"));
    }
    Ok(())
}

/// ROC sweep with acceptance `score ≥ θ` over every observed score θ. The
/// reported rate is the mean of FPR and FNR at the threshold minimising
/// |FPR − FNR|; ties go to the smaller threshold.
pub fn eer_empirical(matched: &[f64], unmatched: &[f64]) -> Result<EerPoint> {
    check_scores(matched, unmatched)?;
    let mut m = matched.to_vec();
    let mut u = unmatched.to_vec();
    m.sort_by(f64::total_cmp);
    u.sort_by(f64::total_cmp);
    let mut cands: Vec<f64> = m.iter().chain(u.iter()).copied().collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let (mn, un) = (m.len() as u128, u.len() as u128);
    let (mut im, mut iu) = (0usize, 0usize);
    let mut best: Option<(u128, usize, usize, f64)> = None;
    for &t in &cands {
        while im < m.len() && m[im] < t {
            im += 1;
        }
        while iu < u.len() && u[iu] < t {
            iu += 1;
        }
        // FNR = im / mn, FPR = (un − iu) / un, compared over a common denominator.
        let fnr_n = im as u128 * un;
        let fpr_n = (u.len() - iu) as u128 * mn;
        let gap = fnr_n.abs_diff(fpr_n);
        if best.is_none_or(|b| gap < b.0) {
            best = Some((gap, im, u.len() - iu, t));
        }
    }
    let (_, fn_count, fp_count, threshold) = best.expect("candidates are non-empty");
    let eer = 0.5 * (fn_count as f64 / m.len() as f64 + fp_count as f64 / u.len() as f64);
    Ok(EerPoint {
        eer,
        threshold,
        flipped: false,
    })
}

/// Quadratic reference implementation of [`eer_empirical`].
pub fn eer_empirical_naive(matched: &[f64], unmatched: &[f64]) -> Result<EerPoint> {
    check_scores(matched, unmatched)?;
    let mut cands: Vec<f64> = matched.iter().chain(unmatched).copied().collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut best: Option<(f64, f64, f64)> = None;
    for &t in &cands {
        let fnr = matched.iter().filter(|&&v| v < t).count() as f64 / matched.len() as f64;
        let fpr = unmatched.iter().filter(|&&v| v >= t).count() as f64 / unmatched.len() as f64;
        let gap = (fnr - fpr).abs();
        if best.is_none_or(|b| gap < b.0 - 1e-15) {
            best = Some((gap, 0.5 * (fnr + fpr), t));
        }
    }
    let (_, eer, threshold) = best.expect("non-empty");
    Ok(EerPoint {
        eer,
        threshold,
        flipped: false,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}
