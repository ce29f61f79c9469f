use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Smallest scale a fit may report.
pub const SCALE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PdfFamily {
    Laplace,
    Gaussian,
}

impl PdfFamily {
    pub const ALL: [PdfFamily; 2] = [PdfFamily::Laplace, PdfFamily::Gaussian];

    pub fn as_str(self) -> &'static str {
        match self {
            PdfFamily::Laplace => "laplace",
            PdfFamily::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedPdf {
    pub family: PdfFamily,
    pub location: f64,
    pub scale: f64,
}

impl FittedPdf {
    pub fn new(family: PdfFamily, location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() || !scale.is_finite() || scale <= 0.0 {
            return Err(Error::Numeric("fit parameters must be finite with positive scale".into()));
        }
        Ok(Self { family, location, scale })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        match self.family {
            PdfFamily::Laplace => libm::exp(-z.abs()) / (2.0 * self.scale),
            PdfFamily::Gaussian => libm::exp(-0.5 * z * z) / (self.scale * libm::sqrt(2.0 * core::f64::consts::PI)),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        match self.family {
            PdfFamily::Laplace if z < 0.0 => 0.5 * libm::exp(z),
            PdfFamily::Laplace => 1.0 - 0.5 * libm::exp(-z),
            PdfFamily::Gaussian => 0.5 * libm::erfc(-z / core::f64::consts::SQRT_2),
        }
    }

    /// `1 − cdf`, computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        match self.family {
            PdfFamily::Laplace if z > 0.0 => 0.5 * libm::exp(-z),
            PdfFamily::Laplace => 1.0 - 0.5 * libm::exp(z),
            PdfFamily::Gaussian => 0.5 * libm::erfc(z / core::f64::consts::SQRT_2),
        }
    }
}

/// Maximum-likelihood fit: median and mean absolute deviation for Laplace,
/// mean and population standard deviation for Gaussian. Scales are floored
/// at [`SCALE_FLOOR`].
pub fn fit_pdf(values: &[f64], family: PdfFamily) -> Result<FittedPdf> {
    if values.is_empty() {
        return Err(invalid("cannot fit an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    let (location, scale) = match family {
        PdfFamily::Laplace => {
            let med = crate::stats::median(values).unwrap_or(0.0);
            let mad = values.iter().map(|v| (v - med).abs()).sum::<f64>() / values.len() as f64;
            (med, mad)
        }
        PdfFamily::Gaussian => (crate::stats::mean(values), libm::sqrt(crate::stats::variance(values))),
    };
    FittedPdf::new(family, location, scale.max(SCALE_FLOOR))
}

/// Density curve sampled on `points` evenly spaced values over `[lo, hi]`.
pub fn density_curve(fit: &FittedPdf, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
    let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
    (0..points).map(|i| lo + step * i as f64).map(|x| (x, fit.pdf(x))).collect()
}
