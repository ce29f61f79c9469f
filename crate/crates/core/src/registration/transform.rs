use crate::error::{invalid, Result};

/// Scale range accepted for an alignment.
pub const SCALE_RANGE: (f64, f64) = (0.5, 2.0);

/// `q = s·R(θ)·p + t` in pixel coordinates centred on the grid
/// (`x` along columns, `y` along rows).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    /// Radians.
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        rotation: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(scale: f64, rotation: f64, tx: f64, ty: f64) -> Result<Self> {
        let t = Self { scale, rotation, tx, ty };
        t.validate()?;
        Ok(t)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self { tx, ty, ..Self::IDENTITY }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || ![self.scale, self.rotation, self.tx, self.ty].iter().all(|v| v.is_finite()) {
            return Err(invalid("similarity transform needs a finite positive scale and finite parameters"));
        }
        Ok(())
    }

    pub fn scale_acceptable(&self) -> bool {
        self.scale >= SCALE_RANGE.0 && self.scale <= SCALE_RANGE.1
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = (libm::sin(self.rotation), libm::cos(self.rotation));
        (
            self.scale * (c * x - s * y) + self.tx,
            self.scale * (s * x + c * y) + self.ty,
        )
    }

    pub fn inverse(&self) -> Self {
        let inv_s = 1.0 / self.scale;
        let (s, c) = (libm::sin(-self.rotation), libm::cos(-self.rotation));
        Self {
            scale: inv_s,
            rotation: -self.rotation,
            tx: -inv_s * (c * self.tx - s * self.ty),
            ty: -inv_s * (s * self.tx + c * self.ty),
        }
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &Self) -> Self {
        let (tx, ty) = self.apply(first.tx, first.ty);
        Self {
            scale: self.scale * first.scale,
            rotation: wrap_angle(self.rotation + first.rotation),
            tx,
            ty,
        }
    }
}

/// Maps an angle to `(-π, π]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    use core::f64::consts::{PI, TAU};
    let mut r = libm::fmod(a, TAU);
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(
            s in 0.5f64..2.0, th in -3.1f64..3.1, tx in -50.0f64..50.0, ty in -50.0f64..50.0,
        ) {
            let t = SimilarityTransform::new(s, th, tx, ty).unwrap();
            for id in [t.compose(&t.inverse()), t.inverse().compose(&t)] {
                prop_assert!((id.scale - 1.0).abs() < 1e-9);
                prop_assert!(id.rotation.abs() < 1e-9);
                prop_assert!(id.tx.abs() < 1e-9 && id.ty.abs() < 1e-9);
            }
        }

        #[test]
        fn compose_matches_sequential_application(
            a in (0.8f64..1.2, -1.0f64..1.0, -9.0f64..9.0, -9.0f64..9.0),
            b in (0.8f64..1.2, -1.0f64..1.0, -9.0f64..9.0, -9.0f64..9.0),
            x in -100.0f64..100.0, y in -100.0f64..100.0,
        ) {
            let ta = SimilarityTransform::new(a.0, a.1, a.2, a.3).unwrap();
            let tb = SimilarityTransform::new(b.0, b.1, b.2, b.3).unwrap();
            let (x1, y1) = tb.apply(x, y);
            let (x2, y2) = ta.apply(x1, y1);
            let (x3, y3) = ta.compose(&tb).apply(x, y);
            prop_assert!((x2 - x3).abs() < 1e-9 && (y2 - y3).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(SimilarityTransform::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(!SimilarityTransform::new(2.5, 0.0, 0.0, 0.0).unwrap().scale_acceptable());
        assert!(SimilarityTransform::IDENTITY.scale_acceptable());
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(3.0 * core::f64::consts::PI) - core::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.25) + 0.25).abs() < 1e-15);
    }
}
