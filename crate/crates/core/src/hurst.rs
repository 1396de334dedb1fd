//! Hurst index and the compact parameter box it is confined to.

use crate::error::{domain, Result};
use rand::Rng;

/// A Hurst index in the rough regime, `0 < H < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 0.5 {
            Ok(Self(value))
        } else {
            domain(format!("Hurst index {value} outside (0, 1/2)"))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `H + 1/2`, the exponent of the power-law kernel.
    #[inline]
    pub fn alpha(self) -> f64 {
        self.0 + 0.5
    }
}

impl std::fmt::Display for HurstIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Closed interval `[lo, hi]` inside `(0, 1/2)` holding every admissible parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    lo: f64,
    hi: f64,
}

impl Default for ParamBox {
    fn default() -> Self {
        Self { lo: 0.01, hi: 0.49 }
    }
}

impl ParamBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi && hi < 0.5) {
            return domain(format!("parameter box [{lo}, {hi}] not inside (0, 1/2)"));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Folds `x` back into the box by mirror reflection at both ends.
    pub fn reflect(&self, x: f64) -> f64 {
        if self.contains(x) {
            return x;
        }
        if !x.is_finite() {
            return self.midpoint();
        }
        let period = 2.0 * self.width();
        let mut y = (x - self.lo).rem_euclid(period);
        if y > self.width() {
            y = period - y;
        }
        (self.lo + y).clamp(self.lo, self.hi)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.lo + self.width() * rng.random::<f64>()
    }

    /// Every point of the box is a valid rough Hurst index.
    pub fn hurst(&self, x: f64) -> HurstIndex {
        HurstIndex(self.reflect(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_rough_values() {
        assert!(HurstIndex::new(0.0).is_err());
        assert!(HurstIndex::new(0.5).is_err());
        assert!(HurstIndex::new(f64::NAN).is_err());
        assert!(HurstIndex::new(0.25).is_ok());
    }

    #[test]
    fn default_box() {
        let b = ParamBox::default();
        assert_eq!((b.lo(), b.hi()), (0.01, 0.49));
        assert!(ParamBox::new(0.2, 0.1).is_err());
        assert!(ParamBox::new(0.0, 0.3).is_err());
    }

    proptest! {
        #[test]
        fn reflection_lands_inside(x in -5.0f64..5.0) {
            let b = ParamBox::default();
            let y = b.reflect(x);
            prop_assert!(b.contains(y));
            if b.contains(x) {
                prop_assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn reflection_mirrors_small_overshoot() {
        let b = ParamBox::default();
        assert!((b.reflect(0.5) - 0.48).abs() < 1e-12);
        assert!((b.reflect(0.0) - 0.02).abs() < 1e-12);
    }
}
