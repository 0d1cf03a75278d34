//! The even quartic confining potential `Φ(x) = x²/2 + εx⁴/2`.
//!
//! `ε = 0` is the harmonic (isochronous) control case. Every quantity is
//! dimensionless.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("energy must be finite and non-negative, got {0}")]
    NegativeEnergy(f64),
}

/// Strength of the quartic perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    epsilon: f64,
}

/// A point `(x, v)` of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub v: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite()
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        (self.x - other.x).hypot(self.v - other.v)
    }
}

impl PotentialParams {
    pub fn new(epsilon: f64) -> Result<Self, PotentialError> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(PotentialError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    /// The harmonic potential `x²/2`.
    pub const fn harmonic() -> Self {
        Self { epsilon: 0.0 }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_harmonic(&self) -> bool {
        self.epsilon == 0.0
    }

    pub fn phi(&self, x: f64) -> f64 {
        let x2 = x * x;
        0.5 * x2 + 0.5 * self.epsilon * x2 * x2
    }

    pub fn dphi(&self, x: f64) -> f64 {
        x + 2.0 * self.epsilon * x * x * x
    }

    pub fn hamiltonian(&self, p: PhasePoint) -> f64 {
        0.5 * p.v * p.v + self.phi(p.x)
    }

    /// The non-negative turning point `x` with `Φ(x) = h`.
    pub fn invert_phi(&self, h: f64) -> Result<f64, PotentialError> {
        if !(h.is_finite() && h >= 0.0) {
            return Err(PotentialError::NegativeEnergy(h));
        }
        Ok(self.turning_point_sq(h).sqrt())
    }

    /// Square of the turning point, `x²` with `Φ(x) = h`, for `h ≥ 0`.
    ///
    /// Uses the rationalised root `x² = 4h / (1 + √(1 + 8εh))`, which has no
    /// cancellation as `εh → 0` and reduces to `2h` at `ε = 0`.
    #[inline]
    pub fn turning_point_sq(&self, h: f64) -> f64 {
        4.0 * h / (1.0 + (1.0 + 8.0 * self.epsilon * h).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eps(e: f64) -> PotentialParams {
        PotentialParams::new(e).unwrap()
    }

    #[test]
    fn phi_examples() {
        assert_eq!(eps(0.1).phi(0.0), 0.0);
        assert_eq!(eps(0.0).phi(1.0), 0.5);
        assert!((eps(0.1).phi(2.0) - 2.8).abs() < 1e-15);
    }

    #[test]
    fn dphi_examples() {
        assert_eq!(eps(0.1).dphi(0.0), 0.0);
        assert_eq!(eps(0.0).dphi(3.0), 3.0);
        assert!((eps(0.1).dphi(2.0) - 3.6).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(eps(0.3).hamiltonian(PhasePoint::new(0.0, 0.0)), 0.0);
        assert_eq!(eps(0.0).hamiltonian(PhasePoint::new(1.0, 1.0)), 1.0);
        assert!((eps(0.1).hamiltonian(PhasePoint::new(2.0, 1.0)) - 3.3).abs() < 1e-15);
    }

    #[test]
    fn invert_phi_examples() {
        assert_eq!(eps(0.1).invert_phi(0.0).unwrap(), 0.0);
        assert!((eps(0.0).invert_phi(2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((eps(0.1).invert_phi(2.8).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn invert_phi_rejects_negative_energy() {
        assert!(matches!(
            eps(0.1).invert_phi(-1e-3),
            Err(PotentialError::NegativeEnergy(_))
        ));
        assert!(eps(0.1).invert_phi(f64::NAN).is_err());
    }

    #[test]
    fn rejects_negative_epsilon() {
        assert!(PotentialParams::new(-0.01).is_err());
        assert!(PotentialParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn tiny_epsilon_is_seamless() {
        // the textbook closed form loses every digit here
        let p = eps(1e-14);
        let x = p.invert_phi(1e-3).unwrap();
        let rel = (p.phi(x) - 1e-3).abs() / 1e-3;
        assert!(rel < 1e-14, "rel = {rel}");
    }

    #[test]
    fn invert_phi_is_strictly_increasing() {
        for &e in &[0.0, 1e-9, 0.01, 0.1, 1.0] {
            let p = eps(e);
            let mut prev = -1.0;
            for i in 0..2000 {
                let h = 1e-6 * (1e9f64).powf(i as f64 / 1999.0);
                let x = p.invert_phi(h).unwrap();
                assert!(x > prev);
                prev = x;
            }
        }
    }

    #[test]
    fn dphi_matches_finite_differences() {
        let p = eps(0.1);
        for i in 0..=40 {
            let x = -2.0 + 0.1 * i as f64;
            let step = 1e-4;
            let fd = (p.phi(x + step) - p.phi(x - step)) / (2.0 * step);
            // truncation error Φ'''(x)·step²/6 = 2εx·step² stays below 4e-9
            assert!((fd - p.dphi(x)).abs() < 5e-8, "x = {x}");
        }
    }

    proptest! {
        #[test]
        fn round_trip(e in 0.0f64..1.0, log_h in -6.0f64..3.0) {
            let p = eps(e);
            let h = 10f64.powf(log_h);
            let x = p.invert_phi(h).unwrap();
            prop_assert!(((p.phi(x) - h) / h).abs() <= 1e-12);
        }

        #[test]
        fn parity(e in 0.0f64..1.0, x in -10.0f64..10.0) {
            let p = eps(e);
            prop_assert_eq!(p.phi(x), p.phi(-x));
            prop_assert_eq!(p.dphi(x), -p.dphi(-x));
            prop_assert!(p.phi(x) >= 0.0);
        }
    }
}
