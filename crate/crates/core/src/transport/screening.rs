//! Universal (ZBL) interatomic screening.

use crate::error::{Error, Result};

/// Bohr radius, nm.
pub const BOHR_RADIUS_NM: f64 = 0.052_917_721_09;

/// e²/(4πε₀), eV·nm.
pub const COULOMB_EV_NM: f64 = 1.439_964_548;

pub(crate) const ZBL_COEFFS: [f64; 4] = [0.1818, 0.5099, 0.2802, 0.02817];
pub(crate) const ZBL_EXPONENTS: [f64; 4] = [3.2, 0.9423, 0.4029, 0.2016];

/// Interatomic screening model in reduced units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Screening {
    /// Ziegler-Biersack-Littmark universal screening.
    Universal,
    /// Bare Coulomb, Φ ≡ 1. Used as the analytic Rutherford reference.
    Unscreened,
}

impl Screening {
    #[inline]
    pub(crate) fn phi(self, x: f64) -> f64 {
        match self {
            Screening::Universal => ZBL_COEFFS
                .iter()
                .zip(ZBL_EXPONENTS.iter())
                .map(|(c, d)| c * (-d * x).exp())
                .sum(),
            Screening::Unscreened => 1.0,
        }
    }

    #[inline]
    pub(crate) fn dphi(self, x: f64) -> f64 {
        match self {
            Screening::Universal => ZBL_COEFFS
                .iter()
                .zip(ZBL_EXPONENTS.iter())
                .map(|(c, d)| -c * d * (-d * x).exp())
                .sum(),
            Screening::Unscreened => 0.0,
        }
    }

    /// Φ(x) − Φ(y), evaluated without cancellation when x ≈ y.
    #[inline]
    pub(crate) fn phi_difference(self, x: f64, y: f64) -> f64 {
        match self {
            Screening::Universal => ZBL_COEFFS
                .iter()
                .zip(ZBL_EXPONENTS.iter())
                .map(|(c, d)| -c * (-d * x).exp() * (-d * (y - x)).exp_m1())
                .sum(),
            Screening::Unscreened => 0.0,
        }
    }
}

/// ZBL universal screening function Φ(x) of the reduced radius x = r/a.
pub fn screening_function(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!(
            "screening function needs a non-negative reduced radius, got {x}"
        )));
    }
    Ok(Screening::Universal.phi(x))
}

/// Universal screening length a_U = 0.8854 a₀ / (Z₁^0.23 + Z₂^0.23), nm.
pub fn universal_screening_length(z1: f64, z2: f64) -> f64 {
    0.8854 * BOHR_RADIUS_NM / (z1.powf(0.23) + z2.powf(0.23))
}
