//! Classical center-of-mass scattering angle for a screened Coulomb
//! potential, in reduced (Lindhard) units.
//!
//! The scattering integral
//!
//! ```text
//! θ = π − 2b ∫_{x₀}^∞ dx / (x² √F(x)),   F(x) = 1 − Φ(x)/(xε) − b²/x²
//! ```
//!
//! is mapped onto φ ∈ [0, π/2] through x = x₀ / cos φ. The integrand then
//! becomes `sin φ / √F`, which is analytic on the whole interval, and is
//! evaluated with 16-point Gauss-Legendre quadrature. `F` is rebuilt as a
//! difference from its value at the turning point so that nodes close to
//! φ = 0 do not lose precision.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use rayon::prelude::*;

use super::screening::Screening;
use crate::error::{Error, Result};

const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_37,
    0.617_876_244_402_643_8,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];

const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_58,
    0.169_156_519_395_002_54,
    0.149_595_988_816_576_74,
    0.124_628_971_255_533_88,
    0.095_158_511_682_492_79,
    0.062_253_523_938_647_894,
    0.027_152_459_411_754_096,
];

/// 16-point Gauss-Legendre rule on [lo, hi].
pub(crate) fn gauss_legendre_16<F: FnMut(f64) -> f64>(lo: f64, hi: f64, mut f: F) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (t, w) in GL16_NODES.iter().zip(GL16_WEIGHTS.iter()) {
        acc += w * (f(mid - half * t) + f(mid + half * t));
    }
    acc * half
}

/// Reduced distance of closest approach x₀, the root of F(x) = 0.
pub(crate) fn closest_approach(screening: Screening, eps: f64, b: f64) -> Result<f64> {
    let f = |x: f64| 1.0 - screening.phi(x) / (x * eps) - b * b / (x * x);
    let df = |x: f64| {
        (screening.phi(x) - x * screening.dphi(x)) / (x * x * eps) + 2.0 * b * b / (x * x * x)
    };

    // Φ ≤ 1 puts the root below the bare-Coulomb turning point; F(b) < 0.
    let inv = 0.5 / eps;
    let mut hi = inv + (inv * inv + b * b).sqrt();
    if matches!(screening, Screening::Unscreened) {
        return Ok(hi);
    }
    // Φ(0) slightly exceeds 1 for the universal fit.
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = b;
    let mut x = hi;
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / df(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numeric(format!(
        "closest approach did not converge for eps = {eps}, b = {b}"
    )))
}

/// Center-of-mass scattering angle for the universal screening.
pub fn scattering_angle(reduced_energy: f64, reduced_impact: f64) -> Result<f64> {
    scattering_angle_with(Screening::Universal, reduced_energy, reduced_impact)
}

pub fn scattering_angle_with(screening: Screening, eps: f64, b: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!(
            "reduced energy must be positive and finite, got {eps}"
        )));
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::domain(format!(
            "reduced impact parameter must be non-negative, got {b}"
        )));
    }
    if b == 0.0 {
        return Ok(PI);
    }

    let x0 = closest_approach(screening, eps, b)?;
    let phi0 = screening.phi(x0);
    let residual = 1.0 - phi0 / (x0 * eps) - b * b / (x0 * x0);
    let b_over_x0 = b / x0;

    let integral = gauss_legendre_16(0.0, FRAC_PI_2, |angle| {
        let (sin, cos) = angle.sin_cos();
        let half = (0.5 * angle).sin();
        let one_minus_u = 2.0 * half * half;
        let x = x0 / cos;
        let potential = phi0 * one_minus_u + cos * screening.phi_difference(x0, x);
        let g = residual + potential / (x0 * eps) + b_over_x0 * b_over_x0 * sin * sin;
        sin / g.sqrt()
    });

    let theta = PI - 2.0 * b_over_x0 * integral;
    if !theta.is_finite() {
        return Err(Error::Numeric(format!(
            "scattering integral is not finite for eps = {eps}, b = {b} (x0 = {x0})"
        )));
    }
    Ok(theta.clamp(f64::MIN_POSITIVE, PI))
}

/// Analytic Rutherford angle, tan(θ/2) = 1/(2εb).
pub fn rutherford_angle(eps: f64, b: f64) -> f64 {
    2.0 * (1.0 / (2.0 * eps * b)).atan()
}

const LN_EPS_MIN: f64 = -13.815_510_557_964_274; // ln 1e-6
const LN_EPS_MAX: f64 = 13.815_510_557_964_274; // ln 1e6
const LN_B_MIN: f64 = -11.512_925_464_970_229; // ln 1e-5
const LN_B_MAX: f64 = 3.401_197_381_662_155; // ln 30
const TABLE_EPS_POINTS: usize = 449;
const TABLE_B_POINTS: usize = 321;

/// Precomputed ln θ(ε, b) on a log-log grid, bilinearly interpolated.
///
/// Queries outside the grid fall back to direct quadrature.
#[derive(Debug)]
pub struct ScatteringTable {
    ln_theta: Vec<f64>,
    d_eps: f64,
    d_b: f64,
}

impl ScatteringTable {
    pub fn universal() -> &'static ScatteringTable {
        static TABLE: OnceLock<ScatteringTable> = OnceLock::new();
        TABLE.get_or_init(|| ScatteringTable::build(Screening::Universal))
    }

    fn build(screening: Screening) -> Self {
        let d_eps = (LN_EPS_MAX - LN_EPS_MIN) / (TABLE_EPS_POINTS - 1) as f64;
        let d_b = (LN_B_MAX - LN_B_MIN) / (TABLE_B_POINTS - 1) as f64;
        let ln_theta = (0..TABLE_EPS_POINTS * TABLE_B_POINTS)
            .into_par_iter()
            .map(|k| {
                let i = k / TABLE_B_POINTS;
                let j = k % TABLE_B_POINTS;
                let eps = (LN_EPS_MIN + i as f64 * d_eps).exp();
                let b = (LN_B_MIN + j as f64 * d_b).exp();
                scattering_angle_with(screening, eps, b)
                    .expect("table node inside validated domain")
                    .ln()
            })
            .collect();
        ScatteringTable {
            ln_theta,
            d_eps,
            d_b,
        }
    }

    pub fn angle(&self, eps: f64, b: f64) -> f64 {
        if b == 0.0 {
            return PI;
        }
        let u = (eps.ln() - LN_EPS_MIN) / self.d_eps;
        let v = (b.ln() - LN_B_MIN) / self.d_b;
        let in_range = u >= 0.0
            && v >= 0.0
            && u < (TABLE_EPS_POINTS - 1) as f64
            && v < (TABLE_B_POINTS - 1) as f64;
        if !in_range {
            return scattering_angle(eps, b).unwrap_or(PI);
        }
        let i = u as usize;
        let j = v as usize;
        let fu = u - i as f64;
        let fv = v - j as f64;
        let at = |i: usize, j: usize| self.ln_theta[i * TABLE_B_POINTS + j];
        let lo = at(i, j) + fv * (at(i, j + 1) - at(i, j));
        let hi = at(i + 1, j) + fv * (at(i + 1, j + 1) - at(i + 1, j));
        (lo + fu * (hi - lo)).exp().min(PI)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_degree_31() {
        let got = gauss_legendre_16(-1.0, 2.0, |x| x.powi(31) + 3.0 * x.powi(6));
        let exact = (2f64.powi(32) - 1.0) / 32.0 + 3.0 * (2f64.powi(7) + 1.0) / 7.0;
        assert!((got - exact).abs() / exact < 1e-13, "{got} vs {exact}");
    }

    #[test]
    fn head_on_is_pi() {
        assert_eq!(scattering_angle(0.5, 0.0).unwrap(), PI);
    }

    #[test]
    fn grazing_limit() {
        // θ < 1e-3 at b = 10 needs ε ≳ 2; softer collisions need larger b.
        for &(eps, b) in &[(3.0, 10.0), (100.0, 10.0), (0.3, 20.0), (0.01, 30.0)] {
            let theta = scattering_angle(eps, b).unwrap();
            assert!(theta > 0.0 && theta < 1e-3, "eps {eps}: {theta}");
        }
    }

    #[test]
    fn unscreened_matches_rutherford() {
        for &eps in &[1e-3, 0.05, 1.0, 30.0] {
            for &b in &[1e-3, 0.1, 1.0, 7.0] {
                let theta = scattering_angle_with(Screening::Unscreened, eps, b).unwrap();
                let exact = rutherford_angle(eps, b);
                assert!(
                    ((theta - exact) / exact).abs() < 1e-9,
                    "eps {eps} b {b}: {theta} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn screening_reduces_deflection() {
        for &eps in &[1e-3, 0.1, 10.0] {
            for &b in &[0.05, 0.5, 3.0] {
                let s = scattering_angle(eps, b).unwrap();
                let r = rutherford_angle(eps, b);
                assert!(s < r, "eps {eps} b {b}");
            }
        }
    }

    #[test]
    fn angle_decreases_with_impact_parameter() {
        let mut prev = PI;
        for k in 1..200 {
            let theta = scattering_angle(0.3, k as f64 * 0.05).unwrap();
            assert!(theta < prev);
            prev = theta;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(scattering_angle(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(scattering_angle(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn closest_approach_is_a_root() {
        let s = Screening::Universal;
        for &(eps, b) in &[(1e-4, 0.2), (0.3, 1.0), (50.0, 0.01)] {
            let x0 = closest_approach(s, eps, b).unwrap();
            let f = 1.0 - s.phi(x0) / (x0 * eps) - b * b / (x0 * x0);
            assert!(f.abs() < 1e-12, "{f}");
        }
    }

    #[test]
    fn table_tracks_quadrature() {
        let table = ScatteringTable::universal();
        let mut worst: f64 = 0.0;
        for i in 0..37 {
            for j in 0..29 {
                let eps = 10f64.powf(-5.5 + i as f64 * 0.3);
                let b = 10f64.powf(-4.3 + j as f64 * 0.17);
                let exact = scattering_angle(eps, b).unwrap();
                let approx = table.angle(eps, b);
                worst = worst.max(((approx - exact) / exact).abs());
            }
        }
        assert!(worst < 2e-3, "worst relative table error {worst}");
    }
}
