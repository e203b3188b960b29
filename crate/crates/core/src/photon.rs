//! Second-order correlation g²(τ) from binned coincidence histograms.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{minimize, LeastSquaresProblem, LmOptions};

pub const HISTOGRAM_HEADER: &str = "delay_ns,coincidences";

pub const LIFETIME_NOTE: &str =
    "tau is the antibunching time; it equals the excited-state lifetime only in the low-pump limit";

/// Raw coincidence histogram as read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub delays_ns: Vec<f64>,
    pub coincidences: Vec<f64>,
}

impl CoincidenceHistogram {
    pub fn new(delays_ns: Vec<f64>, coincidences: Vec<f64>) -> Result<Self> {
        if delays_ns.len() != coincidences.len() {
            return Err(Error::Validation(format!(
                "{} delays but {} coincidence counts",
                delays_ns.len(),
                coincidences.len()
            )));
        }
        for (i, (&d, &c)) in delays_ns.iter().zip(&coincidences).enumerate() {
            if !d.is_finite() || !c.is_finite() || c < 0.0 {
                return Err(Error::Validation(format!("bad histogram sample {i}: ({d}, {c})")));
            }
            if i > 0 && d <= delays_ns[i - 1] {
                return Err(Error::Validation(format!("delays not ascending at sample {i}")));
            }
        }
        Ok(CoincidenceHistogram {
            delays_ns,
            coincidences,
        })
    }

    pub fn parse(document: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(document).map_err(|e| Error::parse(0, e.to_string()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some(h) if h.trim() == HISTOGRAM_HEADER => {}
            other => {
                return Err(Error::parse(
                    0,
                    format!("expected header {HISTOGRAM_HEADER:?}, found {other:?}"),
                ))
            }
        }
        let mut delays = Vec::new();
        let mut counts = Vec::new();
        for (k, line) in lines.enumerate() {
            let row = k + 1;
            let mut fields = line.split(',');
            let (Some(d), Some(c), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(row, "expected two fields"));
            };
            let d: f64 = d.trim().parse().map_err(|_| Error::parse(row, format!("bad delay {d:?}")))?;
            let c: f64 = c.trim().parse().map_err(|_| Error::parse(row, format!("bad count {c:?}")))?;
            if !d.is_finite() || !c.is_finite() || c < 0.0 {
                return Err(Error::parse(row, "delay and count must be finite, count non-negative"));
            }
            if let Some(&prev) = delays.last() {
                if d <= prev {
                    return Err(Error::parse(row, "delays must be strictly ascending"));
                }
            }
            delays.push(d);
            counts.push(c);
        }
        CoincidenceHistogram::new(delays, counts)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HISTOGRAM_HEADER);
        out.push('\n');
        for (d, c) in self.delays_ns.iter().zip(&self.coincidences) {
            let _ = writeln!(out, "{d},{c}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    pub delays_ns: Vec<f64>,
    pub values: Vec<f64>,
    /// Coincidence level that maps to g² = 1.
    pub normalization: f64,
}

impl G2Curve {
    pub fn new(delays_ns: Vec<f64>, values: Vec<f64>, normalization: f64) -> Result<Self> {
        let hist = CoincidenceHistogram::new(delays_ns, values)?;
        Ok(G2Curve {
            delays_ns: hist.delays_ns,
            values: hist.coincidences,
            normalization,
        })
    }

    /// Noise-free two-level curve on `delays_ns`.
    pub fn model(delays_ns: Vec<f64>, g2_zero: f64, tau_ns: f64) -> Result<Self> {
        let values = delays_ns
            .iter()
            .map(|&t| two_level(t, g2_zero, tau_ns, 1.0))
            .collect();
        G2Curve::new(delays_ns, values, 1.0)
    }
}

/// g² = baseline − (baseline − g₀)·exp(−|τ|/τ_f)
pub fn two_level(delay_ns: f64, g2_zero: f64, tau_ns: f64, baseline: f64) -> f64 {
    baseline - (baseline - g2_zero) * (-delay_ns.abs() / tau_ns).exp()
}

/// Divide by the mean coincidence level at |τ| ≥ `min_abs_delay_ns`.
pub fn normalize_histogram(
    delays_ns: &[f64],
    coincidences: &[f64],
    min_abs_delay_ns: f64,
) -> Result<G2Curve> {
    let hist = CoincidenceHistogram::new(delays_ns.to_vec(), coincidences.to_vec())?;
    let far: Vec<f64> = hist
        .delays_ns
        .iter()
        .zip(&hist.coincidences)
        .filter(|(d, _)| d.abs() >= min_abs_delay_ns)
        .map(|(_, c)| *c)
        .collect();
    if far.is_empty() {
        return Err(Error::Normalization(format!(
            "no bins with |delay| ≥ {min_abs_delay_ns} ns"
        )));
    }
    let level = far.iter().sum::<f64>() / far.len() as f64;
    if !(level > 0.0) {
        return Err(Error::Normalization("normalization window holds no coincidences".into()));
    }
    let values = hist.coincidences.iter().map(|c| c / level).collect();
    G2Curve::new(hist.delays_ns, values, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    pub g2_zero: f64,
    pub tau_ns: f64,
    pub baseline: f64,
    pub rss: f64,
    pub ok: bool,
    /// False when the dip is too shallow for τ to be determined.
    pub tau_identified: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2FitOptions {
    /// Bins with |τ| below this are excluded (detector jitter).
    pub dead_window_ns: f64,
}

impl Default for G2FitOptions {
    fn default() -> Self {
        G2FitOptions { dead_window_ns: 0.0 }
    }
}

struct DipProblem {
    delays: Vec<f64>,
    values: Vec<f64>,
    min_tau: f64,
}

impl LeastSquaresProblem for DipProblem {
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.delays.len(),
            self.delays
                .iter()
                .zip(&self.values)
                .map(|(&t, &g)| two_level(t, p[0], p[1], p[2]) - g),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let (g0, tau, base) = (p[0], p[1], p[2]);
        DMatrix::from_fn(self.delays.len(), 3, |i, j| {
            let t = self.delays[i].abs();
            let e = (-t / tau).exp();
            match j {
                0 => e,
                1 => -(base - g0) * e * t / (tau * tau),
                _ => 1.0 - e,
            }
        })
    }

    fn project(&self, p: &mut DVector<f64>) {
        p[0] = p[0].max(0.0);
        p[1] = p[1].abs().max(self.min_tau);
    }
}

pub fn fit_g2(curve: &G2Curve, options: &G2FitOptions) -> Result<G2Fit> {
    let (delays, values): (Vec<f64>, Vec<f64>) = curve
        .delays_ns
        .iter()
        .zip(&curve.values)
        .filter(|(d, _)| d.abs() >= options.dead_window_ns)
        .map(|(d, v)| (*d, *v))
        .unzip();
    if delays.len() < 4 {
        return Err(Error::Arity {
            needed: 4,
            got: delays.len(),
        });
    }
    let span = delays.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let step = delays
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);

    let mut by_delay: Vec<(f64, f64)> = delays.iter().map(|d| d.abs()).zip(values.iter().copied()).collect();
    by_delay.sort_by(|a, b| a.0.total_cmp(&b.0));
    let outer: Vec<f64> = by_delay[by_delay.len() * 3 / 4..].iter().map(|p| p.1).collect();
    let base0 = outer.iter().sum::<f64>() / outer.len() as f64;
    let g0 = by_delay[0].1.max(0.0);
    let target = base0 - (base0 - g0) / std::f64::consts::E;
    let tau0 = by_delay
        .iter()
        .find(|p| (p.1 - target) * (base0 - g0) >= 0.0)
        .map_or(span / 5.0, |p| p.0)
        .max(step);

    let problem = DipProblem {
        delays,
        values,
        min_tau: step * 1e-6,
    };
    let report = minimize(&problem, DVector::from_vec(vec![g0, tau0, base0]), &LmOptions::default());
    let p = &report.params;
    let (g2_zero, tau_ns, baseline) = (p[0], p[1], p[2]);
    let n = problem.delays.len() as f64;
    let rms = (report.rss / n).sqrt();
    let depth = (baseline - g2_zero).abs();
    let tau_identified = depth > (1e-6 * baseline.abs()).max(3.0 * rms) && tau_ns < span;
    let finite = p.iter().all(|v| v.is_finite());
    Ok(G2Fit {
        g2_zero,
        tau_ns,
        baseline,
        rss: report.rss,
        ok: report.converged && finite && tau_ns > 0.0,
        tau_identified,
        iterations: report.iterations,
    })
}

/// ρ = S/(S+B)
pub fn signal_fraction(signal_rate: f64, background_rate: f64) -> Result<f64> {
    if !(signal_rate >= 0.0) || !(background_rate >= 0.0) {
        return Err(Error::domain("rates must be non-negative"));
    }
    let total = signal_rate + background_rate;
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::domain("signal and background rates are both zero"));
    }
    Ok(signal_rate / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedG2 {
    pub value: f64,
    /// Value before clamping at zero.
    pub unclamped: f64,
    pub clamped: bool,
}

/// Remove uncorrelated background: (g − (1 − ρ²))/ρ².
pub fn background_correct(g2_measured: f64, rho: f64) -> Result<CorrectedG2> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::domain(format!("signal fraction must be in (0, 1], got {rho}")));
    }
    let rho2 = rho * rho;
    let unclamped = (g2_measured - (1.0 - rho2)) / rho2;
    let clamped = unclamped < 0.0;
    Ok(CorrectedG2 {
        value: unclamped.max(0.0),
        unclamped,
        clamped,
    })
}

/// Pointwise correction; the flag reports whether any point was clamped.
pub fn background_correct_curve(curve: &G2Curve, rho: f64) -> Result<(G2Curve, bool)> {
    let mut any_clamped = false;
    let values = curve
        .values
        .iter()
        .map(|&g| {
            let c = background_correct(g, rho)?;
            any_clamped |= c.clamped;
            Ok(c.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((G2Curve::new(curve.delays_ns.clone(), values, curve.normalization)?, any_clamped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Report {
    pub g2_zero_raw: f64,
    pub rho: f64,
    pub g2_zero_corrected: f64,
    pub corrected_clamped: bool,
    pub tau_ns: f64,
    pub tau_identified: bool,
    pub baseline: f64,
    pub ok: bool,
    pub single_emitter: bool,
    pub tau_note: String,
}

impl G2Report {
    pub fn new(fit: &G2Fit, rho: f64) -> Result<Self> {
        let corrected = background_correct(fit.g2_zero, rho)?;
        Ok(G2Report {
            g2_zero_raw: fit.g2_zero,
            rho,
            g2_zero_corrected: corrected.value,
            corrected_clamped: corrected.clamped,
            tau_ns: fit.tau_ns,
            tau_identified: fit.tau_identified,
            baseline: fit.baseline,
            ok: fit.ok,
            single_emitter: corrected.value < 0.5,
            tau_note: LIFETIME_NOTE.to_string(),
        })
    }
}
