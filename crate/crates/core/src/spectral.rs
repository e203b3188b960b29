//! Peak detection, line fitting and the small fits used on measured spectra.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{minimize, LeastSquaresProblem, LmOptions};
use crate::spectrum::{Spectrum, MIN_SAMPLES};
use crate::units::C_NM_THZ;

/// Spectrometer resolution below which fitted widths are flagged.
pub const SPECTROMETER_RESOLUTION_NM: f64 = 0.1;

/// Converts a median absolute deviation to a Gaussian standard deviation.
pub const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "unit", content = "value")]
pub enum Prominence {
    Counts(f64),
    NoiseScale(f64),
}

impl Default for Prominence {
    fn default() -> Self {
        Prominence::NoiseScale(6.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakDetection {
    pub prominence: Prominence,
    pub min_separation_nm: f64,
    /// Width of the rolling-median baseline window.
    pub baseline_window_nm: f64,
}

impl Default for PeakDetection {
    fn default() -> Self {
        PeakDetection {
            prominence: Prominence::default(),
            min_separation_nm: 0.5,
            baseline_window_nm: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakCandidate {
    pub index: usize,
    pub center_nm: f64,
    /// Height above the local baseline.
    pub height: f64,
    pub baseline: f64,
    /// Full width at half height, from the half-height crossings.
    pub width_nm: f64,
    pub window_lo_nm: f64,
    pub window_hi_nm: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Centered rolling median with a window of `half` samples on each side,
/// truncated at the ends.
pub fn rolling_median(values: &[f64], half: usize) -> Vec<f64> {
    let mut buf = Vec::with_capacity(2 * half + 1);
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            buf.clear();
            buf.extend_from_slice(&values[lo..hi]);
            median(&mut buf)
        })
        .collect()
}

/// Rolling-median baseline and MAD noise scale of a spectrum.
pub fn baseline_and_noise(s: &Spectrum, baseline_window_nm: f64) -> (Vec<f64>, f64) {
    let w = s.wavelengths();
    let mean_step = (w[w.len() - 1] - w[0]) / (w.len() - 1) as f64;
    let half = ((0.5 * baseline_window_nm / mean_step).round() as usize).max(2);
    let baseline = rolling_median(s.intensities(), half);
    let mut residual: Vec<f64> = s
        .intensities()
        .iter()
        .zip(&baseline)
        .map(|(c, b)| c - b)
        .collect();
    let center = median(&mut residual.clone());
    for r in residual.iter_mut() {
        *r = (*r - center).abs();
    }
    (baseline, MAD_TO_SIGMA * median(&mut residual))
}

pub fn detect_peaks(s: &Spectrum, options: &PeakDetection) -> Result<Vec<PeakCandidate>> {
    let (baseline, noise) = baseline_and_noise(s, options.baseline_window_nm);
    let threshold = match options.prominence {
        Prominence::Counts(c) => c,
        Prominence::NoiseScale(k) => k * noise,
    };
    if !(threshold > 0.0) && !matches!(options.prominence, Prominence::NoiseScale(k) if k > 0.0) {
        return Err(Error::domain("prominence must be positive"));
    }
    let w = s.wavelengths();
    let c = s.intensities();
    let above: Vec<f64> = c.iter().zip(&baseline).map(|(c, b)| c - b).collect();

    let mut found: Vec<PeakCandidate> = Vec::new();
    let mut i = 1;
    while i + 1 < c.len() {
        if c[i] > c[i - 1] {
            let mut j = i;
            while j + 1 < c.len() && c[j + 1] == c[i] {
                j += 1;
            }
            let peak = (i + j) / 2;
            if j + 1 < c.len()
                && c[j + 1] < c[i]
                && above[peak] > threshold
                && topographic_prominence(c, i, j) > threshold
            {
                found.push(candidate_at(w, &above, &baseline, peak));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    found.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
    let mut kept: Vec<PeakCandidate> = Vec::new();
    for cand in found {
        if kept
            .iter()
            .all(|k| (k.center_nm - cand.center_nm).abs() >= options.min_separation_nm)
        {
            kept.push(cand);
        }
    }
    kept.sort_by_key(|k| k.index);
    Ok(kept)
}

/// Height of the plateau `c[first..=last]` over the higher of its two
/// saddles, each found by walking out until a higher sample or the edge.
fn topographic_prominence(c: &[f64], first: usize, last: usize) -> f64 {
    let top = c[first];
    let mut left_min = top;
    for &v in c[..first].iter().rev() {
        if v > top {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = top;
    for &v in &c[last + 1..] {
        if v > top {
            break;
        }
        right_min = right_min.min(v);
    }
    top - left_min.max(right_min)
}

fn candidate_at(w: &[f64], above: &[f64], baseline: &[f64], peak: usize) -> PeakCandidate {
    let half = 0.5 * above[peak];
    let crossing = |range: &mut dyn Iterator<Item = usize>, toward: isize| -> f64 {
        for k in range {
            if above[k] <= half {
                let inner = (k as isize - toward) as usize;
                let t = (above[inner] - half) / (above[inner] - above[k]);
                return w[inner] + t * (w[k] - w[inner]);
            }
        }
        f64::NAN
    };
    let left = crossing(&mut (0..peak).rev(), -1);
    let right = crossing(&mut (peak + 1..w.len()), 1);
    let step = w[(peak + 1).min(w.len() - 1)] - w[peak.saturating_sub(1)];
    let width = match (left.is_finite(), right.is_finite()) {
        (true, true) => right - left,
        (true, false) => 2.0 * (w[peak] - left),
        (false, true) => 2.0 * (right - w[peak]),
        (false, false) => step,
    }
    .max(step);
    let reach = 3.0 * width;
    PeakCandidate {
        index: peak,
        center_nm: w[peak],
        height: above[peak],
        baseline: baseline[peak],
        width_nm: width,
        window_lo_nm: w[peak] - reach,
        window_hi_nm: w[peak] + reach,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineShape {
    Lorentzian,
    Gaussian,
}

impl LineShape {
    /// Unit-height profile and its derivatives with respect to center and fwhm.
    fn profile(self, x: f64, center: f64, fwhm: f64) -> (f64, f64, f64) {
        let d = x - center;
        match self {
            LineShape::Lorentzian => {
                let h2 = 0.25 * fwhm * fwhm;
                let denom = d * d + h2;
                let f = h2 / denom;
                let d_center = 2.0 * d * h2 / (denom * denom);
                let d_fwhm = 0.5 * fwhm * d * d / (denom * denom);
                (f, d_center, d_fwhm)
            }
            LineShape::Gaussian => {
                let k = 4.0 * LN_2;
                let f = (-k * d * d / (fwhm * fwhm)).exp();
                let d_center = f * 2.0 * k * d / (fwhm * fwhm);
                let d_fwhm = f * 2.0 * k * d * d / (fwhm * fwhm * fwhm);
                (f, d_center, d_fwhm)
            }
        }
    }

    pub fn evaluate(self, x: f64, center: f64, fwhm: f64, amplitude: f64, baseline: f64) -> f64 {
        baseline + amplitude * self.profile(x, center, fwhm).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub model: LineShape,
    pub rss: f64,
    pub ok: bool,
    /// Width at or below the spectrometer resolution.
    pub resolution_limited: bool,
    pub iterations: usize,
}

struct LineProblem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    shape: LineShape,
    min_fwhm: f64,
}

impl LeastSquaresProblem for LineProblem<'_> {
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.y)
                .map(|(&x, &y)| self.shape.evaluate(x, p[0], p[1], p[2], p[3]) - y),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.x.len(), 4);
        for (row, &x) in self.x.iter().enumerate() {
            let (f, dc, dw) = self.shape.profile(x, p[0], p[1]);
            j[(row, 0)] = p[2] * dc;
            j[(row, 1)] = p[2] * dw;
            j[(row, 2)] = f;
            j[(row, 3)] = 1.0;
        }
        j
    }

    fn project(&self, p: &mut DVector<f64>) {
        p[1] = p[1].abs().max(self.min_fwhm);
    }
}

/// Fit one line inside `[lo_nm, hi_nm]`.
pub fn fit_line(s: &Spectrum, window: (f64, f64), shape: LineShape) -> Result<PeakFit> {
    let (lo, hi) = window;
    let w = s.wavelengths();
    let start = w.partition_point(|&x| x < lo);
    let end = w.partition_point(|&x| x <= hi);
    if end.saturating_sub(start) < MIN_SAMPLES {
        return Err(Error::Fit(format!(
            "window {lo}..{hi} nm holds {} samples, need {MIN_SAMPLES}",
            end.saturating_sub(start)
        )));
    }
    let x = &w[start..end];
    let y = &s.intensities()[start..end];
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("window is non-empty");
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(ymax > ymin) {
        return Err(Error::Fit("window is flat, nothing to fit".into()));
    }

    let half = ymin + 0.5 * (ymax - ymin);
    let left = (0..imax).rev().find(|&k| y[k] <= half).map_or(x[0], |k| x[k]);
    let right = (imax + 1..y.len()).find(|&k| y[k] <= half).map_or(x[x.len() - 1], |k| x[k]);
    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let initial = DVector::from_vec(vec![x[imax], (right - left).max(step), ymax - ymin, ymin]);

    let problem = LineProblem {
        x,
        y,
        shape,
        min_fwhm: step * 1e-6,
    };
    let report = minimize(&problem, initial, &LmOptions::default());
    let p = &report.params;
    let (center, fwhm, amplitude, baseline) = (p[0], p[1], p[2], p[3]);
    let finite = p.iter().all(|v| v.is_finite()) && report.rss.is_finite();
    let inside = center >= x[0] && center <= x[x.len() - 1];
    Ok(PeakFit {
        center,
        fwhm,
        amplitude,
        baseline,
        model: shape,
        rss: report.rss,
        ok: report.converged && finite && inside && fwhm > 0.0,
        resolution_limited: fwhm <= SPECTROMETER_RESOLUTION_NM,
        iterations: report.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub label: String,
    pub lo_nm: f64,
    pub hi_nm: f64,
}

/// Disjoint half-open wavelength windows, ordered by `lo_nm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Region>", into = "Vec<Region>")]
pub struct RegionTable {
    regions: Vec<Region>,
}

impl RegionTable {
    pub fn new(mut regions: Vec<Region>) -> Result<Self> {
        for r in &regions {
            if !(r.lo_nm < r.hi_nm) {
                return Err(Error::Validation(format!(
                    "region {} has lo {} ≥ hi {}",
                    r.label, r.lo_nm, r.hi_nm
                )));
            }
        }
        regions.sort_by(|a, b| a.lo_nm.total_cmp(&b.lo_nm));
        for pair in regions.windows(2) {
            if pair[1].lo_nm < pair[0].hi_nm {
                return Err(Error::Validation(format!(
                    "regions {} and {} overlap",
                    pair[0].label, pair[1].label
                )));
            }
        }
        Ok(RegionTable { regions })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))
    }
}

impl Default for RegionTable {
    fn default() -> Self {
        let region = |label: &str, lo_nm, hi_nm| Region {
            label: label.to_string(),
            lo_nm,
            hi_nm,
        };
        RegionTable::new(vec![
            region("I", 505.0, 535.0),
            region("II", 535.0, 565.0),
            region("III", 565.0, 605.0),
            region("IV", 605.0, 700.0),
        ])
        .expect("default regions are disjoint")
    }
}

impl TryFrom<Vec<Region>> for RegionTable {
    type Error = Error;
    fn try_from(regions: Vec<Region>) -> Result<Self> {
        RegionTable::new(regions)
    }
}

impl From<RegionTable> for Vec<Region> {
    fn from(table: RegionTable) -> Self {
        table.regions
    }
}

pub fn classify_region(center_nm: f64, table: &RegionTable) -> Option<&str> {
    table
        .regions
        .iter()
        .find(|r| center_nm >= r.lo_nm && center_nm < r.hi_nm)
        .map(|r| r.label.as_str())
}

/// Frequency interval in THz spanned by `delta_nm` around `lambda0_nm`.
pub fn shift_to_frequency(lambda0_nm: f64, delta_nm: f64) -> Result<f64> {
    if !(lambda0_nm > 0.0) {
        return Err(Error::domain(format!("reference wavelength must be positive, got {lambda0_nm}")));
    }
    Ok(C_NM_THZ * delta_nm / (lambda0_nm * lambda0_nm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainEstimate {
    pub stress_gpa: f64,
    pub strain: f64,
}

pub const DEFAULT_STRESS_PER_THZ_GPA: f64 = 1.0;
pub const DIAMOND_YOUNGS_MODULUS_GPA: f64 = 1000.0;

pub fn estimate_strain(
    delta_nu_thz: f64,
    stress_per_thz_gpa: f64,
    youngs_modulus_gpa: f64,
) -> Result<StrainEstimate> {
    if !(youngs_modulus_gpa > 0.0) {
        return Err(Error::domain(format!("Young's modulus must be positive, got {youngs_modulus_gpa}")));
    }
    if !(stress_per_thz_gpa > 0.0) {
        return Err(Error::domain(format!("stress coefficient must be positive, got {stress_per_thz_gpa}")));
    }
    if !(delta_nu_thz >= 0.0) || !delta_nu_thz.is_finite() {
        return Err(Error::domain(format!("frequency shift must be non-negative, got {delta_nu_thz}")));
    }
    let stress_gpa = delta_nu_thz * stress_per_thz_gpa;
    Ok(StrainEstimate {
        stress_gpa,
        strain: stress_gpa / youngs_modulus_gpa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationFit {
    /// Polarization axis in [0°, 180°); NaN when undefined.
    pub theta0_deg: f64,
    pub visibility: f64,
    pub mean_intensity: f64,
    pub theta0_defined: bool,
    pub rss: f64,
}

/// Fit I(θ) = C·(1 + V·cos 2(θ − θ₀)) via its linear form a + b·cos 2θ + c·sin 2θ.
pub fn fit_dipole_polarization(angles_deg: &[f64], intensities: &[f64]) -> Result<PolarizationFit> {
    if angles_deg.len() != intensities.len() {
        return Err(Error::Validation(format!(
            "{} angles but {} intensities",
            angles_deg.len(),
            intensities.len()
        )));
    }
    if angles_deg.len() < 6 {
        return Err(Error::Arity {
            needed: 6,
            got: angles_deg.len(),
        });
    }
    if angles_deg.iter().chain(intensities).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite polarization sample"));
    }
    let lo = angles_deg.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = angles_deg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 150.0 {
        return Err(Error::domain(format!("angles span {:.1}°, need at least 150°", hi - lo)));
    }

    let design = DMatrix::from_fn(angles_deg.len(), 3, |i, j| {
        let two_theta = 2.0 * angles_deg[i].to_radians();
        match j {
            0 => 1.0,
            1 => two_theta.cos(),
            _ => two_theta.sin(),
        }
    });
    let y = DVector::from_column_slice(intensities);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let rss = (&design * &coef - &y).norm_squared();
    let (mean, cos_part, sin_part) = (coef[0], coef[1], coef[2]);
    let modulation = cos_part.hypot(sin_part);
    let scale = y.amax().max(f64::MIN_POSITIVE);
    let defined = modulation > 1e-9 * scale && mean > 0.0;
    let theta0_deg = if defined {
        (0.5 * sin_part.atan2(cos_part).to_degrees()).rem_euclid(180.0)
    } else {
        f64::NAN
    };
    let visibility = if defined { (modulation / mean).clamp(0.0, 1.0) } else { 0.0 };
    Ok(PolarizationFit {
        theta0_deg,
        visibility,
        mean_intensity: mean,
        theta0_defined: defined,
        rss,
    })
}

pub const LINEWIDTH_EXPONENT_RANGE: (f64, f64) = (1.0, 7.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthLaw {
    pub gamma0_ghz: f64,
    /// Coefficient of Tⁿ in GHz/Kⁿ.
    pub coefficient: f64,
    pub exponent: f64,
    pub rss: f64,
}

impl LinewidthLaw {
    pub fn evaluate(&self, temperature_k: f64) -> f64 {
        self.gamma0_ghz + self.coefficient * temperature_k.powf(self.exponent)
    }
}

/// Best Γ₀ ≥ 0 and A for a fixed exponent.
fn linewidth_at_exponent(points: &[(f64, f64)], exponent: f64) -> LinewidthLaw {
    let t_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    // Work in (T/T_max)ⁿ to keep the 2×2 system well scaled.
    let xs: Vec<f64> = points.iter().map(|p| (p.0 / t_max).powf(exponent)).collect();
    let n = points.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| x * p.1).sum();
    let det = n * sxx - sx * sx;
    let (mut gamma0, mut slope) = if det.abs() > 1e-300 {
        ((sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det)
    } else {
        (sy / n, 0.0)
    };
    if gamma0 < 0.0 {
        gamma0 = 0.0;
        slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    }
    let rss = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (gamma0 + slope * x - p.1).powi(2))
        .sum();
    LinewidthLaw {
        gamma0_ghz: gamma0,
        coefficient: slope / t_max.powf(exponent),
        exponent,
        rss,
    }
}

/// Fit Γ(T) = Γ₀ + A·Tⁿ with Γ₀ ≥ 0 and n in [1, 7].
pub fn fit_linewidth_vs_temperature(points: &[(f64, f64)]) -> Result<LinewidthLaw> {
    if points.len() < 3 {
        return Err(Error::Arity {
            needed: 3,
            got: points.len(),
        });
    }
    if points.iter().any(|p| !(p.0 > 0.0) || !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::domain("temperatures must be positive and widths finite"));
    }
    let (lo, hi) = LINEWIDTH_EXPONENT_RANGE;
    let steps = 600;
    let grid_step = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|k| linewidth_at_exponent(points, lo + k as f64 * grid_step))
        .min_by(|a, b| a.rss.total_cmp(&b.rss))
        .expect("scan is non-empty");

    // Golden-section refinement inside the neighbouring grid cells.
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = (best.exponent - grid_step).max(lo);
    let mut b = (best.exponent + grid_step).min(hi);
    let rss_at = |n: f64| linewidth_at_exponent(points, n).rss;
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (rss_at(c), rss_at(d));
    for _ in 0..200 {
        if (b - a) < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = rss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = rss_at(d);
        }
    }
    let refined = linewidth_at_exponent(points, 0.5 * (a + b));
    Ok(if refined.rss <= best.rss { refined } else { best })
}
