use serde::{Deserialize, Serialize};

use super::cascade::ImplantResult;
use crate::error::{Error, Result};

/// Fixed-point units per vacancy in integer tallies.
pub const VACANCY_SCALE: u64 = 1000;

/// Resolution of the internal vacancy depth tally, nm.
pub const TALLY_RESOLUTION_NM: f64 = 0.1;

/// Integer vacancy counts on a uniform 0.1 nm depth grid, in units of
/// 1/`VACANCY_SCALE` vacancy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepthTally {
    counts: Vec<u64>,
}

impl DepthTally {
    pub(crate) fn bin_of(depth: f64) -> u32 {
        (depth.max(0.0) / TALLY_RESOLUTION_NM) as u32
    }

    pub(crate) fn add(&mut self, bin: u32, quanta: u64) {
        let i = bin as usize;
        if i >= self.counts.len() {
            self.counts.resize(i + 1, 0);
        }
        self.counts[i] += quanta;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_vacancies(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / VACANCY_SCALE as f64
    }

    /// Depth of the deepest non-empty bin's upper edge, nm.
    pub fn max_depth(&self) -> f64 {
        self.counts
            .iter()
            .rposition(|&c| c > 0)
            .map_or(0.0, |i| (i + 1) as f64 * TALLY_RESOLUTION_NM)
    }
}

/// Volume densities versus depth for a given areal dose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthProfile {
    pub bin_nm: f64,
    pub dose_per_cm2: f64,
    /// Bin centers, nm.
    pub depth_nm: Vec<f64>,
    pub ion_density_cm3: Vec<f64>,
    pub vacancy_density_cm3: Vec<f64>,
}

impl DepthProfile {
    pub fn peak_vacancy_density(&self) -> f64 {
        self.vacancy_density_cm3.iter().cloned().fold(0.0, f64::max)
    }

    pub fn peak_ion_density(&self) -> f64 {
        self.ion_density_cm3.iter().cloned().fold(0.0, f64::max)
    }

    /// `depth_nm,ion_density_cm3,vacancy_density_cm3` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth_nm,ion_density_cm3,vacancy_density_cm3\n");
        for i in 0..self.depth_nm.len() {
            out.push_str(&format!(
                "{},{:e},{:e}\n",
                self.depth_nm[i], self.ion_density_cm3[i], self.vacancy_density_cm3[i]
            ));
        }
        out
    }
}

/// Bin stopped ions and vacancies and scale to densities at `dose_per_cm2`.
///
/// density = (fraction of the n_ions histories in the bin / bin width) × dose.
pub fn depth_profile(result: &ImplantResult, bin_nm: f64, dose_per_cm2: f64) -> Result<DepthProfile> {
    if !(bin_nm >= TALLY_RESOLUTION_NM) || !bin_nm.is_finite() {
        return Err(Error::domain(format!(
            "bin width must be at least {TALLY_RESOLUTION_NM} nm, got {bin_nm}"
        )));
    }
    if !(dose_per_cm2 > 0.0) || !dose_per_cm2.is_finite() {
        return Err(Error::domain(format!("dose must be positive, got {dose_per_cm2}")));
    }
    if result.n_ions == 0 || (result.stop_depths.is_empty() && result.vacancy_tally.counts().is_empty()) {
        return Err(Error::domain("implant result holds no stopped ions or vacancies"));
    }

    let max_ion = result.stop_depths.iter().cloned().fold(0.0, f64::max);
    let max_depth = max_ion.max(result.vacancy_tally.max_depth());
    let n_bins = (max_depth / bin_nm).floor() as usize + 1;

    let mut ions = vec![0u64; n_bins];
    for &d in &result.stop_depths {
        ions[((d / bin_nm) as usize).min(n_bins - 1)] += 1;
    }
    let mut vacancies = vec![0u64; n_bins];
    for (i, &q) in result.vacancy_tally.counts().iter().enumerate() {
        let center = (i as f64 + 0.5) * TALLY_RESOLUTION_NM;
        vacancies[((center / bin_nm) as usize).min(n_bins - 1)] += q;
    }

    let n = result.n_ions as f64;
    let bin_cm = bin_nm * 1e-7;
    let scale = dose_per_cm2 / (n * bin_cm);
    Ok(DepthProfile {
        bin_nm,
        dose_per_cm2,
        depth_nm: (0..n_bins).map(|i| (i as f64 + 0.5) * bin_nm).collect(),
        ion_density_cm3: ions.iter().map(|&c| c as f64 * scale).collect(),
        vacancy_density_cm3: vacancies
            .iter()
            .map(|&q| q as f64 / VACANCY_SCALE as f64 * scale)
            .collect(),
    })
}
