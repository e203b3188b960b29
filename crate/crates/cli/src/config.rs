//! JSON run configuration. Every field is optional; command-line flags
//! take precedence over values read from the file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use pbv_core::photophysics::{DefectPreset, Sideband};
use pbv_core::transport::{DamageMode, Species, TargetMaterial};

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub model: Option<DefectPreset>,
    pub temperature_k: Option<f64>,
    pub linewidth_ghz: Option<f64>,
    pub start_nm: Option<f64>,
    pub stop_nm: Option<f64>,
    pub step_nm: Option<f64>,
    pub sideband: Option<Sideband>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub regions: Option<Vec<pbv_core::spectral::Region>>,
    pub bin_nm: Option<f64>,
    pub prominence_noise: Option<f64>,
    pub prominence_counts: Option<f64>,
    pub min_separation_nm: Option<f64>,
    pub baseline_window_nm: Option<f64>,
    pub shape: Option<pbv_core::spectral::LineShape>,
    pub independence_tol: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Config {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub rho: Option<f64>,
    pub norm_min_delay_ns: Option<f64>,
    pub dead_window_ns: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetRef {
    pub preset: String,
}

/// `{"preset": "diamond"}` or a full material description.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Preset(PresetRef),
    Explicit(TargetMaterial),
}

impl TargetSpec {
    pub fn resolve(&self) -> CliResult<TargetMaterial> {
        let target = match self {
            TargetSpec::Preset(r) => TargetMaterial::preset(&r.preset)
                .ok_or_else(|| CliError::input(format!("unknown target material {:?}", r.preset)))?,
            TargetSpec::Explicit(t) => *t,
        };
        target.validate().map_err(|e| CliError::input(format!("invalid target material: {e}")))?;
        Ok(target)
    }
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplantConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub ion: Option<Species>,
    pub target: Option<TargetSpec>,
    pub energy_kev: Option<f64>,
    pub n_ions: Option<usize>,
    pub mode: Option<DamageMode>,
    pub bin_nm: Option<f64>,
    pub dose_per_cm2: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainConfig {
    pub lambda0_nm: Option<f64>,
    pub shift_nm: Option<f64>,
    pub stress_per_thz_gpa: Option<f64>,
    pub youngs_modulus_gpa: Option<f64>,
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
}
