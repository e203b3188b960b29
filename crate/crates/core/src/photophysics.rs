//! Four-line emission model of a split-vacancy group-IV center.
//!
//! Both the excited (e_u) and ground (e_g) orbital doublets are split by
//! spin-orbit coupling. In the hole picture the optical transitions run
//! from an e_u level to an e_g level, giving four zero-phonon lines:
//!
//! ```text
//!   A = E_zpl + Δ_ES + Δ_GS/2     (upper e_u → lower e_g)
//!   B = E_zpl + Δ_ES − Δ_GS/2     (upper e_u → upper e_g)
//!   C = E_zpl + Δ_GS/2            (lower e_u → lower e_g)
//!   D = E_zpl − Δ_GS/2            (lower e_u → upper e_g)
//! ```
//!
//! `E_zpl` is the centroid of the C/D doublet, the pair seen at low
//! temperature. Excited-level populations follow a two-level Boltzmann
//! distribution. B and C are polarized along the defect axis, A and D
//! perpendicular to it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, SpectrumMeta};
use crate::units::{ghz_to_ev, nm_to_ev, ev_to_nm, HC_EV_NM, K_B_EV_PER_K};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransitionLabel {
    A,
    B,
    C,
    D,
}

impl TransitionLabel {
    pub const ALL: [TransitionLabel; 4] = [
        TransitionLabel::A,
        TransitionLabel::B,
        TransitionLabel::C,
        TransitionLabel::D,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            TransitionLabel::A => 'A',
            TransitionLabel::B => 'B',
            TransitionLabel::C => 'C',
            TransitionLabel::D => 'D',
        }
    }

    pub fn polarization(self) -> Polarization {
        match self {
            TransitionLabel::B | TransitionLabel::C => Polarization::Axial,
            TransitionLabel::A | TransitionLabel::D => Polarization::Perpendicular,
        }
    }

    /// A and B start in the upper excited orbital.
    pub fn from_upper_excited(self) -> bool {
        matches!(self, TransitionLabel::A | TransitionLabel::B)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Axial,
    Perpendicular,
}

/// Relative squared dipole matrix elements, keyed by transition label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleWeights([f64; 4]);

impl DipoleWeights {
    pub fn uniform() -> Self {
        DipoleWeights([1.0; 4])
    }

    /// Weights in A, B, C, D order.
    pub fn from_array(weights: [f64; 4]) -> Self {
        DipoleWeights(weights)
    }

    /// Build from (label, weight) pairs in any order; missing labels get 0.
    pub fn from_pairs<I: IntoIterator<Item = (TransitionLabel, f64)>>(pairs: I) -> Self {
        let mut w = [0.0; 4];
        for (label, weight) in pairs {
            w[label.index()] = weight;
        }
        DipoleWeights(w)
    }

    pub fn get(&self, label: TransitionLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectModel {
    pub name: String,
    /// Centroid of the C/D doublet, eV.
    pub zpl_energy: f64,
    /// Ground-state orbital splitting, eV.
    pub delta_gs: f64,
    /// Excited-state orbital splitting, eV.
    pub delta_es: f64,
    pub dipole_weights: DipoleWeights,
    pub dwf: f64,
    /// Unit vector along the defect [111] axis.
    pub axis: [f64; 3],
}

impl DefectModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.zpl_energy > 0.0) || !self.zpl_energy.is_finite() {
            return Err(Error::InvalidModel(format!(
                "zpl energy must be positive, got {}",
                self.zpl_energy
            )));
        }
        if !(self.delta_gs > 0.0) || !(self.delta_es > 0.0) {
            return Err(Error::InvalidModel(format!(
                "splittings must be positive, got Δ_GS = {}, Δ_ES = {}",
                self.delta_gs, self.delta_es
            )));
        }
        let w = self.dipole_weights.as_array();
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || w.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidModel(format!(
                "dipole weights must be non-negative with one positive, got {w:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.dwf) {
            return Err(Error::InvalidModel(format!("dwf {} outside [0, 1]", self.dwf)));
        }
        let norm: f64 = self.axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("axis is not a unit vector (|axis| = {norm})")));
        }
        Ok(())
    }

    pub fn preset(name: &str) -> Option<DefectModel> {
        DefectPreset::shipped()
            .into_iter()
            .find(|p| p.name == name)
            .map(|p| p.to_model())
    }

    pub fn preset_names() -> Vec<String> {
        DefectPreset::shipped().into_iter().map(|p| p.name).collect()
    }
}

/// JSON form of a defect preset. Energies in meV, ZPL as a wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectPreset {
    pub name: String,
    pub zpl_nm: f64,
    pub delta_gs_mev: f64,
    pub delta_es_mev: f64,
    pub dipole_weights: [f64; 4],
    pub dwf: f64,
    /// A second quoted value of the ground splitting, kept for reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quoted_gs_splitting_thz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

const SHIPPED_PRESETS: &str = include_str!("../data/presets.json");

impl DefectPreset {
    pub fn shipped() -> Vec<DefectPreset> {
        serde_json::from_str(SHIPPED_PRESETS).expect("shipped presets are valid JSON")
    }

    /// Parse one preset object or an array of them.
    pub fn parse_json(text: &str) -> Result<Vec<DefectPreset>> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        let presets = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|p| vec![p])
        };
        presets.map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn to_model(&self) -> DefectModel {
        let inv_sqrt3 = 1.0 / 3f64.sqrt();
        DefectModel {
            name: self.name.clone(),
            zpl_energy: nm_to_ev(self.zpl_nm),
            delta_gs: self.delta_gs_mev * 1e-3,
            delta_es: self.delta_es_mev * 1e-3,
            dipole_weights: DipoleWeights::from_array(self.dipole_weights),
            dwf: self.dwf,
            axis: [inv_sqrt3; 3],
        }
    }
}

/// Orbital energies in the hole picture, eV. Ground levels are referenced
/// to the lower e_g orbital.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagram {
    pub ground_lower: f64,
    pub ground_upper: f64,
    pub excited_lower: f64,
    pub excited_upper: f64,
    pub hole_picture: bool,
}

pub fn build_level_diagram(model: &DefectModel) -> Result<LevelDiagram> {
    model.validate()?;
    let excited_lower = model.zpl_energy + 0.5 * model.delta_gs;
    Ok(LevelDiagram {
        ground_lower: 0.0,
        ground_upper: model.delta_gs,
        excited_lower,
        excited_upper: excited_lower + model.delta_es,
        hole_picture: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub label: TransitionLabel,
    pub energy: f64,
    pub wavelength: f64,
    pub polarization: Polarization,
    pub weight: f64,
}

/// The four zero-phonon lines, highest energy first.
pub fn transition_table(diagram: &LevelDiagram, model: &DefectModel) -> Result<[Transition; 4]> {
    model.validate()?;
    if !(diagram.ground_upper > diagram.ground_lower) || !(diagram.excited_upper > diagram.excited_lower) {
        return Err(Error::InvalidModel("level diagram splittings must be positive".into()));
    }
    let make = |label: TransitionLabel| {
        let excited = if label.from_upper_excited() {
            diagram.excited_upper
        } else {
            diagram.excited_lower
        };
        let ground = match label {
            TransitionLabel::A | TransitionLabel::C => diagram.ground_lower,
            TransitionLabel::B | TransitionLabel::D => diagram.ground_upper,
        };
        let energy = excited - ground;
        Transition {
            label,
            energy,
            wavelength: ev_to_nm(energy),
            polarization: label.polarization(),
            weight: model.dipole_weights.get(label),
        }
    };
    let mut table = TransitionLabel::ALL.map(make);
    table.sort_by(|a, b| b.energy.total_cmp(&a.energy).then(a.label.cmp(&b.label)));
    Ok(table)
}

/// Boltzmann populations (lower, upper) of the split excited doublet.
pub fn thermal_occupation(delta_es: f64, temperature_k: f64) -> Result<(f64, f64)> {
    if temperature_k.is_nan() || temperature_k < 0.0 {
        return Err(Error::domain(format!(
            "temperature must be non-negative, got {temperature_k}"
        )));
    }
    if temperature_k == 0.0 {
        return Ok((1.0, 0.0));
    }
    let boltzmann = (-delta_es / (K_B_EV_PER_K * temperature_k)).exp();
    let upper = boltzmann / (1.0 + boltzmann);
    Ok((1.0 - upper, upper))
}

/// Uniform wavelength sampling, inclusive of `start_nm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub step_nm: f64,
}

impl WavelengthGrid {
    pub fn new(start_nm: f64, stop_nm: f64, step_nm: f64) -> Result<Self> {
        if !(start_nm > 0.0) || !(stop_nm > start_nm) || !(step_nm > 0.0) {
            return Err(Error::domain(format!(
                "invalid grid {start_nm}..{stop_nm} step {step_nm}"
            )));
        }
        Ok(WavelengthGrid {
            start_nm,
            stop_nm,
            step_nm,
        })
    }

    /// Grid spanning all four lines with `margin_nm` on either side.
    pub fn covering(transitions: &[Transition], margin_nm: f64, step_nm: f64) -> Result<Self> {
        let lo = transitions.iter().map(|t| t.wavelength).fold(f64::INFINITY, f64::min);
        let hi = transitions.iter().map(|t| t.wavelength).fold(0.0, f64::max);
        WavelengthGrid::new((lo - margin_nm).max(step_nm), hi + margin_nm, step_nm)
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop_nm - self.start_nm) / self.step_nm + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start_nm + i as f64 * self.step_nm).collect()
    }
}

/// Phonon sideband: a Gaussian red-shifted from each line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sideband {
    pub phonon_energy_ev: f64,
    /// Gaussian standard deviation, eV.
    pub width_ev: f64,
}

impl Default for Sideband {
    fn default() -> Self {
        Sideband {
            phonon_energy_ev: 0.060,
            width_ev: 0.020,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionLine {
    pub transition: Transition,
    /// Total emitted area, weight × excited-level population.
    pub area: f64,
    /// Area remaining in the zero-phonon line.
    pub zpl_area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpectrum {
    pub spectrum: Spectrum,
    pub axial: Vec<f64>,
    pub perpendicular: Vec<f64>,
    pub sideband: Vec<f64>,
    pub lines: Vec<EmissionLine>,
    pub occupation: (f64, f64),
}

/// Lorentzian line density per nm for a line of unit area centered at
/// `center_ev` with energy FWHM `fwhm_ev`.
fn lorentzian_per_nm(wavelength_nm: f64, center_ev: f64, fwhm_ev: f64) -> f64 {
    let e = HC_EV_NM / wavelength_nm;
    let half = 0.5 * fwhm_ev;
    let density_ev = half / PI / ((e - center_ev).powi(2) + half * half);
    density_ev * HC_EV_NM / (wavelength_nm * wavelength_nm)
}

fn gaussian_per_nm(wavelength_nm: f64, center_ev: f64, sigma_ev: f64) -> f64 {
    let e = HC_EV_NM / wavelength_nm;
    let z = (e - center_ev) / sigma_ev;
    let density_ev = (-0.5 * z * z).exp() / (sigma_ev * (2.0 * PI).sqrt());
    density_ev * HC_EV_NM / (wavelength_nm * wavelength_nm)
}

/// Temperature-dependent emission spectrum, one Lorentzian per transition.
pub fn synthesize_spectrum(
    model: &DefectModel,
    temperature_k: f64,
    linewidth_ghz: f64,
    grid: &WavelengthGrid,
    sideband: Option<Sideband>,
) -> Result<SyntheticSpectrum> {
    if !(linewidth_ghz > 0.0) || !linewidth_ghz.is_finite() {
        return Err(Error::domain(format!("linewidth must be positive, got {linewidth_ghz}")));
    }
    let diagram = build_level_diagram(model)?;
    let table = transition_table(&diagram, model)?;
    for t in &table {
        if t.wavelength < grid.start_nm || t.wavelength > grid.stop_nm {
            return Err(Error::Coverage {
                label: t.label.as_char(),
                wavelength_nm: t.wavelength,
                lo_nm: grid.start_nm,
                hi_nm: grid.stop_nm,
            });
        }
    }
    if let Some(sb) = sideband {
        if !(sb.phonon_energy_ev >= 0.0) || !(sb.width_ev > 0.0) {
            return Err(Error::domain("sideband needs non-negative shift and positive width"));
        }
    }

    let (p_lower, p_upper) = thermal_occupation(model.delta_es, temperature_k)?;
    let fwhm_ev = ghz_to_ev(linewidth_ghz);
    let zpl_fraction = if sideband.is_some() { model.dwf } else { 1.0 };
    let lines: Vec<EmissionLine> = table
        .iter()
        .map(|t| {
            let occ = if t.label.from_upper_excited() { p_upper } else { p_lower };
            let area = t.weight * occ;
            EmissionLine {
                transition: *t,
                area,
                zpl_area: area * zpl_fraction,
            }
        })
        .collect();

    let points = grid.points();
    let mut axial = vec![0.0; points.len()];
    let mut perpendicular = vec![0.0; points.len()];
    let mut phonon = vec![0.0; points.len()];
    for line in lines.iter().filter(|l| l.area > 0.0) {
        let target = match line.transition.polarization {
            Polarization::Axial => &mut axial,
            Polarization::Perpendicular => &mut perpendicular,
        };
        for (out, &w) in target.iter_mut().zip(&points) {
            *out += line.zpl_area * lorentzian_per_nm(w, line.transition.energy, fwhm_ev);
        }
        if let Some(sb) = sideband {
            let side_area = line.area - line.zpl_area;
            let center = line.transition.energy - sb.phonon_energy_ev;
            for (out, &w) in phonon.iter_mut().zip(&points) {
                *out += side_area * gaussian_per_nm(w, center, sb.width_ev);
            }
        }
    }
    let total: Vec<f64> = (0..points.len())
        .map(|i| axial[i] + perpendicular[i] + phonon[i])
        .collect();
    if let Some(i) = total.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "synthesized intensity is not finite at {:.4} nm (linewidth {linewidth_ghz} GHz)",
            points[i]
        )));
    }
    if lines.iter().any(|l| l.area > 0.0) && total.iter().all(|v| *v == 0.0) {
        return Err(Error::Numeric(format!(
            "linewidth {linewidth_ghz} GHz underflows on a {} nm grid",
            grid.step_nm
        )));
    }
    let meta = SpectrumMeta {
        temperature_k: temperature_k.is_finite().then_some(temperature_k),
        ..SpectrumMeta::default()
    };
    Ok(SyntheticSpectrum {
        spectrum: Spectrum::new(points, total, meta)?,
        axial,
        perpendicular,
        sideband: phonon,
        lines,
        occupation: (p_lower, p_upper),
    })
}
