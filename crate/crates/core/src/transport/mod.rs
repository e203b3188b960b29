//! Binary-collision Monte Carlo of ion implantation into an amorphous,
//! single-element target.
//!
//! Lengths are in nm, energies in eV, masses in amu.

mod cascade;
mod profile;
mod scattering;
mod screening;
mod stopping;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cascade::{simulate_implant, DamageMode, ImplantParams, ImplantResult, ScatteringMethod};
pub use profile::{depth_profile, DepthProfile, DepthTally, TALLY_RESOLUTION_NM, VACANCY_SCALE};
pub use scattering::{rutherford_angle, scattering_angle, scattering_angle_with, ScatteringTable};
pub use screening::{
    screening_function, universal_screening_length, Screening, BOHR_RADIUS_NM, COULOMB_EV_NM,
};
pub use stopping::{
    damage_energy, electronic_stopping, lindhard_scharff_coefficient, lindhard_scharff_limit_ev,
    ElectronicStopping,
};


/// Atomic species of a projectile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Species {
    pub z: f64,
    pub mass_amu: f64,
}

impl Species {
    pub fn new(z: f64, mass_amu: f64) -> Result<Self> {
        if !(z >= 1.0) || !(mass_amu > 0.0) {
            return Err(Error::Validation(format!(
                "species needs z >= 1 and positive mass, got z = {z}, mass = {mass_amu}"
            )));
        }
        Ok(Species { z, mass_amu })
    }

    pub fn lead() -> Self {
        Species {
            z: 82.0,
            mass_amu: 207.2,
        }
    }

    pub fn nitrogen() -> Self {
        Species {
            z: 7.0,
            mass_amu: 14.007,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetMaterial {
    pub z: f64,
    pub mass_amu: f64,
    /// atoms/nm³
    pub number_density: f64,
    pub displacement_energy: f64,
    pub surface_binding: f64,
}

impl TargetMaterial {
    /// Diamond: 3.51 g/cm³, E_d = 37.5 eV, surface binding 7.41 eV.
    pub fn diamond() -> Self {
        TargetMaterial {
            z: 6.0,
            mass_amu: 12.011,
            number_density: 176.0,
            displacement_energy: 37.5,
            surface_binding: 7.41,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "diamond" => Some(Self::diamond()),
            _ => None,
        }
    }

    pub fn species(&self) -> Species {
        Species {
            z: self.z,
            mass_amu: self.mass_amu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.number_density > 0.0) {
            return Err(Error::Validation(format!(
                "target density must be positive, got {}",
                self.number_density
            )));
        }
        if !(self.displacement_energy > 0.0) {
            return Err(Error::Validation(format!(
                "displacement energy must be positive, got {}",
                self.displacement_energy
            )));
        }
        if !(self.z >= 1.0) || !(self.mass_amu > 0.0) || !(self.surface_binding >= 0.0) {
            return Err(Error::Validation("invalid target species".into()));
        }
        Ok(())
    }

    /// Mean free flight length n^(-1/3), nm.
    pub fn flight_length(&self) -> f64 {
        self.number_density.powf(-1.0 / 3.0)
    }

    /// Maximum impact parameter (π L n)^(-1/2), nm.
    pub fn max_impact_parameter(&self) -> f64 {
        (std::f64::consts::PI * self.flight_length() * self.number_density).powf(-0.5)
    }
}

/// A moving atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub species: Species,
    pub energy: f64,
    pub position: [f64; 3],
    pub direction: [f64; 3],
}

impl Particle {
    pub fn depth(&self) -> f64 {
        self.position[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond_geometry() {
        let d = TargetMaterial::diamond();
        assert!((d.flight_length() - 0.178_41).abs() < 1e-4);
        assert!((d.max_impact_parameter() - 0.100_8).abs() < 1e-3);
        d.validate().unwrap();
    }

    #[test]
    fn invalid_targets_rejected() {
        let mut d = TargetMaterial::diamond();
        d.number_density = 0.0;
        assert!(d.validate().is_err());
        let mut d = TargetMaterial::diamond();
        d.displacement_energy = -1.0;
        assert!(d.validate().is_err());
        assert!(TargetMaterial::preset("graphite").is_none());
    }
}
