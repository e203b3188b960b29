//! Physical constants and unit conversions shared by every module.

/// Photon energy-wavelength product, eV·nm.
pub const HC_EV_NM: f64 = 1239.842;

/// Boltzmann constant, eV/K.
pub const K_B_EV_PER_K: f64 = 8.617333e-5;

/// Speed of light, nm·THz.
pub const C_NM_THZ: f64 = 299_792.458;

/// Planck constant, eV/THz.
pub const H_EV_PER_THZ: f64 = 4.135_667_696e-3;

pub fn ev_to_nm(energy_ev: f64) -> f64 {
    HC_EV_NM / energy_ev
}

pub fn nm_to_ev(wavelength_nm: f64) -> f64 {
    HC_EV_NM / wavelength_nm
}

pub fn ghz_to_ev(freq_ghz: f64) -> f64 {
    freq_ghz * 1e-3 * H_EV_PER_THZ
}

pub fn ev_to_ghz(energy_ev: f64) -> f64 {
    energy_ev / H_EV_PER_THZ * 1e3
}
