use serde::Serialize;

use pbv_core::spectral::{
    estimate_strain, shift_to_frequency, DEFAULT_STRESS_PER_THZ_GPA, DIAMOND_YOUNGS_MODULUS_GPA,
};

use super::versioned_json;
use crate::config::StrainConfig;
use crate::error::{CliError, CliResult};
use crate::StrainArgs;

#[derive(Serialize)]
struct StrainReport {
    lambda0_nm: f64,
    shift_nm: f64,
    delta_nu_thz: f64,
    stress_gpa: f64,
    strain: f64,
}

const USAGE: &str = "usage: pbv strain --lambda0-nm <NM> --shift-nm <NM>";

pub fn run(args: &StrainArgs, cfg: &StrainConfig) -> CliResult<()> {
    let (Some(lambda0_nm), Some(shift_nm)) = (args.lambda0_nm.or(cfg.lambda0_nm), args.shift_nm.or(cfg.shift_nm)) else {
        return Err(CliError::input(format!("missing reference wavelength or shift\n{USAGE}")));
    };
    let delta_nu_thz = shift_to_frequency(lambda0_nm, shift_nm)?;
    let estimate = estimate_strain(
        delta_nu_thz.abs(),
        args.stress_per_thz_gpa.or(cfg.stress_per_thz_gpa).unwrap_or(DEFAULT_STRESS_PER_THZ_GPA),
        args.youngs_modulus_gpa.or(cfg.youngs_modulus_gpa).unwrap_or(DIAMOND_YOUNGS_MODULUS_GPA),
    )?;
    let report = StrainReport {
        lambda0_nm,
        shift_nm,
        delta_nu_thz,
        stress_gpa: estimate.stress_gpa,
        strain: estimate.strain,
    };
    print!("{}", versioned_json(&report)?);
    Ok(())
}
