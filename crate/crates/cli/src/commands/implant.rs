use serde::Serialize;

use pbv_core::transport::{
    depth_profile, simulate_implant, DamageMode, ImplantParams, Species, TargetMaterial,
};

use super::Context;
use crate::config::ImplantConfig;
use crate::error::{CliError, CliResult};
use crate::svg::{Plot, Series, Style, PALETTE};
use crate::ImplantArgs;

const DEFAULT_ENERGY_KEV: f64 = 350.0;
const DEFAULT_N_IONS: usize = 1000;
const DEFAULT_BIN_NM: f64 = 1.0;
const DEFAULT_DOSE_PER_CM2: f64 = 1e9;

#[derive(Serialize)]
struct ImplantReport {
    ion: Species,
    target: TargetMaterial,
    energy_kev: f64,
    n_ions: usize,
    seed: u64,
    mode: DamageMode,
    bin_nm: f64,
    dose_per_cm2: f64,
    mean_depth_nm: f64,
    straggle_nm: f64,
    backscattered: usize,
    backscatter_fraction: f64,
    mean_vacancies_per_ion: f64,
    peak_ion_density_cm3: f64,
    peak_vacancy_density_cm3: f64,
    stopping_out_of_range: bool,
    stop_depths_nm: Vec<f64>,
}

fn resolve_ion(args: &ImplantArgs, cfg: &ImplantConfig) -> CliResult<Species> {
    if let (Some(z), Some(mass)) = (args.ion_z, args.ion_mass) {
        return Ok(Species::new(z, mass)?);
    }
    match args.ion.as_deref().map(str::to_ascii_lowercase).as_deref() {
        Some("pb" | "lead") => Ok(Species::lead()),
        Some("n" | "nitrogen") => Ok(Species::nitrogen()),
        Some(other) => Err(CliError::input(format!("unknown ion {other:?} (pb, n, or --ion-z/--ion-mass)"))),
        None => match cfg.ion {
            Some(ion) => Ok(Species::new(ion.z, ion.mass_amu)?),
            None => Ok(Species::lead()),
        },
    }
}

fn resolve_target(args: &ImplantArgs, cfg: &ImplantConfig) -> CliResult<TargetMaterial> {
    if let Some(name) = &args.target {
        return TargetMaterial::preset(name)
            .ok_or_else(|| CliError::input(format!("unknown target material {name:?}")));
    }
    match &cfg.target {
        Some(spec) => spec.resolve(),
        None => Ok(TargetMaterial::diamond()),
    }
}

pub fn run(ctx: &Context, args: &ImplantArgs, cfg: &ImplantConfig) -> CliResult<()> {
    let ion = resolve_ion(args, cfg)?;
    let target = resolve_target(args, cfg)?;
    let energy_kev = args.energy_kev.or(cfg.energy_kev).unwrap_or(DEFAULT_ENERGY_KEV);
    let n_ions = args.n_ions.or(cfg.n_ions).unwrap_or(DEFAULT_N_IONS);
    let mode = args.mode.or(cfg.mode).unwrap_or(DamageMode::FullCascade);
    let bin_nm = args.bin_nm.or(cfg.bin_nm).unwrap_or(DEFAULT_BIN_NM);
    let dose_per_cm2 = args.dose.or(cfg.dose_per_cm2).unwrap_or(DEFAULT_DOSE_PER_CM2);

    let mut params = ImplantParams::new(ion, target, energy_kev * 1e3, n_ions, ctx.seed).with_mode(mode);
    if let Some(threads) = args.threads.or(cfg.threads) {
        params = params.with_threads(threads);
    }
    let result = simulate_implant(&params)?;
    let profile = depth_profile(&result, bin_nm, dose_per_cm2)?;

    let report = ImplantReport {
        ion,
        target,
        energy_kev,
        n_ions,
        seed: ctx.seed,
        mode,
        bin_nm,
        dose_per_cm2,
        mean_depth_nm: result.mean_depth,
        straggle_nm: result.straggle,
        backscattered: result.backscattered,
        backscatter_fraction: result.backscatter_fraction(),
        mean_vacancies_per_ion: result.mean_vacancies_per_ion(),
        peak_ion_density_cm3: profile.peak_ion_density(),
        peak_vacancy_density_cm3: profile.peak_vacancy_density(),
        stopping_out_of_range: result.stopping_out_of_range,
        stop_depths_nm: result.stop_depths.clone(),
    };

    let scaled = |ys: &[f64]| {
        let peak = ys.iter().cloned().fold(0.0, f64::max);
        let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
        profile.depth_nm.iter().zip(ys).map(|(&d, &y)| (d, y * scale)).collect::<Vec<_>>()
    };
    let plot = Plot::new(
        &format!("{energy_kev} keV ion implantation, {n_ions} ions"),
        "depth (nm)",
        "density / peak density",
    )
    .with(Series::new(
        format!("ions (peak {:.2e} cm^-3)", report.peak_ion_density_cm3),
        scaled(&profile.ion_density_cm3),
        PALETTE[0],
        Style::Filled,
    ))
    .with(Series::new(
        format!("vacancies (peak {:.2e} cm^-3)", report.peak_vacancy_density_cm3),
        scaled(&profile.vacancy_density_cm3),
        PALETTE[1],
        Style::Line,
    ));

    let written = vec![
        ctx.write("profile.csv", &profile.to_csv())?,
        ctx.write_json("implant.json", &report)?,
        ctx.write("profile.svg", &plot.render())?,
    ];
    ctx.log("implant", &written)
}
