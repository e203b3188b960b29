use serde::Serialize;

use pbv_core::photophysics::{
    build_level_diagram, synthesize_spectrum, transition_table, DefectModel, DefectPreset,
    EmissionLine, LevelDiagram, Sideband, WavelengthGrid,
};

use super::{read_input, Context};
use crate::config::SpectrumConfig;
use crate::error::{CliError, CliResult};
use crate::svg::{Plot, Series, Style, PALETTE};
use crate::SpectrumArgs;

const DEFAULT_PRESET: &str = "pbv_theory";
const DEFAULT_TEMPERATURE_K: f64 = 4.0;
const DEFAULT_LINEWIDTH_GHZ: f64 = 500.0;
const DEFAULT_STEP_NM: f64 = 0.01;
const GRID_MARGIN_NM: f64 = 15.0;

#[derive(Serialize)]
struct ModelSummary {
    name: String,
    zpl_energy_ev: f64,
    delta_gs_ev: f64,
    delta_es_ev: f64,
    dwf: f64,
}

#[derive(Serialize)]
struct TransitionRow {
    label: char,
    energy_ev: f64,
    wavelength_nm: f64,
    polarization: pbv_core::photophysics::Polarization,
    dipole_weight: f64,
    area: f64,
    zpl_area: f64,
}

#[derive(Serialize)]
struct TransitionsReport {
    model: ModelSummary,
    temperature_k: f64,
    linewidth_ghz: f64,
    occupation_lower: f64,
    occupation_upper: f64,
    levels: LevelDiagram,
    transitions: Vec<TransitionRow>,
    peaks_above_1pct: usize,
    sideband: Option<Sideband>,
}

fn resolve_model(args: &SpectrumArgs, cfg: &SpectrumConfig) -> CliResult<DefectModel> {
    if let Some(path) = &args.model {
        let text = String::from_utf8(read_input(path)?)
            .map_err(|_| CliError::input(format!("{} is not UTF-8", path.display())))?;
        let presets = DefectPreset::parse_json(&text)?;
        let [preset] = presets.as_slice() else {
            return Err(CliError::input(format!("{} must hold exactly one model", path.display())));
        };
        return Ok(preset.to_model());
    }
    if let (None, Some(model)) = (&args.preset, &cfg.model) {
        return Ok(model.to_model());
    }
    let name = args.preset.as_deref().or(cfg.preset.as_deref()).unwrap_or(DEFAULT_PRESET);
    DefectModel::preset(name).ok_or_else(|| {
        CliError::input(format!(
            "unknown preset {name:?}; available: {}",
            DefectModel::preset_names().join(", ")
        ))
    })
}

pub fn run(ctx: &Context, args: &SpectrumArgs, cfg: &SpectrumConfig) -> CliResult<()> {
    let model = resolve_model(args, cfg)?;
    model.validate()?;
    let temperature_k = args.temperature.or(cfg.temperature_k).unwrap_or(DEFAULT_TEMPERATURE_K);
    let linewidth_ghz = args.linewidth_ghz.or(cfg.linewidth_ghz).unwrap_or(DEFAULT_LINEWIDTH_GHZ);
    let step_nm = args.step_nm.or(cfg.step_nm).unwrap_or(DEFAULT_STEP_NM);
    let sideband = if args.sideband {
        Some(cfg.sideband.unwrap_or_default())
    } else {
        cfg.sideband
    };

    let diagram = build_level_diagram(&model)?;
    let table = transition_table(&diagram, &model)?;
    let grid = match (args.start_nm.or(cfg.start_nm), args.stop_nm.or(cfg.stop_nm)) {
        (Some(start), Some(stop)) => WavelengthGrid::new(start, stop, step_nm)?,
        (None, None) => WavelengthGrid::covering(&table, GRID_MARGIN_NM, step_nm)?,
        _ => return Err(CliError::input("give both start and stop wavelengths or neither")),
    };
    let synth = synthesize_spectrum(&model, temperature_k, linewidth_ghz, &grid, sideband)?;

    let rows = synth
        .lines
        .iter()
        .map(|l: &EmissionLine| TransitionRow {
            label: l.transition.label.as_char(),
            energy_ev: l.transition.energy,
            wavelength_nm: l.transition.wavelength,
            polarization: l.transition.polarization,
            dipole_weight: l.transition.weight,
            area: l.area,
            zpl_area: l.zpl_area,
        })
        .collect();
    let report = TransitionsReport {
        model: ModelSummary {
            name: model.name.clone(),
            zpl_energy_ev: model.zpl_energy,
            delta_gs_ev: model.delta_gs,
            delta_es_ev: model.delta_es,
            dwf: model.dwf,
        },
        temperature_k,
        linewidth_ghz,
        occupation_lower: synth.occupation.0,
        occupation_upper: synth.occupation.1,
        levels: diagram,
        transitions: rows,
        peaks_above_1pct: synth.spectrum.local_maxima(0.01).len(),
        sideband,
    };

    let w = synth.spectrum.wavelengths();
    let zip = |ys: &[f64]| w.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>();
    let mut plot = Plot::new(
        &format!("{} emission at {temperature_k} K", model.name),
        "wavelength (nm)",
        "intensity (arb. units per nm)",
    )
    .with(Series::new("axial (filled)", zip(&synth.axial), PALETTE[0], Style::Filled))
    .with(Series::new("perpendicular", zip(&synth.perpendicular), PALETTE[1], Style::Line));
    if sideband.is_some() {
        plot = plot.with(Series::new("phonon sideband", zip(&synth.sideband), PALETTE[2], Style::Dashed));
    }
    let plot = plot.with(Series::new("total", zip(synth.spectrum.intensities()), PALETTE[3], Style::Dashed));

    let written = vec![
        ctx.write("spectrum.csv", &synth.spectrum.to_csv())?,
        ctx.write_json("transitions.json", &report)?,
        ctx.write("spectrum.svg", &plot.render())?,
    ];
    ctx.log("spectrum", &written)
}
