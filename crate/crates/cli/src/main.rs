use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod svg;

use commands::Context;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pbv", version, about = "Group-IV color center spectra, surveys, g2 fits and ion implantation")]
struct Cli {
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for stochastic simulations.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// JSON file with parameters for the chosen subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a temperature-dependent emission spectrum.
    Spectrum(SpectrumArgs),
    /// Detect, fit and classify lines across a directory of spectra.
    Analyze(AnalyzeArgs),
    /// Fit a coincidence histogram with the two-level g2 model.
    G2(G2Args),
    /// Monte Carlo ion implantation with vacancy profiles.
    Implant(ImplantArgs),
    /// Convert a line shift to frequency, stress and strain.
    Strain(StrainArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Shipped defect preset (pbv_theory, pbv_experiment, siv, gev, snv).
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON file describing a defect model.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "K")]
    pub temperature: Option<f64>,
    /// Lorentzian FWHM of each line.
    #[arg(long, value_name = "GHZ")]
    pub linewidth_ghz: Option<f64>,
    #[arg(long)]
    pub start_nm: Option<f64>,
    #[arg(long)]
    pub stop_nm: Option<f64>,
    #[arg(long)]
    pub step_nm: Option<f64>,
    /// Add a Gaussian phonon sideband holding 1 − DWF of each line.
    #[arg(long)]
    pub sideband: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory of spectrum CSV files.
    #[arg(long, value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// JSON region table: [{label, lo_nm, hi_nm}, ...].
    #[arg(long, value_name = "FILE")]
    pub regions: Option<PathBuf>,
    /// Histogram bin width.
    #[arg(long)]
    pub bin_nm: Option<f64>,
    /// Minimum prominence in units of the noise scale.
    #[arg(long, conflicts_with = "prominence_counts")]
    pub prominence_noise: Option<f64>,
    /// Minimum prominence in counts.
    #[arg(long)]
    pub prominence_counts: Option<f64>,
    #[arg(long)]
    pub min_separation_nm: Option<f64>,
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<pbv_core::spectral::LineShape>,
    /// Largest |P(i|j) − P(i)| still called independent.
    #[arg(long)]
    pub independence_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct G2Args {
    /// Histogram CSV with header delay_ns,coincidences.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Signal fraction S/(S+B) for background correction.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Bins with |delay| at least this large set the g2 = 1 level.
    #[arg(long, value_name = "NS")]
    pub norm_min_delay_ns: Option<f64>,
    /// Exclude bins with |delay| below this from the fit.
    #[arg(long, value_name = "NS")]
    pub dead_window_ns: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ImplantArgs {
    /// Ion by name (pb, n); overridden by --ion-z/--ion-mass.
    #[arg(long)]
    pub ion: Option<String>,
    #[arg(long, requires = "ion_mass")]
    pub ion_z: Option<f64>,
    #[arg(long, requires = "ion_z")]
    pub ion_mass: Option<f64>,
    /// Target preset name.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub energy_kev: Option<f64>,
    #[arg(long)]
    pub n_ions: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<pbv_core::transport::DamageMode>,
    #[arg(long)]
    pub bin_nm: Option<f64>,
    #[arg(long, value_name = "CM^-2")]
    pub dose: Option<f64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StrainArgs {
    /// Reference wavelength.
    #[arg(long)]
    pub lambda0_nm: Option<f64>,
    /// Wavelength shift.
    #[arg(long, allow_hyphen_values = true)]
    pub shift_nm: Option<f64>,
    #[arg(long)]
    pub stress_per_thz_gpa: Option<f64>,
    #[arg(long)]
    pub youngs_modulus_gpa: Option<f64>,
}

fn parse_shape(s: &str) -> Result<pbv_core::spectral::LineShape, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown line shape {s:?} (lorentzian, gaussian)"))
}

fn parse_mode(s: &str) -> Result<pbv_core::transport::DamageMode, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown damage mode {s:?} (full_cascade, kinchin_pease)"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref();
    let ctx = |out: Option<PathBuf>, seed: Option<u64>| Context::new(cli.out.clone().or(out), cli.seed.or(seed));
    match cli.command {
        Command::Spectrum(args) => {
            let cfg: config::SpectrumConfig = config::load(config)?;
            commands::spectrum::run(&ctx(cfg.out.clone(), cfg.seed), &args, &cfg)
        }
        Command::Analyze(args) => {
            let cfg: config::AnalyzeConfig = config::load(config)?;
            commands::analyze::run(&ctx(cfg.out.clone(), cfg.seed), &args, &cfg)
        }
        Command::G2(args) => {
            let cfg: config::G2Config = config::load(config)?;
            commands::g2::run(&ctx(cfg.out.clone(), cfg.seed), &args, &cfg)
        }
        Command::Implant(args) => {
            let cfg: config::ImplantConfig = config::load(config)?;
            commands::implant::run(&ctx(cfg.out.clone(), cfg.seed), &args, &cfg)
        }
        Command::Strain(args) => {
            let cfg: config::StrainConfig = config::load(config)?;
            commands::strain::run(&args, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("pbv: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
