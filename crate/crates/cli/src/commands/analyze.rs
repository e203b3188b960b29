use std::path::{Path, PathBuf};

use serde::Serialize;

use pbv_core::ensemble::{
    build_histogram, independence_report, probabilities, AssignmentSet, IndependenceReport,
    ProbabilityReport, DEFAULT_BIN_NM, DEFAULT_INDEPENDENCE_TOL,
};
use pbv_core::spectral::{
    classify_region, detect_peaks, fit_line, LineShape, PeakDetection, PeakFit, Prominence, Region,
    RegionTable,
};
use pbv_core::spectrum::Spectrum;

use super::{read_input, Context};
use crate::config::AnalyzeConfig;
use crate::error::{CliError, CliResult};
use crate::AnalyzeArgs;

#[derive(Serialize)]
struct FittedPeak {
    candidate_nm: f64,
    prominence: f64,
    center_nm: f64,
    region: Option<String>,
    fit: Option<PeakFit>,
}

#[derive(Serialize)]
struct PillarPeaks {
    file: String,
    pillar_id: String,
    regions_present: Vec<String>,
    peaks: Vec<FittedPeak>,
}

#[derive(Serialize)]
struct PeaksReport {
    pillars: Vec<PillarPeaks>,
}

#[derive(Serialize)]
struct SurveyReport {
    n_files: usize,
    n_pillars: usize,
    warning_count: usize,
    warnings: Vec<String>,
    regions: Vec<Region>,
    bin_nm: f64,
    histogram_total: u64,
    histogram_below: u64,
    histogram_above: u64,
    probabilities: ProbabilityReport,
    independence: IndependenceReport,
}

fn spectrum_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    Ok(files)
}

fn load_regions(args: &AnalyzeArgs, cfg: &AnalyzeConfig) -> CliResult<RegionTable> {
    if let Some(path) = &args.regions {
        let text = String::from_utf8(read_input(path)?)
            .map_err(|_| CliError::input(format!("{} is not UTF-8", path.display())))?;
        return RegionTable::from_json(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())));
    }
    match &cfg.regions {
        Some(regions) => Ok(RegionTable::new(regions.clone())?),
        None => Ok(RegionTable::default()),
    }
}

fn analyze_spectrum(
    spectrum: &Spectrum,
    detection: &PeakDetection,
    shape: LineShape,
    table: &RegionTable,
) -> CliResult<Vec<FittedPeak>> {
    let candidates = detect_peaks(spectrum, detection)?;
    let w = spectrum.wavelengths();
    let (first, last) = (w[0], w[w.len() - 1]);
    Ok(candidates
        .iter()
        .map(|c| {
            let window = (c.window_lo_nm.max(first), c.window_hi_nm.min(last));
            let fit = fit_line(spectrum, window, shape).ok().filter(|f| f.ok);
            let center_nm = fit.map_or(c.center_nm, |f| f.center);
            FittedPeak {
                candidate_nm: c.center_nm,
                prominence: c.height,
                center_nm,
                region: classify_region(center_nm, table).map(str::to_string),
                fit,
            }
        })
        .collect())
}

pub fn run(ctx: &Context, args: &AnalyzeArgs, cfg: &AnalyzeConfig) -> CliResult<()> {
    let dir = args
        .input
        .as_ref()
        .or(cfg.input.as_ref())
        .ok_or_else(|| CliError::input("analyze needs --input <DIR>"))?;
    let table = load_regions(args, cfg)?;
    let bin_nm = args.bin_nm.or(cfg.bin_nm).unwrap_or(DEFAULT_BIN_NM);
    let shape = args.shape.or(cfg.shape).unwrap_or(LineShape::Lorentzian);
    let defaults = PeakDetection::default();
    let prominence = match (
        args.prominence_counts.or(cfg.prominence_counts),
        args.prominence_noise.or(cfg.prominence_noise),
    ) {
        (Some(counts), _) => Prominence::Counts(counts),
        (None, Some(k)) => Prominence::NoiseScale(k),
        (None, None) => defaults.prominence,
    };
    let detection = PeakDetection {
        prominence,
        min_separation_nm: args
            .min_separation_nm
            .or(cfg.min_separation_nm)
            .unwrap_or(defaults.min_separation_nm),
        baseline_window_nm: cfg.baseline_window_nm.unwrap_or(defaults.baseline_window_nm),
    };

    let files = spectrum_files(dir)?;
    let mut warnings = Vec::new();
    let mut pillars = Vec::new();
    let mut assignments = Vec::new();
    let mut centers = Vec::new();
    for path in &files {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let spectrum = match read_input(path).and_then(|bytes| Spectrum::parse(&bytes).map_err(CliError::from)) {
            Ok(s) => s,
            Err(err) => {
                warnings.push(format!("{name}: skipped: {err}"));
                continue;
            }
        };
        let peaks = match analyze_spectrum(&spectrum, &detection, shape, &table) {
            Ok(p) => p,
            Err(err) => {
                warnings.push(format!("{name}: skipped: {err}"));
                continue;
            }
        };
        for p in peaks.iter().filter(|p| p.fit.is_none()) {
            warnings.push(format!("{name}: fit near {:.3} nm failed, using candidate center", p.candidate_nm));
        }
        let pillar_id = spectrum.meta.pillar_id.clone().unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        });
        let peak_centers: Vec<f64> = peaks.iter().map(|p| p.center_nm).collect();
        centers.extend_from_slice(&peak_centers);
        let assignment = AssignmentSet::from_centers(pillar_id.clone(), peak_centers, &table);
        pillars.push(PillarPeaks {
            file: name,
            pillar_id,
            regions_present: assignment.regions_present.iter().cloned().collect(),
            peaks,
        });
        assignments.push(assignment);
    }
    for w in &warnings {
        eprintln!("pbv: warning: {w}");
    }
    if assignments.is_empty() {
        return Err(CliError::input(format!("no parsable spectra in {}", dir.display())));
    }

    let regions = table.regions().to_vec();
    let lo = regions.iter().map(|r| r.lo_nm).fold(f64::INFINITY, f64::min);
    let hi = regions.iter().map(|r| r.hi_nm).fold(f64::NEG_INFINITY, f64::max);
    let histogram = build_histogram(&centers, bin_nm, (lo, hi))?;
    let mut hist_csv = String::from("bin_lo_nm,bin_hi_nm,count\n");
    for (k, count) in histogram.counts.iter().enumerate() {
        let edge = lo + k as f64 * bin_nm;
        hist_csv.push_str(&format!("{edge},{},{count}\n", (edge + bin_nm).min(hi)));
    }

    let labels: Vec<&str> = regions.iter().map(|r| r.label.as_str()).collect();
    let probabilities = probabilities(&assignments, &labels)?;
    let tol = args.independence_tol.or(cfg.independence_tol).unwrap_or(DEFAULT_INDEPENDENCE_TOL);
    let independence = independence_report(&probabilities, tol);
    let report = SurveyReport {
        n_files: files.len(),
        n_pillars: assignments.len(),
        warning_count: warnings.len(),
        warnings,
        regions,
        bin_nm,
        histogram_total: histogram.total(),
        histogram_below: histogram.below,
        histogram_above: histogram.above,
        probabilities,
        independence,
    };

    let written = vec![
        ctx.write_json("peaks.json", &PeaksReport { pillars })?,
        ctx.write("histogram.csv", &hist_csv)?,
        ctx.write_json("report.json", &report)?,
    ];
    ctx.log("analyze", &written)
}
