use serde::Serialize;

use pbv_core::photon::{
    background_correct, background_correct_curve, fit_g2, normalize_histogram, two_level,
    CoincidenceHistogram, G2Fit, G2FitOptions, LIFETIME_NOTE,
};

use super::{read_input, Context};
use crate::config::G2Config;
use crate::error::{CliError, CliResult};
use crate::svg::{Plot, Series, Style, PALETTE};
use crate::G2Args;

#[derive(Serialize)]
struct G2Output {
    g2_zero_raw: f64,
    tau_ns: f64,
    tau_identified: bool,
    baseline: f64,
    ok: bool,
    normalization_counts: f64,
    norm_min_delay_ns: f64,
    dead_window_ns: f64,
    tau_note: &'static str,
    raw_fit: G2Fit,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g2_zero_corrected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    corrected_clamped: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_emitter: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    corrected_fit: Option<G2Fit>,
}

pub fn run(ctx: &Context, args: &G2Args, cfg: &G2Config) -> CliResult<()> {
    let input = args
        .input
        .as_ref()
        .or(cfg.input.as_ref())
        .ok_or_else(|| CliError::input("g2 needs --input <histogram.csv>"))?;
    let hist = CoincidenceHistogram::parse(&read_input(input)?)
        .map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
    if hist.delays_ns.is_empty() {
        return Err(CliError::input(format!("{}: histogram has no rows", input.display())));
    }
    let span = hist.delays_ns.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let norm_min_delay_ns = args.norm_min_delay_ns.or(cfg.norm_min_delay_ns).unwrap_or(0.5 * span);
    let dead_window_ns = args.dead_window_ns.or(cfg.dead_window_ns).unwrap_or(0.0);
    let rho = args.rho.or(cfg.rho);

    let curve = normalize_histogram(&hist.delays_ns, &hist.coincidences, norm_min_delay_ns)?;
    let options = G2FitOptions { dead_window_ns };
    let fit = fit_g2(&curve, &options)?;

    let mut output = G2Output {
        g2_zero_raw: fit.g2_zero,
        tau_ns: fit.tau_ns,
        tau_identified: fit.tau_identified,
        baseline: fit.baseline,
        ok: fit.ok,
        normalization_counts: curve.normalization,
        norm_min_delay_ns,
        dead_window_ns,
        tau_note: LIFETIME_NOTE,
        raw_fit: fit,
        rho,
        g2_zero_corrected: None,
        corrected_clamped: None,
        single_emitter: None,
        corrected_fit: None,
    };

    let points = |ys: &[f64]| curve.delays_ns.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>();
    let model = |f: &G2Fit| {
        curve
            .delays_ns
            .iter()
            .map(|&t| (t, two_level(t, f.g2_zero, f.tau_ns, f.baseline)))
            .collect::<Vec<_>>()
    };
    let mut plot = Plot::new("second-order correlation", "delay (ns)", "g2")
        .with(Series::new("normalized data", points(&curve.values), PALETTE[3], Style::Points))
        .with(Series::new("two-level fit", model(&fit), PALETTE[0], Style::Line));

    if let Some(rho) = rho {
        let corrected = background_correct(fit.g2_zero, rho)?;
        let (corrected_curve, _) = background_correct_curve(&curve, rho)?;
        let corrected_fit = fit_g2(&corrected_curve, &options)?;
        output.g2_zero_corrected = Some(corrected.value);
        output.corrected_clamped = Some(corrected.clamped);
        output.single_emitter = Some(corrected.value < 0.5);
        output.corrected_fit = Some(corrected_fit);
        plot = plot.with(Series::new(
            format!("background corrected (rho {rho})"),
            model(&corrected_fit),
            PALETTE[1],
            Style::Dashed,
        ));
    }

    let written = vec![
        ctx.write_json("g2fit.json", &output)?,
        ctx.write("g2.svg", &plot.render())?,
    ];
    ctx.log("g2", &written)?;
    if !fit.ok {
        return Err(CliError::Numeric(format!(
            "g2 fit did not converge after {} iterations",
            fit.iterations
        )));
    }
    Ok(())
}
