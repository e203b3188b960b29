//! Wavelength-ordered intensity traces and their CSV form.
//!
//! ```text
//! # excitation_nm=450
//! # pillar_id=p17
//! wavelength_nm,counts
//! 500.0,12
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 8;
pub const CSV_HEADER: &str = "wavelength_nm,counts";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub excitation_nm: Option<f64>,
    pub temperature_k: Option<f64>,
    pub pillar_id: Option<String>,
    pub integration_s: Option<f64>,
    /// Comment keys without a dedicated field, kept verbatim.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    wavelengths: Vec<f64>,
    intensities: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn new(wavelengths: Vec<f64>, intensities: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if wavelengths.len() != intensities.len() {
            return Err(Error::Validation(format!(
                "{} wavelengths but {} intensities",
                wavelengths.len(),
                intensities.len()
            )));
        }
        if wavelengths.len() < MIN_SAMPLES {
            return Err(Error::Validation(format!(
                "spectrum needs at least {MIN_SAMPLES} samples, got {}",
                wavelengths.len()
            )));
        }
        for (i, (&w, &c)) in wavelengths.iter().zip(&intensities).enumerate() {
            if !w.is_finite() || !c.is_finite() {
                return Err(Error::Validation(format!("non-finite value at sample {i}")));
            }
            if c < 0.0 {
                return Err(Error::Validation(format!("negative intensity at sample {i}")));
            }
            if i > 0 && w <= wavelengths[i - 1] {
                return Err(Error::Validation(format!(
                    "wavelengths not strictly ascending at sample {i}"
                )));
            }
        }
        Ok(Spectrum {
            wavelengths,
            intensities,
            meta,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    pub fn max_intensity(&self) -> f64 {
        self.intensities.iter().cloned().fold(0.0, f64::max)
    }

    /// Trapezoidal integral over the sampled range.
    pub fn integral(&self) -> f64 {
        self.wavelengths
            .windows(2)
            .zip(self.intensities.windows(2))
            .map(|(w, c)| 0.5 * (w[1] - w[0]) * (c[0] + c[1]))
            .sum()
    }

    /// Indices of strict local maxima whose height exceeds
    /// `min_fraction` of the global maximum. Plateaus count once.
    pub fn local_maxima(&self, min_fraction: f64) -> Vec<usize> {
        let c = &self.intensities;
        let threshold = min_fraction * self.max_intensity();
        let mut out = Vec::new();
        let mut i = 1;
        while i + 1 < c.len() {
            if c[i] > c[i - 1] {
                let mut j = i;
                while j + 1 < c.len() && c[j + 1] == c[i] {
                    j += 1;
                }
                if j + 1 < c.len() && c[j + 1] < c[i] && c[i] > threshold {
                    out.push(i);
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
        out
    }

    /// Index of the sample nearest to `wavelength_nm`.
    pub fn nearest_index(&self, wavelength_nm: f64) -> usize {
        match self
            .wavelengths
            .binary_search_by(|w| w.total_cmp(&wavelength_nm))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.len() => self.len() - 1,
            Err(i) => {
                if wavelength_nm - self.wavelengths[i - 1] <= self.wavelengths[i] - wavelength_nm {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// Parse the CSV form. Row numbers in errors count data rows from 1.
    pub fn parse(document: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(document).map_err(|e| Error::parse(0, format!("not UTF-8: {e}")))?;
        let mut meta = SpectrumMeta::default();
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();

        while let Some(line) = lines.peek() {
            let Some(comment) = line.strip_prefix('#') else {
                break;
            };
            if let Some((key, value)) = comment.trim().split_once('=') {
                apply_meta(&mut meta, key.trim(), value.trim())?;
            }
            lines.next();
        }

        match lines.next() {
            Some(h) if h.replace(' ', "") == CSV_HEADER => {}
            other => {
                return Err(Error::parse(
                    0,
                    format!("expected header `{CSV_HEADER}`, found `{}`", other.unwrap_or("")),
                ))
            }
        }

        let mut wavelengths = Vec::new();
        let mut intensities = Vec::new();
        for (k, line) in lines.enumerate() {
            let row = k + 1;
            let (w, c) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(row, "expected two comma-separated fields"))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::parse(row, format!("bad wavelength `{}`", w.trim())))?;
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(row, format!("bad count `{}`", c.trim())))?;
            if w.is_nan() || c.is_nan() || !w.is_finite() || !c.is_finite() {
                return Err(Error::parse(row, "NaN or infinite value"));
            }
            if c < 0.0 {
                return Err(Error::parse(row, format!("negative count {c}")));
            }
            if let Some(&prev) = wavelengths.last() {
                if w <= prev {
                    return Err(Error::parse(
                        row,
                        format!("wavelength {w} not above previous {prev}"),
                    ));
                }
            }
            wavelengths.push(w);
            intensities.push(c);
        }
        if wavelengths.len() < MIN_SAMPLES {
            return Err(Error::parse(
                wavelengths.len(),
                format!("need at least {MIN_SAMPLES} rows, got {}", wavelengths.len()),
            ));
        }
        Spectrum::new(wavelengths, intensities, meta)
    }

    /// Canonical CSV: known metadata keys in fixed order, extras sorted,
    /// numbers in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        if let Some(v) = m.excitation_nm {
            let _ = writeln!(out, "# excitation_nm={v}");
        }
        if let Some(v) = m.temperature_k {
            let _ = writeln!(out, "# temperature_k={v}");
        }
        if let Some(v) = &m.pillar_id {
            let _ = writeln!(out, "# pillar_id={v}");
        }
        if let Some(v) = m.integration_s {
            let _ = writeln!(out, "# integration_s={v}");
        }
        for (k, v) in &m.extra {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (w, c) in self.wavelengths.iter().zip(&self.intensities) {
            let _ = writeln!(out, "{w},{c}");
        }
        out
    }
}

fn apply_meta(meta: &mut SpectrumMeta, key: &str, value: &str) -> Result<()> {
    let number = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::parse(0, format!("metadata `{key}` is not a number: `{v}`")))
    };
    match key {
        "excitation_nm" => meta.excitation_nm = Some(number(value)?),
        "temperature_k" | "temperature_K" => meta.temperature_k = Some(number(value)?),
        "pillar_id" => meta.pillar_id = Some(value.to_string()),
        "integration_s" => meta.integration_s = Some(number(value)?),
        _ => {
            meta.extra.insert(key.to_string(), value.to_string());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(n: usize) -> String {
        let mut s = String::from("wavelength_nm,counts\n");
        for i in 0..n {
            s.push_str(&format!("{},{}\n", 500.0 + i as f64 * 0.5, 10 + i));
        }
        s
    }

    #[test]
    fn eight_rows_parse() {
        let s = Spectrum::parse(rows(8).as_bytes()).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.intensities()[3], 13.0);
    }

    #[test]
    fn too_few_rows_rejected() {
        assert!(matches!(Spectrum::parse(rows(3).as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn descending_wavelength_reported_at_row_2() {
        let doc = "wavelength_nm,counts\n501,1\n500,1\n502,1\n503,1\n504,1\n505,1\n506,1\n507,1\n";
        match Spectrum::parse(doc.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nan_and_negative_rejected_with_row() {
        let mut doc = rows(9);
        doc = doc.replace("502,14", "502,NaN");
        match Spectrum::parse(doc.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 5),
            other => panic!("{other:?}"),
        }
        let doc = rows(9).replace("501,12", "501,-3");
        match Spectrum::parse(doc.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn metadata_comments() {
        let doc = format!("# excitation_nm=450\n# pillar_id=p7\n# operator=ab\n{}", rows(8));
        let s = Spectrum::parse(doc.as_bytes()).unwrap();
        assert_eq!(s.meta.excitation_nm, Some(450.0));
        assert_eq!(s.meta.pillar_id.as_deref(), Some("p7"));
        assert_eq!(s.meta.extra.get("operator").map(String::as_str), Some("ab"));
    }

    #[test]
    fn missing_header_rejected() {
        assert!(Spectrum::parse(b"500,1\n501,2\n").is_err());
    }

    #[test]
    fn local_maxima_counts_plateaus_once() {
        let w: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let c = vec![0.0, 1.0, 3.0, 3.0, 1.0, 0.0, 0.5, 0.0, 2.0, 0.0];
        let s = Spectrum::new(w, c, SpectrumMeta::default()).unwrap();
        assert_eq!(s.local_maxima(0.0), vec![2, 6, 8]);
        assert_eq!(s.local_maxima(0.2), vec![2, 8]);
    }

    proptest! {
        #[test]
        fn canonical_round_trip(
            start in 300.0f64..900.0,
            steps in prop::collection::vec(1e-3f64..2.0, 8..64),
            counts in prop::collection::vec(0.0f64..1e6, 64),
            excitation in prop::option::of(400.0f64..600.0),
            pillar in prop::option::of("[a-z][a-z0-9_]{0,8}"),
        ) {
            let mut w = start;
            let mut wavelengths = Vec::new();
            for s in &steps {
                wavelengths.push(w);
                w += s;
            }
            let intensities = counts[..wavelengths.len()].to_vec();
            let meta = SpectrumMeta { excitation_nm: excitation, pillar_id: pillar, ..Default::default() };
            let spectrum = Spectrum::new(wavelengths, intensities, meta).unwrap();
            let csv = spectrum.to_csv();
            let parsed = Spectrum::parse(csv.as_bytes()).unwrap();
            prop_assert_eq!(&parsed, &spectrum);
            prop_assert_eq!(parsed.to_csv(), csv);
        }
    }
}
