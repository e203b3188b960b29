//! Per-pillar region assignments, co-occurrence counts and conditional
//! probabilities across an ensemble of emitters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{classify_region, RegionTable};

pub const DEFAULT_BIN_NM: f64 = 0.5;
pub const DEFAULT_INDEPENDENCE_TOL: f64 = 0.08;
/// Bayes tolerance for tables printed to two decimals.
pub const ROUNDED_BAYES_TOL: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub bin_nm: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|k| self.lo_nm + k as f64 * self.bin_nm)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }

    /// Indices of bins that are strict local maxima.
    pub fn modes(&self) -> Vec<usize> {
        let c = &self.counts;
        (0..c.len())
            .filter(|&i| {
                c[i] > 0
                    && (i == 0 || c[i] > c[i - 1])
                    && (i + 1 == c.len() || c[i] >= c[i + 1])
            })
            .collect()
    }
}

/// Half-open uniform bins over `[lo, hi)`; out-of-range centers are kept
/// in the `below` and `above` tallies so the total is preserved.
pub fn build_histogram(centers: &[f64], bin_nm: f64, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if !(bin_nm > 0.0) || !bin_nm.is_finite() {
        return Err(Error::domain(format!("bin width must be positive, got {bin_nm}")));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(format!("empty histogram range [{lo}, {hi})")));
    }
    let n_bins = ((hi - lo) / bin_nm).ceil() as usize;
    let mut hist = Histogram {
        lo_nm: lo,
        hi_nm: hi,
        bin_nm,
        counts: vec![0; n_bins],
        below: 0,
        above: 0,
    };
    for &c in centers {
        if c < lo || c.is_nan() {
            hist.below += 1;
        } else if c >= hi {
            hist.above += 1;
        } else {
            let k = (((c - lo) / bin_nm).floor() as usize).min(n_bins - 1);
            hist.counts[k] += 1;
        }
    }
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSet {
    pub pillar_id: String,
    pub regions_present: BTreeSet<String>,
    pub peak_centers: Vec<f64>,
}

impl AssignmentSet {
    pub fn from_centers(pillar_id: impl Into<String>, centers: Vec<f64>, table: &RegionTable) -> Self {
        let regions_present = centers
            .iter()
            .filter_map(|&c| classify_region(c, table))
            .map(str::to_string)
            .collect();
        AssignmentSet {
            pillar_id: pillar_id.into(),
            regions_present,
            peak_centers: centers,
        }
    }

    /// A pillar known only by which regions it shows.
    pub fn from_regions<I, S>(pillar_id: impl Into<String>, regions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AssignmentSet {
            pillar_id: pillar_id.into(),
            regions_present: regions.into_iter().map(Into::into).collect(),
            peak_centers: Vec::new(),
        }
    }

    pub fn is_consistent_with(&self, table: &RegionTable) -> bool {
        self.peak_centers.is_empty()
            || AssignmentSet::from_centers("", self.peak_centers.clone(), table).regions_present
                == self.regions_present
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignmentLine {
    pillar_id: String,
    peak_centers_nm: Vec<f64>,
}

/// One `{pillar_id, peak_centers_nm}` object per non-blank line.
pub fn parse_assignments_jsonl(text: &str, table: &RegionTable) -> Result<Vec<AssignmentSet>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let parsed: AssignmentLine =
                serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            Ok(AssignmentSet::from_centers(parsed.pillar_id, parsed.peak_centers_nm, table))
        })
        .collect()
}

/// Expand exact counts per region subset into anonymous pillars.
pub fn assignments_from_subset_counts(subsets: &[(Vec<&str>, usize)]) -> Vec<AssignmentSet> {
    let mut out = Vec::new();
    for (regions, count) in subsets {
        for _ in 0..*count {
            out.push(AssignmentSet::from_regions(format!("p{}", out.len()), regions.iter().copied()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityReport {
    pub n_pillars: usize,
    pub labels: Vec<String>,
    /// `counts[i][j]`: pillars showing both region i and region j.
    pub counts: Vec<Vec<u64>>,
    pub p: Vec<f64>,
    /// `p_cond[i][j]` = P(i | j); `None` when region j never occurs.
    pub p_cond: Vec<Vec<Option<f64>>>,
}

impl ProbabilityReport {
    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn probability(&self, label: &str) -> Option<f64> {
        self.index(label).map(|i| self.p[i])
    }

    /// P(label | given).
    pub fn conditional(&self, label: &str, given: &str) -> Option<f64> {
        self.p_cond[self.index(label)?][self.index(given)?]
    }

    pub fn count(&self, a: &str, b: &str) -> Option<u64> {
        Some(self.counts[self.index(a)?][self.index(b)?])
    }

    pub fn table(&self) -> ConditionalTable {
        ConditionalTable {
            labels: self.labels.clone(),
            p: self.p.clone(),
            p_cond: self.p_cond.clone(),
        }
    }
}

pub fn probabilities(assignments: &[AssignmentSet], labels: &[&str]) -> Result<ProbabilityReport> {
    if assignments.is_empty() {
        return Err(Error::Arity { needed: 1, got: 0 });
    }
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    if index.len() != labels.len() {
        return Err(Error::Validation("duplicate region label".into()));
    }
    let k = labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for a in assignments {
        let present = a
            .regions_present
            .iter()
            .map(|r| {
                index.get(r.as_str()).copied().ok_or_else(|| {
                    Error::Validation(format!("pillar {} has unknown region {r}", a.pillar_id))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        for &i in &present {
            for &j in &present {
                counts[i][j] += 1;
            }
        }
    }
    let n = assignments.len() as f64;
    let p = (0..k).map(|i| counts[i][i] as f64 / n).collect();
    let p_cond = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| (counts[j][j] > 0).then(|| counts[i][j] as f64 / counts[j][j] as f64))
                .collect()
        })
        .collect();
    Ok(ProbabilityReport {
        n_pillars: assignments.len(),
        labels: labels.iter().map(|s| s.to_string()).collect(),
        counts,
        p,
        p_cond,
    })
}

/// Overall and conditional probabilities without the underlying counts,
/// as printed in a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub labels: Vec<String>,
    pub p: Vec<f64>,
    pub p_cond: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub label: String,
    pub given: String,
    pub p: f64,
    pub p_cond: f64,
    pub gap: f64,
    pub independent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesCheck {
    pub a: String,
    pub b: String,
    /// P(a | b)·P(b)
    pub forward: f64,
    /// P(b | a)·P(a)
    pub reverse: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub tol: f64,
    pub bayes_tol: f64,
    pub pairs: Vec<PairVerdict>,
    pub bayes: Vec<BayesCheck>,
}

impl IndependenceReport {
    pub fn all_independent(&self) -> bool {
        self.pairs.iter().all(|v| v.independent)
    }

    pub fn bayes_consistent(&self) -> bool {
        self.bayes.iter().all(|b| b.consistent)
    }
}

pub fn independence_of_table(table: &ConditionalTable, tol: f64, bayes_tol: f64) -> IndependenceReport {
    let k = table.labels.len();
    let mut pairs = Vec::new();
    let mut bayes = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            if let Some(pc) = table.p_cond[i][j] {
                let gap = (pc - table.p[i]).abs();
                pairs.push(PairVerdict {
                    label: table.labels[i].clone(),
                    given: table.labels[j].clone(),
                    p: table.p[i],
                    p_cond: pc,
                    gap,
                    independent: gap <= tol,
                });
            }
            if i < j {
                if let (Some(ij), Some(ji)) = (table.p_cond[i][j], table.p_cond[j][i]) {
                    let forward = ij * table.p[j];
                    let reverse = ji * table.p[i];
                    bayes.push(BayesCheck {
                        a: table.labels[i].clone(),
                        b: table.labels[j].clone(),
                        forward,
                        reverse,
                        consistent: (forward - reverse).abs() <= bayes_tol,
                    });
                }
            }
        }
    }
    IndependenceReport {
        tol,
        bayes_tol,
        pairs,
        bayes,
    }
}

/// Independence verdicts for a report built from counts, where the Bayes
/// identity holds to floating-point precision.
pub fn independence_report(report: &ProbabilityReport, tol: f64) -> IndependenceReport {
    independence_of_table(&report.table(), tol, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const LABELS: [&str; 3] = ["I", "II", "III"];

    fn brute_force(assignments: &[AssignmentSet], labels: &[&str]) -> Vec<Vec<u64>> {
        let mut counts = vec![vec![0; labels.len()]; labels.len()];
        for a in assignments {
            for (i, li) in labels.iter().enumerate() {
                for (j, lj) in labels.iter().enumerate() {
                    if a.regions_present.contains(*li) && a.regions_present.contains(*lj) {
                        counts[i][j] += 1;
                    }
                }
            }
        }
        counts
    }

    #[test]
    fn histogram_basics() {
        let h = build_histogram(&[515.0, 520.0], 0.5, (500.0, 530.0)).unwrap();
        assert_eq!(h.counts.len(), 60);
        assert_eq!(h.counts.iter().filter(|&&c| c == 1).count(), 2);
        assert_eq!(h.counts[30], 1);
        assert_eq!(h.counts[40], 1);
        let h = build_histogram(&[499.0, 530.0, 510.0], 0.5, (500.0, 530.0)).unwrap();
        assert_eq!((h.below, h.above, h.total()), (1, 1, 3));
        assert!(build_histogram(&[], 0.5, (530.0, 530.0)).is_err());
        assert!(build_histogram(&[], 0.0, (500.0, 530.0)).is_err());
    }

    #[test]
    fn doublet_histogram_has_two_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Normal::new(515.0, 0.355).unwrap();
        let b = Normal::new(520.0, 0.323).unwrap();
        let centers: Vec<f64> = (0..400)
            .map(|k| if k % 2 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) })
            .collect();
        let h = build_histogram(&centers, 1.0, (505.0, 535.0)).unwrap();
        let modes = h.modes();
        assert_eq!(modes.len(), 2, "{:?}", h.counts);
        let centers: Vec<f64> = modes.iter().map(|&m| h.lo_nm + (m as f64 + 0.5) * h.bin_nm).collect();
        assert!(((centers[1] - centers[0]) - 5.0).abs() <= 1.0);
    }

    #[test]
    fn hand_enumerated_probabilities() {
        let sets = vec![
            AssignmentSet::from_regions("a", ["I"]),
            AssignmentSet::from_regions("b", ["I", "II"]),
            AssignmentSet::from_regions("c", ["II", "III"]),
            AssignmentSet::from_regions("d", ["III"]),
        ];
        let r = probabilities(&sets, &LABELS).unwrap();
        for l in LABELS {
            assert_eq!(r.probability(l), Some(0.5));
        }
        assert_eq!(r.conditional("I", "II"), Some(0.5));
        assert_eq!(r.conditional("III", "II"), Some(0.5));
        assert_eq!(r.conditional("I", "III"), Some(0.0));
    }

    #[test]
    fn single_pillar() {
        let r = probabilities(&[AssignmentSet::from_regions("x", ["I"])], &LABELS).unwrap();
        assert_eq!(r.probability("I"), Some(1.0));
        assert_eq!(r.conditional("I", "I"), Some(1.0));
        assert_eq!(r.conditional("I", "II"), None);
    }

    #[test]
    fn unknown_label_rejected() {
        let sets = [AssignmentSet::from_regions("x", ["V"])];
        assert!(matches!(probabilities(&sets, &LABELS), Err(Error::Validation(_))));
        assert!(probabilities(&[], &LABELS).is_err());
    }

    #[test]
    fn multiplicity_counts_once() {
        let t = RegionTable::default();
        let a = AssignmentSet::from_centers("p", vec![515.0, 520.0, 640.0], &t);
        assert_eq!(a.regions_present.len(), 2);
        assert!(a.is_consistent_with(&t));
        let r = probabilities(&[a], &["I", "II", "III", "IV"]).unwrap();
        assert_eq!(r.count("I", "I"), Some(1));
    }

    #[test]
    fn correlated_pair_is_dependent() {
        let mut sets: Vec<_> = (0..5).map(|i| AssignmentSet::from_regions(format!("{i}"), ["I", "II"])).collect();
        sets.extend((0..5).map(|i| AssignmentSet::from_regions(format!("n{i}"), Vec::<String>::new())));
        let r = probabilities(&sets, &LABELS[..2]).unwrap();
        let v = independence_report(&r, DEFAULT_INDEPENDENCE_TOL);
        assert!(!v.all_independent());
        assert!(v.bayes_consistent());
    }

    fn rounded_fig_table() -> ConditionalTable {
        ConditionalTable {
            labels: LABELS.iter().map(|s| s.to_string()).collect(),
            p: vec![0.26, 0.22, 0.40],
            p_cond: vec![
                vec![Some(1.00), Some(0.29), Some(0.24)],
                vec![Some(0.25), Some(1.00), Some(0.26)],
                vec![Some(0.38), Some(0.46), Some(1.00)],
            ],
        }
    }

    #[test]
    fn rounded_table_is_independent_and_bayes_consistent() {
        let v = independence_of_table(&rounded_fig_table(), DEFAULT_INDEPENDENCE_TOL, ROUNDED_BAYES_TOL);
        assert!(v.all_independent());
        assert!(v.bayes_consistent());
        let i_ii = v.bayes.iter().find(|b| b.a == "I" && b.b == "II").unwrap();
        assert!((i_ii.forward - 0.0638).abs() < 1e-12);
        assert!((i_ii.reverse - 0.0650).abs() < 1e-12);
    }

    #[test]
    fn jsonl_assignments() {
        let text = "{\"pillar_id\":\"a\",\"peak_centers_nm\":[520.1,575]}\n\n{\"pillar_id\":\"b\",\"peak_centers_nm\":[]}\n";
        let sets = parse_assignments_jsonl(text, &RegionTable::default()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].regions_present, BTreeSet::from(["I".to_string(), "III".to_string()]));
        let bad = "{\"pillar_id\":\"a\"}\n";
        assert!(matches!(parse_assignments_jsonl(bad, &RegionTable::default()), Err(Error::Parse { row: 1, .. })));
    }

    fn arb_assignments(max: usize) -> impl Strategy<Value = Vec<AssignmentSet>> {
        prop::collection::vec(0u8..16, 1..max).prop_map(|masks| {
            masks
                .into_iter()
                .enumerate()
                .map(|(k, m)| {
                    let regions: Vec<&str> = ["I", "II", "III", "IV"]
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| m & (1 << b) != 0)
                        .map(|(_, l)| *l)
                        .collect();
                    AssignmentSet::from_regions(format!("p{k}"), regions)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn counts_match_brute_force(sets in arb_assignments(1000)) {
            let labels = ["I", "II", "III", "IV"];
            let r = probabilities(&sets, &labels).unwrap();
            prop_assert_eq!(&r.counts, &brute_force(&sets, &labels));
            let n = r.n_pillars as f64;
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert_eq!(r.counts[i][j], r.counts[j][i]);
                    prop_assert!(r.counts[i][j] <= r.counts[i][i].min(r.counts[j][j]));
                    if let (Some(ij), Some(ji)) = (r.p_cond[i][j], r.p_cond[j][i]) {
                        let c = r.counts[i][j] as f64;
                        prop_assert!((ij * r.p[j] * n - c).abs() <= 1e-9 * (1.0 + c));
                        prop_assert!((ji * r.p[i] * n - c).abs() <= 1e-9 * (1.0 + c));
                    }
                }
                if r.counts[i][i] > 0 {
                    prop_assert_eq!(r.p_cond[i][i], Some(1.0));
                }
            }
        }

        #[test]
        fn histogram_conserves_and_shifts(
            centers in prop::collection::vec(490.0f64..540.0, 0..300),
            shift in -50.0f64..50.0,
        ) {
            // Shift by a whole number of quarter-nm steps so bin edges stay exact.
            let shift = (shift * 4.0).round() / 4.0;
            let h = build_histogram(&centers, 0.5, (500.0, 530.0)).unwrap();
            prop_assert_eq!(h.total(), centers.len() as u64);
            let moved: Vec<f64> = centers.iter().map(|c| c + shift).collect();
            let g = build_histogram(&moved, 0.5, (500.0 + shift, 530.0 + shift)).unwrap();
            prop_assert_eq!(h.counts, g.counts);
        }
    }
}
