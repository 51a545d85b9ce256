//! Threshold calibration, oracle/relation overlap, violation rates,
//! annotation sample sizing, and report emission.

mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mt::{CampaignRow, MRKind, StrictnessLevel};

pub use report::{emit_report, heatmap_svg, rows_csv, summary, summary_json, ReportFormat, Summary, REPORT_VERSION};

pub const MIN_CALIBRATION_SAMPLES: usize = 5;

/// Nearest-rank percentile: the value at 1-based rank `ceil(pct * n / 100)`.
fn nearest_rank(sorted: &[f64], pct: usize) -> f64 {
    let n = sorted.len();
    let rank = (pct * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// 20th, 50th and 80th nearest-rank percentiles of `distances`.
pub fn calibrate_thresholds(distances: &[f64]) -> Result<(f64, f64, f64)> {
    if distances.len() < MIN_CALIBRATION_SAMPLES {
        return Err(Error::invalid(format!(
            "calibration needs at least {MIN_CALIBRATION_SAMPLES} distances, got {}",
            distances.len()
        )));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("calibration distances must be finite"));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        nearest_rank(&sorted, 20),
        nearest_rank(&sorted, 50),
        nearest_rank(&sorted, 80),
    ))
}

/// Failing follow-ups split by which check caught them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VennTriple {
    pub oracle_only: usize,
    pub mr_only: usize,
    pub both: usize,
}

impl VennTriple {
    pub fn total(&self) -> usize {
        self.oracle_only + self.mr_only + self.both
    }
}

/// Overlap of oracle failures and relation violations over evaluated rows,
/// which must share one strictness level. Skipped rows are ignored.
pub fn venn(rows: &[CampaignRow]) -> Result<VennTriple> {
    let mut levels = rows.iter().map(|r| r.strictness);
    if let Some(first) = levels.next() {
        if levels.any(|l| l != first) {
            return Err(Error::invalid("venn needs rows of a single strictness level"));
        }
    }
    let mut t = VennTriple::default();
    for r in rows.iter().filter(|r| r.is_evaluated()) {
        match (r.is_oracle_failure(), r.is_violation()) {
            (true, false) => t.oracle_only += 1,
            (false, true) => t.mr_only += 1,
            (true, true) => t.both += 1,
            (false, false) => {}
        }
    }
    Ok(t)
}

/// [`venn`] for every strictness level present in `rows`.
pub fn venn_by_strictness(rows: &[CampaignRow]) -> BTreeMap<StrictnessLevel, VennTriple> {
    let mut groups: BTreeMap<StrictnessLevel, Vec<CampaignRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.strictness).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(level, rs)| (level, venn(&rs).expect("grouped by level")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub mr: MRKind,
    pub strictness: StrictnessLevel,
    pub violations: usize,
    pub evaluated: usize,
    pub rate: f64,
}

/// Violation rate per (relation, strictness), ordered by relation then
/// strictness. Cells with no evaluated rows are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    pub cells: Vec<RateCell>,
}

impl RateMatrix {
    pub fn get(&self, mr: MRKind, strictness: StrictnessLevel) -> Option<&RateCell> {
        self.cells.iter().find(|c| c.mr == mr && c.strictness == strictness)
    }
}

pub fn rate_matrix(rows: &[CampaignRow]) -> RateMatrix {
    let mut counts: BTreeMap<(MRKind, StrictnessLevel), (usize, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_evaluated()) {
        let c = counts.entry((r.mr, r.strictness)).or_default();
        c.1 += 1;
        if r.is_violation() {
            c.0 += 1;
        }
    }
    RateMatrix {
        cells: counts
            .into_iter()
            .map(|((mr, strictness), (violations, evaluated))| RateCell {
                mr,
                strictness,
                violations,
                evaluated,
                rate: violations as f64 / evaluated as f64,
            })
            .collect(),
    }
}

/// Cochran's sample size with finite-population correction, rounded up.
pub fn cochran_sample_size(population: u64, confidence_z: f64, margin: f64, p: f64) -> Result<u64> {
    let ok = population >= 1
        && confidence_z.is_finite()
        && confidence_z > 0.0
        && margin > 0.0
        && margin < 1.0
        && p > 0.0
        && p < 1.0;
    if !ok {
        return Err(Error::invalid(format!(
            "bad Cochran parameters: population={population} z={confidence_z} margin={margin} p={p}"
        )));
    }
    let n0 = confidence_z * confidence_z * p * (1.0 - p) / (margin * margin);
    let n = n0 / (1.0 + (n0 - 1.0) / population as f64);
    Ok(n.ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_examples() {
        assert_eq!(
            calibrate_thresholds(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap(),
            (0.1, 0.3, 0.4)
        );
        let tenths: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
        let (a, b, c) = calibrate_thresholds(&tenths).unwrap();
        assert_eq!((a, b, c), (tenths[1], tenths[4], tenths[7]));
        assert_eq!(calibrate_thresholds(&[0.7; 6]).unwrap(), (0.7, 0.7, 0.7));
        assert_eq!(
            calibrate_thresholds(&[0.5, 0.1, 0.4, 0.3, 0.2]).unwrap(),
            (0.1, 0.3, 0.4)
        );
        assert!(calibrate_thresholds(&[0.1; 4]).is_err());
        assert!(calibrate_thresholds(&[0.1, 0.2, f64::NAN, 0.3, 0.4]).is_err());
    }

    #[test]
    fn cochran_examples() {
        assert_eq!(cochran_sample_size(10_000, 1.96, 0.05, 0.5).unwrap(), 370);
        assert_eq!(cochran_sample_size(7_899, 1.96, 0.05, 0.5).unwrap(), 367);
        assert_eq!(cochran_sample_size(1_000_000_000, 1.96, 0.05, 0.5).unwrap(), 385);
        assert_eq!(cochran_sample_size(1, 1.96, 0.05, 0.5).unwrap(), 1);
        assert!(cochran_sample_size(0, 1.96, 0.05, 0.5).is_err());
        assert!(cochran_sample_size(10, 1.96, 1.0, 0.5).is_err());
        assert!(cochran_sample_size(10, 1.96, 0.05, 0.0).is_err());
    }
}
