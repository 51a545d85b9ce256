use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{rate_matrix, venn_by_strictness, RateMatrix, VennTriple};
use crate::canonical::{self, format_f64};
use crate::error::{Error, Result};
use crate::mt::{CampaignRow, RowStatus, RowsFile, StrictnessLevel};

pub const REPORT_VERSION: u32 = 1;

/// Column order of `report.csv`.
pub const CSV_COLUMNS: [&str; 14] = [
    "source_id",
    "followup_id",
    "mr",
    "strictness",
    "status",
    "distance",
    "lower",
    "upper",
    "violated",
    "oracle_success",
    "oracle_reason",
    "diagnosis",
    "meta",
    "skip_reason",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Csv => "report.csv",
            ReportFormat::Json => "summary.json",
            ReportFormat::Svg => "heatmap.svg",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" | "svg-heatmap" => Ok(ReportFormat::Svg),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub report_version: u32,
    pub rows: usize,
    pub evaluated_rows: usize,
    pub skipped_rows: usize,
    pub followups: usize,
    pub excluded_sources: usize,
    pub venn: BTreeMap<StrictnessLevel, VennTriple>,
    pub rate_matrix: RateMatrix,
}

pub fn summary(file: &RowsFile) -> Summary {
    let rows = &file.rows;
    let evaluated = rows.iter().filter(|r| r.is_evaluated()).count();
    let followups: BTreeSet<&str> = rows.iter().map(|r| r.followup_id.as_str()).collect();
    Summary {
        report_version: REPORT_VERSION,
        rows: rows.len(),
        evaluated_rows: evaluated,
        skipped_rows: rows.len() - evaluated,
        followups: followups.len(),
        excluded_sources: file.excluded.len(),
        venn: venn_by_strictness(rows),
        rate_matrix: rate_matrix(rows),
    }
}

pub fn summary_json(file: &RowsFile) -> Result<String> {
    canonical::to_string(&summary(file))
}

fn opt_f64(x: Option<f64>) -> Result<String> {
    x.map(format_f64).transpose().map(Option::unwrap_or_default)
}

fn opt_bool(x: Option<bool>) -> String {
    x.map(|b| b.to_string()).unwrap_or_default()
}

/// One line per row after a header; empty cells for absent values.
pub fn rows_csv(rows: &[CampaignRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        let status = match r.status {
            RowStatus::Evaluated => "evaluated",
            RowStatus::Skipped => "skipped",
        };
        let diagnosis: Vec<&str> = r.diagnosis.iter().map(|l| l.as_str()).collect();
        let meta = r.meta.as_ref().map(canonical::to_line).transpose()?.unwrap_or_default();
        w.write_record([
            r.source_id.clone(),
            r.followup_id.clone(),
            r.mr.as_str().to_string(),
            r.strictness.as_str().to_string(),
            status.to_string(),
            opt_f64(r.distance)?,
            opt_f64(r.lower)?,
            opt_f64(r.upper)?,
            opt_bool(r.violated),
            opt_bool(r.oracle_success),
            r.oracle_reason.clone().unwrap_or_default(),
            diagnosis.join("|"),
            meta,
            r.skip_reason.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
/// Light to dark; bucket `min(4, floor(5 * rate))`.
const RAMP: [&str; 5] = ["#f7fbff", "#c6dbef", "#6baed6", "#2171b5", "#08306b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Relations down, strictness levels across, cells shaded by violation
/// rate and annotated with the rate and counts.
pub fn heatmap_svg(matrix: &RateMatrix) -> Result<String> {
    if matrix.cells.is_empty() {
        return Err(Error::invalid("heatmap needs at least one evaluated row"));
    }
    let mrs: BTreeSet<_> = matrix.cells.iter().map(|c| c.mr).collect();
    let levels: BTreeSet<_> = matrix.cells.iter().map(|c| c.strictness).collect();
    let (left, top, right, bottom) = (200.0, 80.0, 40.0, 40.0);
    let cw = (WIDTH - left - right) / levels.len() as f64;
    let ch = (HEIGHT - top - bottom) / mrs.len() as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600" font-family="sans-serif">"##
    );
    let _ = writeln!(s, r##"<rect width="800" height="600" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<text x="400" y="32" text-anchor="middle" font-size="20">MR violation rate</text>"##
    );
    for (j, level) in levels.iter().enumerate() {
        let x = left + cw * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            r##"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"##,
            top - 12.0,
            level.as_str()
        );
    }
    for (i, mr) in mrs.iter().enumerate() {
        let y = top + ch * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{y:.1}" text-anchor="end" dominant-baseline="middle" font-size="14">{}</text>"##,
            left - 10.0,
            escape(mr.as_str())
        );
        for (j, level) in levels.iter().enumerate() {
            let (x0, y0) = (left + cw * j as f64, top + ch * i as f64);
            match matrix.get(*mr, *level) {
                Some(c) => {
                    let bucket = ((c.rate * 5.0).floor() as usize).min(4);
                    let ink = if bucket >= 3 { "#ffffff" } else { "#000000" };
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{cw:.1}" height="{ch:.1}" fill="{}" stroke="#444444"/>"##,
                        RAMP[bucket]
                    );
                    let _ = writeln!(
                        s,
                        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" dominant-baseline="middle" font-size="14" fill="{ink}">{:.2} ({}/{})</text>"##,
                        x0 + cw / 2.0,
                        y0 + ch / 2.0,
                        c.rate,
                        c.violations,
                        c.evaluated
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{cw:.1}" height="{ch:.1}" fill="#dddddd" stroke="#444444"/>"##
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes each requested format into `out_dir`; returns the paths written.
pub fn emit_report(file: &RowsFile, formats: &[ReportFormat], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let formats: BTreeSet<ReportFormat> = formats.iter().copied().collect();
    let mut rendered = Vec::new();
    for f in &formats {
        let text = match f {
            ReportFormat::Csv => rows_csv(&file.rows)?,
            ReportFormat::Json => summary_json(file)?,
            ReportFormat::Svg => heatmap_svg(&rate_matrix(&file.rows))?,
        };
        rendered.push((out_dir.join(f.file_name()), text));
    }
    fs::create_dir_all(out_dir)?;
    for (path, text) in &rendered {
        fs::write(path, text)?;
    }
    Ok(rendered.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mt::MRKind;
    use crate::sim::FaultProfile;

    fn row(src: &str, mr: MRKind, level: StrictnessLevel, violated: bool, oracle: bool) -> CampaignRow {
        CampaignRow {
            source_id: src.into(),
            followup_id: format!("{src}~{}", mr.short()),
            mr,
            strictness: level,
            status: RowStatus::Evaluated,
            distance: Some(0.125),
            lower: None,
            upper: Some(0.1),
            violated: Some(violated),
            oracle_success: Some(oracle),
            oracle_reason: Some(if oracle { "ok".into() } else { "not lifted".into() }),
            diagnosis: Vec::new(),
            meta: None,
            skip_reason: None,
        }
    }

    fn file(rows: Vec<CampaignRow>) -> RowsFile {
        RowsFile {
            rows_version: 1,
            seed: 0,
            fault: FaultProfile::none(),
            excluded: Vec::new(),
            rows,
        }
    }

    #[test]
    fn csv_has_header_plus_rows() {
        let rows = vec![
            row("a", MRKind::Mr1Synonym, StrictnessLevel::High, true, true),
            row("b", MRKind::Mr1Synonym, StrictnessLevel::High, false, false),
        ];
        let csv = rows_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("source_id,followup_id,mr,"));
        assert!(csv.contains("a,a~MR1,MR1_Synonym,high,evaluated,0.125,,0.1,true,true,ok,,,"));
    }

    #[test]
    fn summary_cross_totals() {
        let rows = vec![
            row("a", MRKind::Mr1Synonym, StrictnessLevel::High, true, true),
            row("b", MRKind::Mr2ObjectAddition, StrictnessLevel::High, true, false),
            row("c", MRKind::Mr2ObjectAddition, StrictnessLevel::High, false, false),
            row("d", MRKind::Mr2ObjectAddition, StrictnessLevel::High, false, true),
        ];
        let s = summary(&file(rows));
        let v = s.venn[&StrictnessLevel::High];
        assert_eq!((v.oracle_only, v.mr_only, v.both), (1, 1, 1));
        let violations: usize = s.rate_matrix.cells.iter().map(|c| c.violations).sum();
        assert_eq!(violations, v.mr_only + v.both);
        let cell = s
            .rate_matrix
            .get(MRKind::Mr2ObjectAddition, StrictnessLevel::High)
            .unwrap();
        assert_eq!((cell.violations, cell.evaluated), (1, 3));
    }

    #[test]
    fn svg_shape() {
        let rows = vec![row("a", MRKind::Mr1Synonym, StrictnessLevel::High, true, true)];
        let svg = heatmap_svg(&super::super::rate_matrix(&rows)).unwrap();
        assert!(svg.contains(r##"width="800" height="600""##));
        assert!(svg.contains("1.00 (1/1)"));
        assert!(heatmap_svg(&RateMatrix::default()).is_err());
    }
}
