use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::followup::{generate_followup_with, FollowUpMeta, FollowUpOptions};
use super::{evaluate, MRKind, Mr5Bounds, StrictnessLevel};
use crate::canonical;
use crate::error::{Error, Result};
use crate::oracles::{check_task, diagnose, FailureLabel};
use crate::scene::{validate_case, TestCase};
use crate::sim::{execute, execute_with_relocation, fnv1a, ExecutionResult, FaultProfile};

pub const ROWS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSettings {
    pub mrs: BTreeSet<MRKind>,
    pub strictness: BTreeSet<StrictnessLevel>,
    pub fault: FaultProfile,
    pub seed: u64,
    pub mr5: Mr5Bounds,
    pub followup: FollowUpOptions,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    /// When set, every execution's trace is written here as JSON lines.
    pub trace_dir: Option<PathBuf>,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        CampaignSettings {
            mrs: MRKind::ALL.into_iter().collect(),
            strictness: StrictnessLevel::ALL.into_iter().collect(),
            fault: FaultProfile::none(),
            seed: 0,
            mr5: Mr5Bounds::default(),
            followup: FollowUpOptions::default(),
            jobs: 1,
            trace_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Evaluated,
    /// The follow-up could not be generated or executed.
    Skipped,
}

/// One (source, relation, strictness) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub source_id: String,
    pub followup_id: String,
    pub mr: MRKind,
    pub strictness: StrictnessLevel,
    pub status: RowStatus,
    pub distance: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub violated: Option<bool>,
    pub oracle_success: Option<bool>,
    pub oracle_reason: Option<String>,
    pub diagnosis: Vec<FailureLabel>,
    pub meta: Option<FollowUpMeta>,
    pub skip_reason: Option<String>,
}

impl CampaignRow {
    pub fn is_evaluated(&self) -> bool {
        self.status == RowStatus::Evaluated
    }

    pub fn is_violation(&self) -> bool {
        self.violated == Some(true)
    }

    pub fn is_oracle_failure(&self) -> bool {
        self.oracle_success == Some(false)
    }

    fn sort_key(&self) -> (&str, MRKind, StrictnessLevel) {
        (&self.source_id, self.mr, self.strictness)
    }
}

/// A source dropped before follow-up generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedSource {
    pub source_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub rows: Vec<CampaignRow>,
    pub excluded: Vec<ExcludedSource>,
}

/// Serialized campaign output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowsFile {
    pub rows_version: u32,
    pub seed: u64,
    pub fault: FaultProfile,
    pub excluded: Vec<ExcludedSource>,
    pub rows: Vec<CampaignRow>,
}

impl RowsFile {
    pub fn new(seed: u64, fault: FaultProfile, result: CampaignResult) -> Self {
        RowsFile {
            rows_version: ROWS_VERSION,
            seed,
            fault,
            excluded: result.excluded,
            rows: result.rows,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        canonical::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<RowsFile> {
        let f: RowsFile = canonical::from_str(s)?;
        if f.rows_version != ROWS_VERSION {
            return Err(Error::invalid(format!("unsupported rows_version {}", f.rows_version)));
        }
        for r in &f.rows {
            let evaluated_fields = r.distance.is_some() && r.violated.is_some() && r.oracle_success.is_some();
            let consistent = match r.status {
                RowStatus::Evaluated => evaluated_fields && r.skip_reason.is_none(),
                RowStatus::Skipped => r.violated.is_none() && r.skip_reason.is_some(),
            };
            if !consistent {
                return Err(Error::invalid(format!(
                    "row {}/{}/{} has fields inconsistent with status",
                    r.source_id, r.mr, r.strictness
                )));
            }
        }
        Ok(f)
    }
}

/// Seed for the follow-up of `tc` under `mr`.
fn followup_seed(seed: u64, tc: &TestCase, mr: MRKind) -> u64 {
    fnv1a(format!("{seed}/{}/{}/{}", tc.id, tc.seed, mr.as_str()).as_bytes())
}

fn write_trace(settings: &CampaignSettings, id: &str, r: &ExecutionResult) -> Result<()> {
    if let Some(dir) = &settings.trace_dir {
        let mut buf = Vec::new();
        r.write_trace_jsonl(&mut buf)?;
        let name: String = id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "-_.~".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        fs::write(dir.join(format!("{name}.jsonl")), buf)?;
    }
    Ok(())
}

fn skipped_rows(settings: &CampaignSettings, tc: &TestCase, mr: MRKind, reason: String) -> Vec<CampaignRow> {
    settings
        .strictness
        .iter()
        .map(|&strictness| CampaignRow {
            source_id: tc.id.clone(),
            followup_id: format!("{}~{}", tc.id, mr.short()),
            mr,
            strictness,
            status: RowStatus::Skipped,
            distance: None,
            lower: None,
            upper: None,
            violated: None,
            oracle_success: None,
            oracle_reason: None,
            diagnosis: Vec::new(),
            meta: None,
            skip_reason: Some(reason.clone()),
        })
        .collect()
}

fn followup_rows(
    settings: &CampaignSettings,
    tc: &TestCase,
    source: &ExecutionResult,
    mr: MRKind,
) -> Result<Vec<CampaignRow>> {
    let attempt = || -> Result<_> {
        let f = generate_followup_with(mr, tc, followup_seed(settings.seed, tc, mr), &settings.followup)?;
        let r = execute_with_relocation(&f.test, &settings.fault, f.meta.delta_p())?;
        let oracle = check_task(&f.test, &r)?;
        Ok((f, r, oracle))
    };
    let (f, r, oracle) = match attempt() {
        Ok(v) => v,
        Err(e @ (Error::Io(_) | Error::Json(_) | Error::Csv(_))) => return Err(e),
        Err(e) => return Ok(skipped_rows(settings, tc, mr, e.to_string())),
    };
    write_trace(settings, &f.id, &r)?;
    let diagnosis: Vec<FailureLabel> = diagnose(&r, &f.test, &oracle).labels.into_iter().collect();
    settings
        .strictness
        .iter()
        .map(|&level| {
            let (alpha, beta) = settings.mr5.at(level);
            let v = evaluate(mr, &source.trajectory, &r.trajectory, level, &f.meta, alpha, beta)?;
            Ok(CampaignRow {
                source_id: tc.id.clone(),
                followup_id: f.id.clone(),
                mr,
                strictness: level,
                status: RowStatus::Evaluated,
                distance: Some(v.distance),
                lower: v.lower,
                upper: v.upper,
                violated: Some(v.violated),
                oracle_success: Some(oracle.success),
                oracle_reason: Some(oracle.reason.clone()),
                diagnosis: diagnosis.clone(),
                meta: Some(f.meta.clone()),
                skip_reason: None,
            })
        })
        .collect()
}

enum SourceOutcome {
    Retained(ExecutionResult),
    Excluded(String),
}

fn run_source(settings: &CampaignSettings, tc: &TestCase) -> Result<SourceOutcome> {
    if let Some(issue) = validate_case(tc).first() {
        return Ok(SourceOutcome::Excluded(format!("invalid: {issue}")));
    }
    let r = match execute(tc, &settings.fault) {
        Ok(r) => r,
        Err(e @ (Error::Io(_) | Error::Json(_) | Error::Csv(_))) => return Err(e),
        Err(e) => return Ok(SourceOutcome::Excluded(format!("execution failed: {e}"))),
    };
    write_trace(settings, &tc.id, &r)?;
    let oracle = match check_task(tc, &r) {
        Ok(v) => v,
        Err(e) => return Ok(SourceOutcome::Excluded(format!("oracle failed: {e}"))),
    };
    Ok(if oracle.success {
        SourceOutcome::Retained(r)
    } else {
        SourceOutcome::Excluded(format!("source oracle failed: {}", oracle.reason))
    })
}

/// Executes every source, keeps those whose oracle succeeds, and evaluates
/// one follow-up per requested relation at every requested strictness.
/// Output order is independent of `settings.jobs`.
pub fn run_campaign(sources: &[TestCase], settings: &CampaignSettings) -> Result<CampaignResult> {
    settings.fault.validate()?;
    settings.mr5.validate()?;
    if settings.mrs.is_empty() || settings.strictness.is_empty() {
        return Err(Error::invalid(
            "a campaign needs at least one relation and one strictness level",
        ));
    }
    let mut ids = BTreeSet::new();
    for tc in sources {
        if !ids.insert(tc.id.as_str()) {
            return Err(Error::invalid(format!("duplicate source id `{}`", tc.id)));
        }
    }
    if let Some(dir) = &settings.trace_dir {
        fs::create_dir_all(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;

    pool.install(|| {
        let outcomes = sources
            .par_iter()
            .map(|tc| run_source(settings, tc))
            .collect::<Result<Vec<_>>>()?;

        let mut excluded = Vec::new();
        let mut work = Vec::new();
        for (tc, outcome) in sources.iter().zip(&outcomes) {
            match outcome {
                SourceOutcome::Retained(r) => work.extend(settings.mrs.iter().map(|&mr| (tc, r, mr))),
                SourceOutcome::Excluded(reason) => excluded.push(ExcludedSource {
                    source_id: tc.id.clone(),
                    reason: reason.clone(),
                }),
            }
        }
        let mut rows: Vec<CampaignRow> = work
            .par_iter()
            .map(|(tc, r, mr)| followup_rows(settings, tc, r, *mr))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        excluded.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        Ok(CampaignResult { rows, excluded })
    })
}
