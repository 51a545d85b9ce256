//! Campaign configuration file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::mt::{CampaignSettings, FollowUpOptions, MRKind, Mr5Bounds, StrictnessLevel, DEFAULT_MR3_FACTORS};
use crate::scene::{Lexicon, TaskKind};
use crate::sim::FaultProfile;

/// Every field is optional in the file; missing fields take the defaults
/// below. Command-line flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub tasks: BTreeSet<TaskKind>,
    pub sources_per_task: usize,
    pub mrs: BTreeSet<MRKind>,
    pub strictness: BTreeSet<StrictnessLevel>,
    pub fault: FaultProfile,
    pub mr5_alpha: Option<f64>,
    pub mr5_beta: Option<f64>,
    /// Use the per-strictness (alpha, beta) presets instead of one pair.
    pub mr5_presets: bool,
    pub mr3_factors: Vec<f64>,
    /// Suite read by `run`; defaults to `<output_dir>/suite.json`.
    pub suite: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 0,
            tasks: TaskKind::ALL.into_iter().collect(),
            sources_per_task: 10,
            mrs: MRKind::ALL.into_iter().collect(),
            strictness: StrictnessLevel::ALL.into_iter().collect(),
            fault: FaultProfile::none(),
            mr5_alpha: None,
            mr5_beta: None,
            mr5_presets: false,
            mr3_factors: DEFAULT_MR3_FACTORS.to_vec(),
            suite: None,
            output_dir: PathBuf::from("trajmt-out"),
            jobs: 1,
        }
    }
}

impl CampaignConfig {
    pub fn from_json(s: &str) -> Result<CampaignConfig> {
        let c: CampaignConfig = canonical::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        canonical::to_string(self)
    }

    pub fn load(path: &Path) -> Result<CampaignConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        CampaignConfig::from_json(&text)
    }

    pub fn mr5_bounds(&self) -> Result<Mr5Bounds> {
        if self.mr5_presets {
            if self.mr5_alpha.is_some() || self.mr5_beta.is_some() {
                return Err(Error::invalid("mr5_presets excludes mr5_alpha/mr5_beta"));
            }
            return Ok(Mr5Bounds::Presets);
        }
        let Mr5Bounds::Fixed { alpha, beta } = Mr5Bounds::default() else {
            unreachable!("default bounds are fixed")
        };
        let bounds = Mr5Bounds::Fixed {
            alpha: self.mr5_alpha.unwrap_or(alpha),
            beta: self.mr5_beta.unwrap_or(beta),
        };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources_per_task == 0 {
            return Err(Error::invalid("sources_per_task must be at least 1"));
        }
        if self.tasks.is_empty() || self.mrs.is_empty() || self.strictness.is_empty() {
            return Err(Error::invalid("tasks, mrs and strictness must be non-empty"));
        }
        if self.mr3_factors.is_empty() || self.mr3_factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid("mr3_factors must be non-empty, finite and positive"));
        }
        self.fault.validate()?;
        self.mr5_bounds()?;
        Ok(())
    }

    pub fn suite_path(&self) -> PathBuf {
        self.suite.clone().unwrap_or_else(|| self.output_dir.join("suite.json"))
    }

    pub fn settings(&self) -> Result<CampaignSettings> {
        self.validate()?;
        Ok(CampaignSettings {
            mrs: self.mrs.clone(),
            strictness: self.strictness.clone(),
            fault: self.fault,
            seed: self.seed,
            mr5: self.mr5_bounds()?,
            followup: FollowUpOptions {
                lexicon: Lexicon::default(),
                mr3_factors: self.mr3_factors.clone(),
            },
            jobs: self.jobs,
            trace_dir: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = CampaignConfig::from_json("{}").unwrap();
        assert_eq!(c, CampaignConfig::default());
        assert_eq!(c.mr5_bounds().unwrap(), Mr5Bounds::Fixed { alpha: 0.5, beta: 2.0 });

        let c = CampaignConfig::from_json(r#"{"seed": 4, "mrs": ["MR4_Negation"], "mr5_beta": 3.0}"#).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.mrs, BTreeSet::from([MRKind::Mr4Negation]));
        assert_eq!(c.mr5_bounds().unwrap(), Mr5Bounds::Fixed { alpha: 0.5, beta: 3.0 });
    }

    #[test]
    fn rejects_bad_values() {
        assert!(CampaignConfig::from_json(r#"{"sources_per_task": 0}"#).is_err());
        assert!(CampaignConfig::from_json(r#"{"mr5_alpha": 3.0}"#).is_err());
        assert!(CampaignConfig::from_json(r#"{"mr5_presets": true, "mr5_alpha": 0.1}"#).is_err());
        assert!(CampaignConfig::from_json(r#"{"unknown": 1}"#).is_err());
        assert!(CampaignConfig::from_json(r#"{"mr3_factors": []}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = CampaignConfig::default();
        assert_eq!(CampaignConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }
}
