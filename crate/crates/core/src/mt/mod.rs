//! The five metamorphic relations: follow-up generation and verdicts.
//!
//! Relations MR1-MR3 follow the trajectory-consistency pattern: the
//! follow-up trajectory should stay within `delta` of the source. MR4 and
//! MR5 follow the trajectory-variation pattern: negating the instruction
//! must move the trajectory at least `delta` away, and relocating the target
//! by `dp` must move it between `alpha * |dp|` and `beta * |dp|`.

mod campaign;
mod followup;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{discrete_frechet, Trajectory};

pub use campaign::{
    run_campaign, CampaignResult, CampaignRow, CampaignSettings, ExcludedSource, RowStatus, RowsFile, ROWS_VERSION,
};
pub use followup::{
    generate_followup, generate_followup_with, FollowUpCase, FollowUpMeta, FollowUpOptions, DEFAULT_MR3_FACTORS,
    DISTRACTOR_HALF_EXTENT, MR2_PATH_CLEARANCE, MR2_TARGET_SPACING, MR5_MAX_SHIFT, MR5_MIN_SHIFT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MRKind {
    #[serde(rename = "MR1_Synonym")]
    Mr1Synonym,
    #[serde(rename = "MR2_ObjectAddition")]
    Mr2ObjectAddition,
    #[serde(rename = "MR3_Brightness")]
    Mr3Brightness,
    #[serde(rename = "MR4_Negation")]
    Mr4Negation,
    #[serde(rename = "MR5_Relocation")]
    Mr5Relocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    /// Trajectory consistency.
    TC,
    /// Trajectory variation.
    TV,
}

impl MRKind {
    pub const ALL: [MRKind; 5] = [
        MRKind::Mr1Synonym,
        MRKind::Mr2ObjectAddition,
        MRKind::Mr3Brightness,
        MRKind::Mr4Negation,
        MRKind::Mr5Relocation,
    ];

    pub fn pattern(self) -> Pattern {
        match self {
            MRKind::Mr1Synonym | MRKind::Mr2ObjectAddition | MRKind::Mr3Brightness => Pattern::TC,
            MRKind::Mr4Negation | MRKind::Mr5Relocation => Pattern::TV,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MRKind::Mr1Synonym => "MR1_Synonym",
            MRKind::Mr2ObjectAddition => "MR2_ObjectAddition",
            MRKind::Mr3Brightness => "MR3_Brightness",
            MRKind::Mr4Negation => "MR4_Negation",
            MRKind::Mr5Relocation => "MR5_Relocation",
        }
    }

    pub fn short(self) -> &'static str {
        &self.as_str()[..3]
    }
}

impl fmt::Display for MRKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MRKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        MRKind::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s) || m.short().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown metamorphic relation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrictnessLevel {
    High,
    Medium,
    Low,
}

impl StrictnessLevel {
    pub const ALL: [StrictnessLevel; 3] = [StrictnessLevel::High, StrictnessLevel::Medium, StrictnessLevel::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            StrictnessLevel::High => "high",
            StrictnessLevel::Medium => "medium",
            StrictnessLevel::Low => "low",
        }
    }

    /// Tolerance for the relation. Consistency relations accept at most
    /// 0.1/0.2/0.3 m of deviation; the negation relation demands at least
    /// 0.3/0.2/0.1 m, so `High` flags the most under both patterns.
    pub fn delta(self, mr: MRKind) -> f64 {
        match (mr.pattern(), self) {
            (Pattern::TC, StrictnessLevel::High) | (Pattern::TV, StrictnessLevel::Low) => 0.1,
            (_, StrictnessLevel::Medium) => 0.2,
            (Pattern::TC, StrictnessLevel::Low) | (Pattern::TV, StrictnessLevel::High) => 0.3,
        }
    }

    /// (alpha, beta) presets for the relocation relation.
    pub fn mr5_preset(self) -> (f64, f64) {
        match self {
            StrictnessLevel::High => (0.8, 1.5),
            StrictnessLevel::Medium => (0.5, 2.0),
            StrictnessLevel::Low => (0.3, 3.0),
        }
    }
}

impl fmt::Display for StrictnessLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrictnessLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StrictnessLevel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown strictness `{s}`")))
    }
}

pub const MR5_DEFAULT_ALPHA: f64 = 0.5;
pub const MR5_DEFAULT_BETA: f64 = 2.0;

/// How MR5's proportionality bounds are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mr5Bounds {
    /// The same `(alpha, beta)` at every strictness level.
    Fixed { alpha: f64, beta: f64 },
    /// [`StrictnessLevel::mr5_preset`] per level.
    Presets,
}

impl Default for Mr5Bounds {
    fn default() -> Self {
        Mr5Bounds::Fixed {
            alpha: MR5_DEFAULT_ALPHA,
            beta: MR5_DEFAULT_BETA,
        }
    }
}

impl Mr5Bounds {
    pub fn at(self, level: StrictnessLevel) -> (f64, f64) {
        match self {
            Mr5Bounds::Fixed { alpha, beta } => (alpha, beta),
            Mr5Bounds::Presets => level.mr5_preset(),
        }
    }

    pub fn validate(self) -> Result<()> {
        for level in StrictnessLevel::ALL {
            let (a, b) = self.at(level);
            if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
                return Err(Error::invalid(format!("bad MR5 bounds alpha={a} beta={b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strictness {
    pub level: StrictnessLevel,
    pub delta: f64,
}

impl Strictness {
    pub fn for_mr(level: StrictnessLevel, mr: MRKind) -> Self {
        Strictness {
            level,
            delta: level.delta(mr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub mr: MRKind,
    pub strictness: Strictness,
    pub distance: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub violated: bool,
}

/// The violation rule shared by every relation.
pub fn is_violation(distance: f64, lower: Option<f64>, upper: Option<f64>) -> bool {
    lower.is_some_and(|l| distance < l) || upper.is_some_and(|u| distance > u)
}

/// Compares a source and follow-up trajectory under relation `mr`.
/// `alpha`/`beta` only matter for MR5, which also needs relocation metadata.
pub fn evaluate(
    mr: MRKind,
    source: &Trajectory,
    followup: &Trajectory,
    level: StrictnessLevel,
    meta: &FollowUpMeta,
    alpha: f64,
    beta: f64,
) -> Result<Verdict> {
    let (lower, upper) = bounds(mr, level, meta, alpha, beta)?;
    let distance = discrete_frechet(source, followup)?;
    Ok(Verdict {
        mr,
        strictness: Strictness::for_mr(level, mr),
        distance,
        lower,
        upper,
        violated: is_violation(distance, lower, upper),
    })
}

pub(crate) fn bounds(
    mr: MRKind,
    level: StrictnessLevel,
    meta: &FollowUpMeta,
    alpha: f64,
    beta: f64,
) -> Result<(Option<f64>, Option<f64>)> {
    let delta = level.delta(mr);
    Ok(match mr {
        MRKind::Mr1Synonym | MRKind::Mr2ObjectAddition | MRKind::Mr3Brightness => (None, Some(delta)),
        MRKind::Mr4Negation => (Some(delta), None),
        MRKind::Mr5Relocation => {
            let FollowUpMeta::Relocation { delta_p: [dx, dy] } = meta else {
                return Err(Error::invalid("MR5 needs relocation metadata (delta_p)"));
            };
            if !(alpha.is_finite() && beta.is_finite() && 0.0 <= alpha && alpha <= beta) {
                return Err(Error::invalid(format!("bad MR5 bounds alpha={alpha} beta={beta}")));
            }
            let shift = (dx * dx + dy * dy).sqrt();
            (Some(alpha * shift), Some(beta * shift))
        }
    })
}
