//! Deterministic kinematic world driven by a scripted pick-and-place
//! controller, standing in for a learned policy.
//!
//! The controller moves the end effector 0.01 m per step along straight
//! waypoint segments. Grasping is a rigid attach when the gripper closes
//! within 0.02 m of an object's top-face center; released objects that are
//! not supported fall at [`FALL_PER_STEP`] until they rest on the table or
//! on another object. Faults perturb the plan to model typical failure
//! modes of learned controllers.

mod plan;
mod world;

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Quaternion, Sample, Trajectory};
use crate::scene::{validate_case, Scene, TestCase};

pub(crate) use plan::fnv1a;
pub use plan::{nominal_waypoints, APPROACH_CLEARANCE, CARRY_HEIGHT, LOW_LIFT, NEAR_GAP, RETREAT_HEIGHT};

pub const STEP_SIZE: f64 = 0.01;
pub const GRASP_RANGE: f64 = 0.02;
pub const FALL_PER_STEP: f64 = 0.02;
/// Length of the trajectory emitted when the controller refuses to move.
pub const REFUSAL_STEPS: usize = 20;
/// Steps between an involuntary drop and the recovery motion.
pub const REGRASP_DELAY: usize = 10;
/// Period, in steps, of the oscillation superimposed on travel segments.
pub const OSCILLATION_PERIOD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    None,
    PromptVerbSensitivity,
    DistractorAttraction,
    IlluminationSensitivity,
    NegationBlindness,
    RelocationReaction,
    GraspInstability,
    OscillationNoise,
    CollisionBlindness,
}

impl FaultKind {
    pub const ALL: [FaultKind; 9] = [
        FaultKind::None,
        FaultKind::PromptVerbSensitivity,
        FaultKind::DistractorAttraction,
        FaultKind::IlluminationSensitivity,
        FaultKind::NegationBlindness,
        FaultKind::RelocationReaction,
        FaultKind::GraspInstability,
        FaultKind::OscillationNoise,
        FaultKind::CollisionBlindness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::None => "none",
            FaultKind::PromptVerbSensitivity => "prompt_verb_sensitivity",
            FaultKind::DistractorAttraction => "distractor_attraction",
            FaultKind::IlluminationSensitivity => "illumination_sensitivity",
            FaultKind::NegationBlindness => "negation_blindness",
            FaultKind::RelocationReaction => "relocation_reaction",
            FaultKind::GraspInstability => "grasp_instability",
            FaultKind::OscillationNoise => "oscillation_noise",
            FaultKind::CollisionBlindness => "collision_blindness",
        }
    }
}

impl FromStr for FaultKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        FaultKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm || k.as_str().replace('_', "") == norm)
            .ok_or_else(|| Error::invalid(format!("unknown fault kind `{s}`")))
    }
}

/// A behavioural defect injected into the controller.
///
/// `magnitude` is in meters for offset-style faults. For
/// [`FaultKind::RelocationReaction`] it is the fraction of a target
/// relocation the controller reacts to (1.0 reacts exactly).
/// `trigger_step` applies to [`FaultKind::GraspInstability`]: the object is
/// dropped at the first step at or after it where a held object is off its
/// support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultProfile {
    pub kind: FaultKind,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default)]
    pub trigger_step: Option<u64>,
}

impl Default for FaultProfile {
    fn default() -> Self {
        FaultProfile::none()
    }
}

impl FaultProfile {
    pub const fn none() -> Self {
        FaultProfile {
            kind: FaultKind::None,
            magnitude: 0.0,
            trigger_step: None,
        }
    }

    pub const fn new(kind: FaultKind, magnitude: f64) -> Self {
        FaultProfile {
            kind,
            magnitude,
            trigger_step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return Err(Error::invalid(format!(
                "fault magnitude must be finite and >= 0, got {}",
                self.magnitude
            )));
        }
        Ok(())
    }
}

impl FromStr for FaultProfile {
    type Err = Error;

    /// `kind[:magnitude[:trigger_step]]`
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let kind: FaultKind = parts.next().unwrap_or_default().parse()?;
        let magnitude = match parts.next() {
            Some(m) => m
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad fault magnitude `{m}`")))?,
            None => 0.0,
        };
        let trigger_step = match parts.next() {
            Some(t) => Some(
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::invalid(format!("bad trigger step `{t}`")))?,
            ),
            None => None,
        };
        if parts.next().is_some() {
            return Err(Error::invalid(format!(
                "bad fault `{s}`, expected kind[:magnitude[:trigger_step]]"
            )));
        }
        let fault = FaultProfile {
            kind,
            magnitude,
            trigger_step,
        };
        fault.validate()?;
        Ok(fault)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperState {
    Open,
    Closed,
    Holding(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GripperSample {
    pub step: u64,
    pub state: GripperState,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Grasp {
        object: String,
    },
    Release {
        object: String,
    },
    Drop {
        object: String,
    },
    /// `a` is `"gripper"` for end-effector contacts.
    Contact {
        a: String,
        b: String,
    },
}

pub const GRIPPER_ID: &str = "gripper";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub trajectory: Trajectory,
    pub gripper: Vec<GripperSample>,
    pub object_traces: BTreeMap<String, Trajectory>,
    pub events: Vec<Event>,
    pub steps: usize,
    pub moved: bool,
}

impl ExecutionResult {
    pub fn final_gripper(&self) -> &GripperState {
        &self.gripper[self.gripper.len() - 1].state
    }

    pub fn holds_at_end(&self, id: &str) -> bool {
        matches!(self.final_gripper(), GripperState::Holding(h) if h == id)
    }

    pub fn object_trace(&self, id: &str) -> Result<&Trajectory> {
        self.object_traces
            .get(id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    /// One canonical JSON record per step: end-effector pose, gripper state
    /// and every object pose.
    pub fn write_trace_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Record<'a> {
            step: u64,
            ee: &'a Pose,
            gripper: &'a GripperState,
            objects: BTreeMap<&'a str, &'a Pose>,
        }
        for (i, s) in self.trajectory.samples().iter().enumerate() {
            let objects = self
                .object_traces
                .iter()
                .map(|(id, t)| (id.as_str(), &t.samples()[i].pose))
                .collect();
            let rec = Record {
                step: s.step,
                ee: &s.pose,
                gripper: &self.gripper[i].state,
                objects,
            };
            writeln!(w, "{}", canonical::to_line(&rec)?)?;
        }
        Ok(())
    }
}

/// Runs `tc` through the controller. Pure in `(tc, fault)`.
pub fn execute(tc: &TestCase, fault: &FaultProfile) -> Result<ExecutionResult> {
    execute_with_relocation(tc, fault, None)
}

/// As [`execute`], for a case whose target was relocated by `delta_p`
/// relative to its parent. Only [`FaultKind::RelocationReaction`] looks at it.
pub fn execute_with_relocation(
    tc: &TestCase,
    fault: &FaultProfile,
    delta_p: Option<[f64; 2]>,
) -> Result<ExecutionResult> {
    fault.validate()?;
    if let Some(issue) = validate_case(tc).first() {
        return Err(Error::invalid(format!("test case `{}`: {issue}", tc.id)));
    }
    if tc.prompt.negated && fault.kind != FaultKind::NegationBlindness {
        // Still resolve labels so unresolvable prompts error consistently.
        plan::resolve_case(tc)?;
        return stationary_result(&tc.scene, REFUSAL_STEPS);
    }
    let actions = plan::plan(tc, fault, delta_p)?;
    Ok(world::run(&tc.scene, fault, actions))
}

/// The robot stays at home for `steps` steps with the gripper open.
pub fn stationary_result(scene: &Scene, steps: usize) -> Result<ExecutionResult> {
    if steps == 0 {
        return Err(Error::invalid("stationary result needs at least one step"));
    }
    let home = Pose::oriented(scene.home(), Quaternion::GRASP_DOWN);
    let samples = (0..steps as u64).map(|step| Sample { step, pose: home }).collect();
    let object_traces = scene
        .objects
        .iter()
        .map(|o| {
            let samples = (0..steps as u64).map(|step| Sample { step, pose: o.pose }).collect();
            Ok((o.id.clone(), Trajectory::new(samples)?))
        })
        .collect::<Result<_>>()?;
    Ok(ExecutionResult {
        trajectory: Trajectory::new(samples)?,
        gripper: (0..steps as u64)
            .map(|step| GripperSample {
                step,
                state: GripperState::Open,
            })
            .collect(),
        object_traces,
        events: Vec::new(),
        steps,
        moved: false,
    })
}
