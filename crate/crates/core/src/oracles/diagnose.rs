use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{OracleVerdict, NEAR_THRESHOLD};
use crate::geometry::{euclidean, path_length, Trajectory, Vec3};
use crate::scene::{box_penetration, point_penetration, TaskKind, TestCase};
use crate::sim::{nominal_waypoints, EventKind, ExecutionResult, GRIPPER_ID};

pub const COLLISION_DEPTH: f64 = 1e-3;
pub const SUBOPTIMALITY_RATIO: f64 = 2.0;
pub const REVERSAL_LIMIT: usize = 8;
pub const NO_MOTION_DISTANCE: f64 = 1e-3;
/// Placement tolerance for put-on/put-in, measured from the reference
/// footprint. Move-near uses [`NEAR_THRESHOLD`].
pub const FOOTPRINT_TOLERANCE: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureLabel {
    Collision,
    TrajectorySubOptimality,
    ControlInstability,
    GraspInstability,
    PlacementError,
    IncompleteTask,
    InstructionViolation,
    NoMotion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureCategory {
    Manipulation,
    Motion,
    PlanningAndReasoning,
}

impl FailureLabel {
    pub const ALL: [FailureLabel; 8] = [
        FailureLabel::Collision,
        FailureLabel::TrajectorySubOptimality,
        FailureLabel::ControlInstability,
        FailureLabel::GraspInstability,
        FailureLabel::PlacementError,
        FailureLabel::IncompleteTask,
        FailureLabel::InstructionViolation,
        FailureLabel::NoMotion,
    ];

    pub fn category(self) -> FailureCategory {
        match self {
            FailureLabel::GraspInstability | FailureLabel::PlacementError => FailureCategory::Manipulation,
            FailureLabel::Collision | FailureLabel::TrajectorySubOptimality | FailureLabel::ControlInstability => {
                FailureCategory::Motion
            }
            FailureLabel::IncompleteTask | FailureLabel::InstructionViolation | FailureLabel::NoMotion => {
                FailureCategory::PlanningAndReasoning
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FailureLabel::Collision => "Collision",
            FailureLabel::TrajectorySubOptimality => "TrajectorySubOptimality",
            FailureLabel::ControlInstability => "ControlInstability",
            FailureLabel::GraspInstability => "GraspInstability",
            FailureLabel::PlacementError => "PlacementError",
            FailureLabel::IncompleteTask => "IncompleteTask",
            FailureLabel::InstructionViolation => "InstructionViolation",
            FailureLabel::NoMotion => "NoMotion",
        }
    }
}

impl fmt::Display for FailureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labels that fired, each with the scalar that triggered it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureDiagnosis {
    pub labels: BTreeSet<FailureLabel>,
    pub metrics: BTreeMap<FailureLabel, f64>,
}

impl FailureDiagnosis {
    fn fire(&mut self, label: FailureLabel, evidence: f64) {
        self.labels.insert(label);
        self.metrics.insert(label, evidence);
    }

    pub fn has(&self, label: FailureLabel) -> bool {
        self.labels.contains(&label)
    }

    /// Labels joined with `|`, in enum order.
    pub fn joined(&self) -> String {
        self.labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join("|")
    }
}

/// Largest per-axis count of velocity sign changes, ignoring still steps.
pub fn velocity_reversals(t: &Trajectory) -> usize {
    let pts: Vec<Vec3> = t.positions().collect();
    (0..3)
        .map(|axis| {
            let mut last = 0i8;
            let mut count = 0;
            for w in pts.windows(2) {
                let v = w[1].0[axis] - w[0].0[axis];
                let sign = if v > 1e-9 {
                    1
                } else if v < -1e-9 {
                    -1
                } else {
                    0
                };
                if sign != 0 {
                    if last != 0 && sign != last {
                        count += 1;
                    }
                    last = sign;
                }
            }
            count
        })
        .max()
        .unwrap_or(0)
}

fn deepest_penetration(r: &ExecutionResult, tc: &TestCase) -> f64 {
    let objects = &tc.scene.objects;
    let traces: Vec<Option<&Trajectory>> = objects.iter().map(|o| r.object_traces.get(&o.id)).collect();
    let mut deepest: f64 = 0.0;
    for step in 0..r.steps {
        let ee = r.trajectory.samples()[step].pose.position;
        for (i, a) in objects.iter().enumerate() {
            let Some(ta) = traces[i] else { continue };
            let ca = ta.samples()[step].pose.position;
            let held = matches!(&r.gripper[step].state, crate::sim::GripperState::Holding(h) if *h == a.id);
            if a.id != tc.prompt.target_id && !held {
                deepest = deepest.max(point_penetration(ee, a, ca));
            }
            for (j, b) in objects.iter().enumerate().skip(i + 1) {
                let Some(tb) = traces[j] else { continue };
                deepest = deepest.max(box_penetration(a, ca, b, tb.samples()[step].pose.position));
            }
        }
    }
    deepest
}

/// Distance from the target's final center to the goal region, and the
/// task's placement tolerance. `None` for pick-up.
fn placement_miss(r: &ExecutionResult, tc: &TestCase) -> Option<(f64, f64)> {
    let p = &tc.prompt;
    let reference = tc.scene.object(p.reference_id.as_deref()?)?;
    let a = r.object_traces.get(&p.target_id)?.last().position;
    let b = r.object_traces.get(&reference.id)?.last().position;
    match p.task {
        TaskKind::PickUp => None,
        TaskKind::MoveNear => Some(((a - b).horizontal_norm(), NEAR_THRESHOLD)),
        TaskKind::PutOn | TaskKind::PutIn => {
            let region = if p.task == TaskKind::PutIn {
                reference.cavity_at(b)
            } else {
                reference.bounds_at(b)
            };
            let dx = (region.min.x() - a.x()).max(a.x() - region.max.x()).max(0.0);
            let dy = (region.min.y() - a.y()).max(a.y() - region.max.y()).max(0.0);
            Some(((dx * dx + dy * dy).sqrt(), FOOTPRINT_TOLERANCE))
        }
    }
}

/// Assigns failure labels to an execution by heuristics over its traces.
pub fn diagnose(r: &ExecutionResult, tc: &TestCase, oracle: &OracleVerdict) -> FailureDiagnosis {
    let mut d = FailureDiagnosis::default();
    let negated = tc.prompt.negated;
    let travelled = path_length(&r.trajectory);

    let contacts = r
        .events
        .iter()
        .filter(|e| match &e.kind {
            EventKind::Contact { a, b } => !(a == GRIPPER_ID && *b == tc.prompt.target_id),
            _ => false,
        })
        .count();
    let depth = deepest_penetration(r, tc);
    if contacts > 0 || depth > COLLISION_DEPTH {
        d.fire(FailureLabel::Collision, depth);
    }

    let drops = r
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Drop { .. }))
        .count();
    if drops > 0 {
        d.fire(FailureLabel::GraspInstability, drops as f64);
    }

    if let Ok(nominal) = nominal_waypoints(tc) {
        let bound: f64 = nominal.windows(2).map(|w| euclidean(w[0], w[1])).sum();
        if bound > 1e-9 {
            let ratio = travelled / bound;
            if ratio > SUBOPTIMALITY_RATIO {
                d.fire(FailureLabel::TrajectorySubOptimality, ratio);
            }
        }
    }

    let reversals = velocity_reversals(&r.trajectory);
    if reversals > REVERSAL_LIMIT {
        d.fire(FailureLabel::ControlInstability, reversals as f64);
    }

    if !oracle.success && !negated && !r.holds_at_end(&tc.prompt.target_id) {
        if let Some((miss, tol)) = placement_miss(r, tc) {
            if miss <= 2.0 * tol {
                d.fire(FailureLabel::PlacementError, miss);
            }
        }
    }

    if negated && r.moved {
        d.fire(FailureLabel::InstructionViolation, travelled);
    }
    if !negated && travelled < NO_MOTION_DISTANCE {
        d.fire(FailureLabel::NoMotion, travelled);
    }
    if !oracle.success && d.labels.is_empty() {
        d.fire(FailureLabel::IncompleteTask, 1.0);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversal_counting() {
        let zig: Vec<Vec3> = (0..12)
            .map(|k| Vec3::new(0.01 * k as f64, if k % 2 == 0 { 0.0 } else { 0.05 }, 0.0))
            .collect();
        let t = Trajectory::from_positions(&zig).unwrap();
        assert_eq!(velocity_reversals(&t), 10);

        let straight: Vec<Vec3> = (0..12).map(|k| Vec3::new(0.01 * k as f64, 0.0, 0.0)).collect();
        assert_eq!(velocity_reversals(&Trajectory::from_positions(&straight).unwrap()), 0);

        let pause = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.2, 0.0, 0.0),
        ];
        assert_eq!(velocity_reversals(&Trajectory::from_positions(&pause).unwrap()), 0);
    }

    #[test]
    fn categories() {
        assert_eq!(FailureLabel::Collision.category(), FailureCategory::Motion);
        assert_eq!(FailureLabel::PlacementError.category(), FailureCategory::Manipulation);
        assert_eq!(FailureLabel::NoMotion.category(), FailureCategory::PlanningAndReasoning);
    }
}
