//! Symbolic task-success oracles over final world state, plus heuristic
//! failure diagnosis.
//!
//! All `<=`/`>=` threshold comparisons are inclusive, with a 1e-9 m slack so
//! that values landing on a bound after floating point arithmetic count as
//! on the bound.

mod diagnose;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Scene, TaskKind, TestCase};
use crate::sim::ExecutionResult;

pub use diagnose::{diagnose, velocity_reversals, FailureCategory, FailureDiagnosis, FailureLabel};

pub const LIFT_THRESHOLD: f64 = 0.02;
pub const LIFT_FRAMES: usize = 5;
pub const NEAR_THRESHOLD: f64 = 0.05;
pub const STACK_GAP: f64 = 5e-3;
pub const STILLNESS: f64 = 1e-4;
pub const STILL_FRAMES: usize = 5;
pub(crate) const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub success: bool,
    pub reason: String,
}

impl OracleVerdict {
    pub fn pass() -> Self {
        OracleVerdict {
            success: true,
            reason: "ok".into(),
        }
    }

    pub fn fail(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        debug_assert!(!reason.is_empty());
        OracleVerdict { success: false, reason }
    }
}

/// Pick-up: the gripper holds the target at the end and the target was
/// lifted at least [`LIFT_THRESHOLD`] above its starting height for
/// [`LIFT_FRAMES`] consecutive steps.
pub fn oracle_pick_up(r: &ExecutionResult, target_id: &str) -> Result<OracleVerdict> {
    let trace = r.object_trace(target_id)?;
    let z0 = trace.first().position.z();
    let mut run = 0usize;
    let mut longest = 0usize;
    let mut peak = f64::NEG_INFINITY;
    for p in trace.positions() {
        let lift = p.z() - z0;
        peak = peak.max(lift);
        if lift >= LIFT_THRESHOLD - SLACK {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    if longest == 0 {
        return Ok(OracleVerdict::fail(format!("insufficient lift (peak {peak:.4} m)")));
    }
    if longest < LIFT_FRAMES {
        return Ok(OracleVerdict::fail(format!(
            "lift held for {longest} consecutive steps, need {LIFT_FRAMES}"
        )));
    }
    if !r.holds_at_end(target_id) {
        return Ok(OracleVerdict::fail("target not held at episode end"));
    }
    Ok(OracleVerdict::pass())
}

/// Move-near: final horizontal center distance at most [`NEAR_THRESHOLD`]
/// and `a` released.
pub fn oracle_move_near(r: &ExecutionResult, a_id: &str, b_id: &str) -> Result<OracleVerdict> {
    let a = r.object_trace(a_id)?.last().position;
    let b = r.object_trace(b_id)?.last().position;
    if r.holds_at_end(a_id) {
        return Ok(OracleVerdict::fail("object still held"));
    }
    let d = (a - b).horizontal_norm();
    if d > NEAR_THRESHOLD + SLACK {
        return Ok(OracleVerdict::fail(format!("objects {d:.4} m apart")));
    }
    Ok(OracleVerdict::pass())
}

/// Put-on: `a` rests on top of `b` (bottom within [`STACK_GAP`] of `b`'s top,
/// center over `b`'s footprint), released, and still over the last
/// [`STILL_FRAMES`] steps.
pub fn oracle_put_on(r: &ExecutionResult, scene: &Scene, a_id: &str, b_id: &str) -> Result<OracleVerdict> {
    let a_obj = scene.require(a_id)?;
    let b_obj = scene.require(b_id)?;
    if b_obj.is_container {
        return Err(Error::invalid(format!("put_on reference `{b_id}` is a container")));
    }
    let a_trace = r.object_trace(a_id)?;
    let a = a_trace.last().position;
    let b = r.object_trace(b_id)?.last().position;
    if r.holds_at_end(a_id) {
        return Ok(OracleVerdict::fail("object still held"));
    }
    let gap = (a.z() - a_obj.half_extents.z()) - (b.z() + b_obj.half_extents.z());
    if gap.abs() > STACK_GAP + SLACK {
        return Ok(OracleVerdict::fail(format!(
            "not resting on reference (gap {gap:.4} m)"
        )));
    }
    let top = b_obj.bounds_at(b);
    let inside = a.x() >= top.min.x() - SLACK
        && a.x() <= top.max.x() + SLACK
        && a.y() >= top.min.y() - SLACK
        && a.y() <= top.max.y() + SLACK;
    if !inside {
        return Ok(OracleVerdict::fail("center outside reference footprint"));
    }
    let samples = a_trace.samples();
    if samples.len() < STILL_FRAMES {
        return Ok(OracleVerdict::fail("episode too short to judge stability"));
    }
    let unstable = samples[samples.len() - STILL_FRAMES..]
        .iter()
        .any(|s| (s.pose.position - a).norm() > STILLNESS + SLACK);
    if unstable {
        return Ok(OracleVerdict::fail("object not stable over the final steps"));
    }
    Ok(OracleVerdict::pass())
}

/// Put-in: `a`'s box lies entirely inside `b`'s cavity and `a` is released.
pub fn oracle_put_in(r: &ExecutionResult, scene: &Scene, a_id: &str, b_id: &str) -> Result<OracleVerdict> {
    let a_obj = scene.require(a_id)?;
    let b_obj = scene.require(b_id)?;
    if !b_obj.is_container {
        return Err(Error::NotContainer(b_id.to_string()));
    }
    let a = a_obj.bounds_at(r.object_trace(a_id)?.last().position);
    let cavity = b_obj.cavity_at(r.object_trace(b_id)?.last().position);
    if r.holds_at_end(a_id) {
        return Ok(OracleVerdict::fail("object still held"));
    }
    let contained = (0..3).all(|i| a.min.0[i] >= cavity.min.0[i] - SLACK && a.max.0[i] <= cavity.max.0[i] + SLACK);
    if !contained {
        return Ok(OracleVerdict::fail("object not inside container"));
    }
    Ok(OracleVerdict::pass())
}

/// Oracle for the task the prompt asks for. For a negated prompt the
/// verdict is inverted: success means the task was not carried out.
pub fn check_task(tc: &TestCase, r: &ExecutionResult) -> Result<OracleVerdict> {
    let p = &tc.prompt;
    let reference = || {
        p.reference_id
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("{} needs a reference object", p.task)))
    };
    let positive = match p.task {
        TaskKind::PickUp => oracle_pick_up(r, &p.target_id)?,
        TaskKind::MoveNear => oracle_move_near(r, &p.target_id, reference()?)?,
        TaskKind::PutOn => oracle_put_on(r, &tc.scene, &p.target_id, reference()?)?,
        TaskKind::PutIn => oracle_put_in(r, &tc.scene, &p.target_id, reference()?)?,
    };
    if !p.negated {
        return Ok(positive);
    }
    Ok(if positive.success {
        OracleVerdict::fail("negated task was carried out")
    } else {
        OracleVerdict::pass()
    })
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use crate::geometry::{Pose, Vec3};
    use crate::scene::{Aabb, SceneObject};

    #[test]
    fn pick_up_lift_rule() {
        let ok = result_with(
            &[("apple", lift_trace(0.0, &[0.01, 0.03, 0.03, 0.03, 0.03, 0.03, 0.03]))],
            Some("apple"),
        );
        assert!(oracle_pick_up(&ok, "apple").unwrap().success);

        let low = result_with(&[("apple", lift_trace(0.0, &[0.015; 8]))], Some("apple"));
        let v = oracle_pick_up(&low, "apple").unwrap();
        assert!(!v.success);
        assert!(v.reason.contains("insufficient lift"));

        let dropped = result_with(
            &[("apple", lift_trace(0.0, &[0.05, 0.05, 0.05, 0.05, 0.0, 0.0]))],
            Some("apple"),
        );
        assert!(!oracle_pick_up(&dropped, "apple").unwrap().success);

        let released = result_with(&[("apple", lift_trace(0.0, &[0.05; 6]))], None);
        assert!(!oracle_pick_up(&released, "apple").unwrap().success);

        assert!(matches!(oracle_pick_up(&ok, "pear"), Err(Error::UnknownObject(_))));
    }

    #[test]
    fn pick_up_boundary_on_raised_table() {
        let at = result_with(&[("apple", lift_trace(0.72, &[0.02; 5]))], Some("apple"));
        assert!(oracle_pick_up(&at, "apple").unwrap().success);
        let below = result_with(&[("apple", lift_trace(0.72, &[0.019; 5]))], Some("apple"));
        assert!(!oracle_pick_up(&below, "apple").unwrap().success);
    }

    #[test]
    fn move_near_threshold() {
        let case = |dx: f64| {
            result_with(
                &[
                    ("a", vec![Vec3::new(0.1 + dx, 0.0, 0.02)]),
                    ("b", vec![Vec3::new(0.1, 0.0, 0.02)]),
                ],
                None,
            )
        };
        assert!(oracle_move_near(&case(0.04), "a", "b").unwrap().success);
        assert!(!oracle_move_near(&case(0.06), "a", "b").unwrap().success);
        assert!(oracle_move_near(&case(0.05), "a", "b").unwrap().success);
        let held = result_with(
            &[
                ("a", vec![Vec3::new(0.14, 0.0, 0.02)]),
                ("b", vec![Vec3::new(0.1, 0.0, 0.02)]),
            ],
            Some("a"),
        );
        assert!(!oracle_move_near(&held, "a", "b").unwrap().success);
    }

    fn stack_scene(container: bool) -> Scene {
        let obj = |id: &str, half: Vec3, at: Vec3, is_container: bool| SceneObject {
            id: id.into(),
            label: id.into(),
            half_extents: half,
            pose: Pose::at(at),
            is_container,
            graspable: !is_container,
        };
        Scene {
            objects: vec![
                obj("cube", Vec3::new(0.02, 0.02, 0.02), Vec3::new(0.0, 0.2, 0.02), false),
                obj("plate", Vec3::new(0.05, 0.05, 0.01), Vec3::new(0.2, 0.0, 0.01), false),
                obj(
                    "basket",
                    Vec3::new(0.06, 0.06, 0.04),
                    Vec3::new(-0.2, 0.0, 0.04),
                    container,
                ),
            ],
            workspace: Aabb {
                min: Vec3::new(-0.4, -0.4, 0.0),
                max: Vec3::new(0.4, 0.4, 0.6),
            },
            table_height: 0.0,
            brightness: 1.0,
        }
    }

    #[test]
    fn put_on_clauses() {
        let scene = stack_scene(true);
        let plate = Vec3::new(0.2, 0.0, 0.01);
        let build = |cube: Vec<Vec3>, held: Option<&str>| {
            let n = cube.len();
            let basket = vec![Vec3::new(-0.2, 0.0, 0.04); n];
            result_with(&[("cube", cube), ("plate", vec![plate; n]), ("basket", basket)], held)
        };
        let resting = Vec3::new(0.2, 0.0, 0.04);
        let ok = build(vec![resting; 6], None);
        assert!(oracle_put_on(&ok, &scene, "cube", "plate").unwrap().success);

        let overhang = build(vec![Vec3::new(0.26, 0.0, 0.04); 6], None);
        assert!(!oracle_put_on(&overhang, &scene, "cube", "plate").unwrap().success);

        let held = build(vec![resting; 6], Some("cube"));
        assert!(!oracle_put_on(&held, &scene, "cube", "plate").unwrap().success);

        let mut settling = vec![resting; 6];
        settling[3] = resting.with_z(0.05);
        assert!(
            !oracle_put_on(&build(settling, None), &scene, "cube", "plate")
                .unwrap()
                .success
        );

        assert!(oracle_put_on(&ok, &scene, "cube", "basket").is_err());
    }

    #[test]
    fn put_in_clauses() {
        let scene = stack_scene(true);
        let basket = Vec3::new(-0.2, 0.0, 0.04);
        let build = |cube: Vec3, held: Option<&str>| {
            result_with(
                &[
                    ("cube", vec![cube]),
                    ("plate", vec![Vec3::new(0.2, 0.0, 0.01)]),
                    ("basket", vec![basket]),
                ],
                held,
            )
        };
        let inside = Vec3::new(-0.2, 0.0, 0.025);
        assert!(
            oracle_put_in(&build(inside, None), &scene, "cube", "basket")
                .unwrap()
                .success
        );
        let poking_out = Vec3::new(-0.2, 0.0, 0.07);
        assert!(
            !oracle_put_in(&build(poking_out, None), &scene, "cube", "basket")
                .unwrap()
                .success
        );
        assert!(
            !oracle_put_in(&build(inside, Some("cube")), &scene, "cube", "basket")
                .unwrap()
                .success
        );
        assert!(matches!(
            oracle_put_in(&build(inside, None), &stack_scene(false), "cube", "basket"),
            Err(Error::NotContainer(_))
        ));
    }
}
