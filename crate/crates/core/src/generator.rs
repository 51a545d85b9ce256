//! Seeded generation of source test suites.
//!
//! Targets and references are placed 0.22 to 0.32 m horizontally from the
//! workspace center, so every source trajectory reaches a point more than
//! 0.3 m from home.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::scene::{validate_case, Aabb, Lexicon, Prompt, Scene, SceneObject, TaskKind, TestCase, TestSuite};
use crate::sim::{fnv1a, nominal_waypoints};

pub const WORKSPACE_HALF_WIDTH: f64 = 0.4;
pub const WORKSPACE_HEIGHT: f64 = 0.6;
pub const MIN_RADIUS: f64 = 0.22;
pub const MAX_RADIUS: f64 = 0.32;
/// Minimum center distance between target and reference.
pub const MIN_SEPARATION: f64 = 0.15;
const MAX_ATTEMPTS: usize = 1000;

const TARGET_LABELS: [&str; 8] = ["apple", "cube", "cup", "orange", "peach", "block", "bottle", "pear"];
const NEAR_LABELS: [&str; 4] = ["bowl", "box", "jar", "mug"];
const SURFACE_LABELS: [&str; 3] = ["plate", "tray", "coaster"];
const CONTAINER_LABELS: [&str; 3] = ["basket", "bin", "crate"];

pub fn default_workspace() -> Aabb {
    Aabb {
        min: Vec3::new(-WORKSPACE_HALF_WIDTH, -WORKSPACE_HALF_WIDTH, 0.0),
        max: Vec3::new(WORKSPACE_HALF_WIDTH, WORKSPACE_HALF_WIDTH, WORKSPACE_HEIGHT),
    }
}

fn ring_point(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let x: f64 = rng.gen_range(-MAX_RADIUS..=MAX_RADIUS);
        let y: f64 = rng.gen_range(-MAX_RADIUS..=MAX_RADIUS);
        let r = (x * x + y * y).sqrt();
        if (MIN_RADIUS..=MAX_RADIUS).contains(&r) {
            return (x, y);
        }
    }
}

fn object(id: &str, label: &str, half: Vec3, xy: (f64, f64)) -> SceneObject {
    SceneObject {
        id: id.into(),
        label: label.into(),
        half_extents: half,
        pose: Pose::at(Vec3::new(xy.0, xy.1, half.z())),
        is_container: false,
        graspable: true,
    }
}

fn generate_case(task: TaskKind, index: usize, seed: u64, lexicon: &Lexicon) -> Result<TestCase> {
    let case_seed = fnv1a(format!("{seed}/{}/{index}", task.as_str()).as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let verb = lexicon
        .canonical_verb(task)
        .ok_or_else(|| Error::invalid(format!("lexicon has no verbs for {task}")))?
        .to_string();
    let id = format!("{}_{index:03}", task.as_str());

    for _ in 0..MAX_ATTEMPTS {
        let target_half = if task == TaskKind::MoveNear {
            Vec3::new(0.02, 0.02, 0.02)
        } else {
            Vec3::new(
                rng.gen_range(0.015..=0.03),
                rng.gen_range(0.015..=0.03),
                rng.gen_range(0.015..=0.03),
            )
        };
        let target_label = *TARGET_LABELS.choose(&mut rng).expect("non-empty");
        let target = object("target", target_label, target_half, ring_point(&mut rng));

        let reference = match task {
            TaskKind::PickUp => None,
            TaskKind::MoveNear => {
                let label = *NEAR_LABELS.choose(&mut rng).expect("non-empty");
                Some(object(
                    "reference",
                    label,
                    Vec3::new(0.02, 0.02, 0.02),
                    ring_point(&mut rng),
                ))
            }
            TaskKind::PutOn => {
                let label = *SURFACE_LABELS.choose(&mut rng).expect("non-empty");
                let mut o = object("reference", label, Vec3::new(0.05, 0.05, 0.01), ring_point(&mut rng));
                o.graspable = false;
                Some(o)
            }
            TaskKind::PutIn => {
                let label = *CONTAINER_LABELS.choose(&mut rng).expect("non-empty");
                let mut o = object("reference", label, Vec3::new(0.06, 0.06, 0.04), ring_point(&mut rng));
                o.is_container = true;
                o.graspable = false;
                Some(o)
            }
        };
        if let Some(r) = &reference {
            let apart = (r.center() - target.center()).horizontal_norm() >= MIN_SEPARATION;
            let gap_x = (r.center().x() - target.center().x()).abs() - r.half_extents.x() - target.half_extents.x();
            let gap_y = (r.center().y() - target.center().y()).abs() - r.half_extents.y() - target.half_extents.y();
            if !apart || gap_x.max(gap_y) < 0.02 {
                continue;
            }
        }

        let mut objects = vec![target];
        objects.extend(reference);
        let scene = Scene {
            objects,
            workspace: default_workspace(),
            table_height: 0.0,
            brightness: 1.0,
        };
        let reference_id = task.needs_reference().then_some("reference");
        let prompt = Prompt::new(&scene, task, &verb, "target", reference_id, false)?;
        let tc = TestCase {
            id: id.clone(),
            prompt,
            scene,
            seed: case_seed,
        };
        if validate_case(&tc).is_empty() && nominal_waypoints(&tc).is_ok() {
            return Ok(tc);
        }
    }
    Err(Error::Infeasible(format!(
        "no valid placement for `{id}` after {MAX_ATTEMPTS} attempts"
    )))
}

/// `per_task` source cases for each task in `tasks`, in task order.
pub fn generate_suite(seed: u64, tasks: &BTreeSet<TaskKind>, per_task: usize) -> Result<TestSuite> {
    if per_task == 0 {
        return Err(Error::invalid("sources_per_task must be at least 1"));
    }
    if tasks.is_empty() {
        return Err(Error::invalid("at least one task is required"));
    }
    let lexicon = Lexicon::default();
    let mut cases = Vec::with_capacity(tasks.len() * per_task);
    for &task in tasks {
        for index in 0..per_task {
            cases.push(generate_case(task, index, seed, &lexicon)?);
        }
    }
    // Round through canonical JSON so the suite equals its serialized form.
    let suite = TestSuite::from_json(&TestSuite::new(cases).to_json()?)?;
    for tc in &suite.cases {
        nominal_waypoints(tc)?;
    }
    Ok(suite)
}
