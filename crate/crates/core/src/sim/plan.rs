//! Scripted controller: perceives the scene, then lays out waypoints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FaultKind, FaultProfile};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scene::{Lexicon, SceneObject, TaskKind, TestCase, CONTAINER_WALL};

pub const APPROACH_CLEARANCE: f64 = 0.10;
/// Height of a carried object's bottom face above the table during transit.
pub const CARRY_HEIGHT: f64 = 0.15;
pub const RETREAT_HEIGHT: f64 = 0.10;
/// Lift used when obstacle clearance is skipped.
pub const LOW_LIFT: f64 = 0.005;
/// Gap left between the boxes of a move-near placement.
pub const NEAR_GAP: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Action {
    Move {
        to: Vec3,
        travel: bool,
    },
    Close,
    Open,
    Wait(usize),
    /// Descend onto `object`, grasp it, and return to `resume`.
    Regrasp {
        object: usize,
        resume: Vec3,
    },
}

/// Resolves the object named by `id` through its label, as the controller
/// only reads labels from the instruction.
fn resolve<'a>(tc: &'a TestCase, id: &str) -> Result<(usize, &'a SceneObject)> {
    let label = &tc.scene.require(id)?.label;
    let mut matches = tc.scene.objects.iter().enumerate().filter(|(_, o)| &o.label == label);
    let first = matches
        .next()
        .ok_or_else(|| Error::invalid(format!("label `{label}` not found")))?;
    if matches.next().is_some() {
        return Err(Error::invalid(format!("label `{label}` is ambiguous")));
    }
    Ok(first)
}

pub(crate) struct Resolved<'a> {
    pub target: (usize, &'a SceneObject),
    pub reference: Option<(usize, &'a SceneObject)>,
}

pub(crate) fn resolve_case(tc: &TestCase) -> Result<Resolved<'_>> {
    let p = &tc.prompt;
    let target = resolve(tc, &p.target_id)?;
    if p.task != TaskKind::MoveNear && !target.1.graspable {
        return Err(Error::NotGraspable(target.1.id.clone()));
    }
    let reference = match (&p.reference_id, p.task.needs_reference()) {
        (Some(r), true) => Some(resolve(tc, r)?),
        (None, true) => return Err(Error::invalid(format!("{} needs a reference object", p.task))),
        _ => None,
    };
    if let Some((_, b)) = reference {
        match p.task {
            TaskKind::PutIn if !b.is_container => return Err(Error::NotContainer(b.id.clone())),
            TaskKind::PutOn if b.is_container => {
                return Err(Error::invalid(format!("cannot stack on container `{}`", b.id)))
            }
            _ => {}
        }
    }
    Ok(Resolved { target, reference })
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Unit horizontal vector drawn by rejection from `rng`.
pub(crate) fn horizontal_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        let r = (x * x + y * y).sqrt();
        if r > 0.1 && r <= 1.0 {
            return Vec3::new(x / r, y / r, 0.0);
        }
    }
}

pub(crate) fn verb_direction(verb: &str) -> Vec3 {
    horizontal_direction(&mut ChaCha8Rng::seed_from_u64(fnv1a(verb.as_bytes())))
}

/// Horizontal unit vector perpendicular to `from -> to`, or `fallback`
/// when the segment is vertical.
pub(crate) fn horizontal_perpendicular(from: Vec3, to: Vec3, fallback: Vec3) -> Vec3 {
    let d = to - from;
    let h = d.horizontal_norm();
    if h < 1e-9 {
        return fallback;
    }
    Vec3::new(-d.y() / h, d.x() / h, 0.0)
}

fn perceived_target(tc: &TestCase, actual: Vec3, fault: &FaultProfile, relocation: Option<[f64; 2]>) -> Vec3 {
    match fault.kind {
        FaultKind::IlluminationSensitivity => {
            let shift = fault.magnitude * (tc.scene.brightness - 1.0).abs();
            actual + Vec3::new(shift, 0.0, 0.0)
        }
        FaultKind::RelocationReaction => match relocation {
            Some([dx, dy]) => {
                let lag = 1.0 - fault.magnitude;
                actual - Vec3::new(dx * lag, dy * lag, 0.0)
            }
            None => actual,
        },
        _ => actual,
    }
}

/// End-effector target that sets a carried object with half height `hz`
/// down at the reference.
fn place_point(tc: &TestCase, target: &SceneObject, reference: &SceneObject) -> Vec3 {
    let hz = target.half_extents.z();
    let b = reference.center();
    match tc.prompt.task {
        TaskKind::PutOn => b.with_z(reference.top_z() + 2.0 * hz),
        TaskKind::PutIn => {
            let floor = b.z() - reference.half_extents.z() + CONTAINER_WALL;
            b.with_z(floor + 2.0 * hz)
        }
        TaskKind::MoveNear => {
            let toward_home = tc.scene.home() - b;
            let (ox, oy) = if toward_home.x().abs() >= toward_home.y().abs() {
                let gap = target.half_extents.x() + reference.half_extents.x() + NEAR_GAP;
                (gap.copysign(toward_home.x()), 0.0)
            } else {
                let gap = target.half_extents.y() + reference.half_extents.y() + NEAR_GAP;
                (0.0, gap.copysign(toward_home.y()))
            };
            Vec3::new(b.x() + ox, b.y() + oy, tc.scene.table_height + 2.0 * hz)
        }
        TaskKind::PickUp => unreachable!("pick_up has no placement"),
    }
}

/// Plans the positive (non-negated) task.
pub(crate) fn plan(tc: &TestCase, fault: &FaultProfile, relocation: Option<[f64; 2]>) -> Result<Vec<Action>> {
    let resolved = resolve_case(tc)?;
    let (_, target) = resolved.target;
    let scene = &tc.scene;
    let hz = target.half_extents.z();

    let offset = match fault.kind {
        FaultKind::PromptVerbSensitivity
            if Lexicon::default().canonical_verb(tc.prompt.task) != Some(tc.prompt.verb.as_str()) =>
        {
            verb_direction(&tc.prompt.verb) * fault.magnitude
        }
        _ => Vec3::ZERO,
    };

    let c = perceived_target(tc, target.center(), fault, relocation);
    let top = c.z() + hz;
    let lift_z = if fault.kind == FaultKind::CollisionBlindness {
        top + LOW_LIFT
    } else {
        scene.table_height + CARRY_HEIGHT + 2.0 * hz
    };

    let mut actions = vec![
        Action::Move {
            to: c.with_z(top + APPROACH_CLEARANCE) + offset,
            travel: true,
        },
        Action::Move {
            to: c.with_z(top) + offset,
            travel: false,
        },
        Action::Close,
        Action::Move {
            to: c.with_z(lift_z) + offset,
            travel: false,
        },
    ];
    if let Some((_, reference)) = resolved.reference {
        let place = place_point(tc, target, reference) + offset;
        actions.extend([
            Action::Move {
                to: place.with_z(lift_z),
                travel: true,
            },
            Action::Move {
                to: place,
                travel: false,
            },
            Action::Open,
            Action::Move {
                to: place + Vec3::new(0.0, 0.0, RETREAT_HEIGHT),
                travel: false,
            },
        ]);
    }

    if fault.kind == FaultKind::DistractorAttraction && fault.magnitude > 0.0 {
        let skip: Vec<usize> = std::iter::once(resolved.target.0)
            .chain(resolved.reference.map(|r| r.0))
            .collect();
        let irrelevant: Vec<Vec3> = scene
            .objects
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, o)| o.center())
            .collect();
        if !irrelevant.is_empty() {
            actions = bend_travel(scene.home(), actions, &irrelevant, fault.magnitude);
        }
    }
    Ok(actions)
}

/// Splits every travel move at its midpoint and pushes the midpoint
/// sideways by `magnitude` toward the nearest irrelevant object.
fn bend_travel(home: Vec3, actions: Vec<Action>, attractors: &[Vec3], magnitude: f64) -> Vec<Action> {
    let mut out = Vec::with_capacity(actions.len() + 2);
    let mut cursor = home;
    for a in actions {
        if let Action::Move { to, travel } = a {
            if travel {
                let mid = (cursor + to) * 0.5;
                let nearest = attractors
                    .iter()
                    .copied()
                    .min_by(|p, q| (*p - mid).horizontal_norm().total_cmp(&(*q - mid).horizontal_norm()))
                    .expect("non-empty attractors");
                let pull = (nearest - mid).with_z(0.0);
                let fallback = if pull.horizontal_norm() > 1e-12 {
                    pull * (1.0 / pull.horizontal_norm())
                } else {
                    Vec3::new(1.0, 0.0, 0.0)
                };
                let mut perp = horizontal_perpendicular(cursor, to, fallback);
                if perp.dot(pull) < 0.0 {
                    perp = -perp;
                }
                out.push(Action::Move {
                    to: mid + perp * magnitude,
                    travel: true,
                });
            }
            cursor = to;
        }
        out.push(a);
    }
    out
}

/// Polyline of the fault-free plan for the positive task, starting at home.
pub fn nominal_waypoints(tc: &TestCase) -> Result<Vec<Vec3>> {
    let actions = plan(tc, &FaultProfile::none(), None)?;
    let mut pts = vec![tc.scene.home()];
    pts.extend(actions.iter().filter_map(|a| match a {
        Action::Move { to, .. } => Some(*to),
        _ => None,
    }));
    Ok(pts)
}
