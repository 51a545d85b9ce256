use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MRKind;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::scene::{validate_case, Aabb, Lexicon, SceneObject, TestCase, MAX_BRIGHTNESS};
use crate::sim::nominal_waypoints;

pub const DISTRACTOR_HALF_EXTENT: f64 = 0.02;
/// Minimum distance from the distractor center to the target center.
pub const MR2_TARGET_SPACING: f64 = 0.1;
/// Minimum distance from the distractor box to the nominal waypoint polyline.
pub const MR2_PATH_CLEARANCE: f64 = 0.05;
pub const MR5_MIN_SHIFT: f64 = 0.05;
pub const MR5_MAX_SHIFT: f64 = 0.25;
pub const DEFAULT_MR3_FACTORS: [f64; 4] = [0.6, 0.8, 1.2, 1.4];
const MAX_ATTEMPTS: usize = 1000;
/// Horizontal gap kept between a placed box and every other object.
const PLACEMENT_GAP: f64 = 0.005;

const DISTRACTOR_LABELS: [&str; 10] = [
    "sponge", "can", "lemon", "ball", "eraser", "marker", "cork", "dice", "spool", "brush",
];

/// What a follow-up changed relative to its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FollowUpMeta {
    Synonym {
        from: String,
        to: String,
    },
    ObjectAddition {
        added_object_id: String,
    },
    Brightness {
        brightness_factor: f64,
    },
    Negation,
    /// Horizontal translation of the target, meters.
    Relocation {
        delta_p: [f64; 2],
    },
}

impl FollowUpMeta {
    pub fn delta_p(&self) -> Option<[f64; 2]> {
        match self {
            FollowUpMeta::Relocation { delta_p } => Some(*delta_p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowUpCase {
    pub id: String,
    pub parent_id: String,
    pub mr: MRKind,
    pub test: TestCase,
    pub meta: FollowUpMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowUpOptions {
    pub lexicon: Lexicon,
    pub mr3_factors: Vec<f64>,
}

impl Default for FollowUpOptions {
    fn default() -> Self {
        FollowUpOptions {
            lexicon: Lexicon::default(),
            mr3_factors: DEFAULT_MR3_FACTORS.to_vec(),
        }
    }
}

/// [`generate_followup_with`] under default options.
pub fn generate_followup(mr: MRKind, src: &TestCase, seed: u64) -> Result<FollowUpCase> {
    generate_followup_with(mr, src, seed, &FollowUpOptions::default())
}

/// Transforms `src` under relation `mr`. Deterministic in `(mr, src, seed)`.
pub fn generate_followup_with(mr: MRKind, src: &TestCase, seed: u64, opts: &FollowUpOptions) -> Result<FollowUpCase> {
    if let Some(issue) = validate_case(src).first() {
        return Err(Error::invalid(format!("test case `{}`: {issue}", src.id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = src.clone();
    test.id = format!("{}~{}", src.id, mr.short());
    let meta = match mr {
        MRKind::Mr1Synonym => {
            let from = src.prompt.verb.clone();
            let to = opts.lexicon.synonym_for(&from, src.prompt.task, rng.gen())?;
            test.prompt.verb = to.clone();
            test.prompt.rerender(&test.scene)?;
            FollowUpMeta::Synonym { from, to }
        }
        MRKind::Mr2ObjectAddition => {
            let object = place_distractor(src, &mut rng)?;
            let added_object_id = object.id.clone();
            test.scene.objects.push(object);
            FollowUpMeta::ObjectAddition { added_object_id }
        }
        MRKind::Mr3Brightness => {
            let b = src.scene.brightness;
            let feasible: Vec<f64> = opts
                .mr3_factors
                .iter()
                .copied()
                .filter(|f| f.is_finite() && *f > 0.0 && b * f <= MAX_BRIGHTNESS)
                .collect();
            let factor = *feasible
                .choose(&mut rng)
                .ok_or_else(|| Error::Infeasible(format!("no brightness factor applies to brightness {b}")))?;
            test.scene.brightness = b * factor;
            FollowUpMeta::Brightness {
                brightness_factor: factor,
            }
        }
        MRKind::Mr4Negation => {
            if src.prompt.negated {
                return Err(Error::invalid(format!("`{}` is already negated", src.id)));
            }
            test.prompt.negated = true;
            test.prompt.rerender(&test.scene)?;
            FollowUpMeta::Negation
        }
        MRKind::Mr5Relocation => {
            let delta_p = relocate_target(&mut test, &mut rng)?;
            FollowUpMeta::Relocation { delta_p }
        }
    };
    if let Some(issue) = validate_case(&test).first() {
        return Err(Error::Infeasible(format!("{} follow-up of `{}`: {issue}", mr, src.id)));
    }
    Ok(FollowUpCase {
        id: test.id.clone(),
        parent_id: src.id.clone(),
        mr,
        test,
        meta,
    })
}

/// Distance from `p` to the segment `a -> b`.
pub(crate) fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

/// Lower bound on the distance from any point of `bx` to the polyline,
/// exact for points and conservative for boxes.
pub(crate) fn box_polyline_clearance(bx: &Aabb, polyline: &[Vec3]) -> f64 {
    let half = (bx.max - bx.min) * 0.5;
    let c = bx.center();
    let radius = half.norm();
    let segments = polyline.windows(2).map(|w| point_segment_distance(c, w[0], w[1]));
    let single = polyline.first().map(|p| (c - *p).norm());
    let center = segments.chain(single).fold(f64::INFINITY, f64::min);
    (center - radius).max(0.0)
}

fn horizontal_gap(a: &Aabb, b: &Aabb) -> f64 {
    let gx = (a.min.x() - b.max.x()).max(b.min.x() - a.max.x());
    let gy = (a.min.y() - b.max.y()).max(b.min.y() - a.max.y());
    gx.max(gy)
}

fn fits_workspace(bx: &Aabb, ws: &Aabb) -> bool {
    (0..3).all(|i| bx.min.0[i] >= ws.min.0[i] && bx.max.0[i] <= ws.max.0[i])
}

fn place_distractor(src: &TestCase, rng: &mut ChaCha8Rng) -> Result<SceneObject> {
    let scene = &src.scene;
    let target = scene.require(&src.prompt.target_id)?.center();
    let polyline = nominal_waypoints(src)?;
    let half = Vec3::new(DISTRACTOR_HALF_EXTENT, DISTRACTOR_HALF_EXTENT, DISTRACTOR_HALF_EXTENT);

    let labels: Vec<&str> = DISTRACTOR_LABELS
        .iter()
        .copied()
        .filter(|l| scene.objects.iter().all(|o| o.label != *l))
        .collect();
    let label = labels
        .choose(rng)
        .ok_or_else(|| Error::Infeasible("no unused distractor label".into()))?
        .to_string();
    let mut id = "distractor".to_string();
    let mut n = 1;
    while scene.object(&id).is_some() {
        n += 1;
        id = format!("distractor_{n}");
    }

    let ws = scene.workspace;
    let (lo_x, hi_x) = (ws.min.x() + DISTRACTOR_HALF_EXTENT, ws.max.x() - DISTRACTOR_HALF_EXTENT);
    let (lo_y, hi_y) = (ws.min.y() + DISTRACTOR_HALF_EXTENT, ws.max.y() - DISTRACTOR_HALF_EXTENT);
    if lo_x >= hi_x || lo_y >= hi_y {
        return Err(Error::Infeasible("workspace too small for a distractor".into()));
    }
    let z = scene.table_height + DISTRACTOR_HALF_EXTENT;
    for _ in 0..MAX_ATTEMPTS {
        let c = Vec3::new(rng.gen_range(lo_x..hi_x), rng.gen_range(lo_y..hi_y), z);
        let bx = Aabb::from_center(c, half);
        let ok = (c - target).norm() >= MR2_TARGET_SPACING
            && fits_workspace(&bx, &ws)
            && box_polyline_clearance(&bx, &polyline) >= MR2_PATH_CLEARANCE
            && scene
                .objects
                .iter()
                .all(|o| horizontal_gap(&bx, &o.bounds()) >= PLACEMENT_GAP);
        if ok {
            return Ok(SceneObject {
                id,
                label,
                half_extents: half,
                pose: Pose::at(c),
                is_container: false,
                graspable: true,
            });
        }
    }
    Err(Error::Infeasible(format!(
        "no distractor placement for `{}` after {MAX_ATTEMPTS} attempts",
        src.id
    )))
}

/// Moves the target horizontally; returns the applied `(dx, dy)`.
fn relocate_target(test: &mut TestCase, rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
    let target_id = test.prompt.target_id.clone();
    let original = test.scene.require(&target_id)?.clone();
    for _ in 0..MAX_ATTEMPTS {
        let (dx, dy) = loop {
            let x: f64 = rng.gen_range(-MR5_MAX_SHIFT..=MR5_MAX_SHIFT);
            let y: f64 = rng.gen_range(-MR5_MAX_SHIFT..=MR5_MAX_SHIFT);
            let m = (x * x + y * y).sqrt();
            if (MR5_MIN_SHIFT..=MR5_MAX_SHIFT).contains(&m) {
                break (x, y);
            }
        };
        let c = original.center() + Vec3::new(dx, dy, 0.0);
        let bx = original.bounds_at(c);
        let clear = test
            .scene
            .objects
            .iter()
            .filter(|o| o.id != target_id)
            .all(|o| horizontal_gap(&bx, &o.bounds()) >= PLACEMENT_GAP);
        if !(fits_workspace(&bx, &test.scene.workspace) && clear) {
            continue;
        }
        let obj = test.scene.object_mut(&target_id).expect("target exists");
        obj.pose.position = c;
        if nominal_waypoints(test).is_ok() {
            return Ok([dx, dy]);
        }
        test.scene.object_mut(&target_id).expect("target exists").pose = original.pose;
    }
    Err(Error::Infeasible(format!(
        "no relocation for `{}` after {MAX_ATTEMPTS} attempts",
        test.id
    )))
}
