//! Scenes, objects, prompts and test cases.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};

/// Penetration below this depth is treated as touching.
pub const PENETRATION_TOLERANCE: f64 = 1e-6;
/// Wall and floor thickness of container objects.
pub const CONTAINER_WALL: f64 = 0.005;
/// Home pose height above the table.
pub const HOME_HEIGHT: f64 = 0.30;
pub const MAX_BRIGHTNESS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_center(center: Vec3, half: Vec3) -> Self {
        Aabb {
            min: center - half,
            max: center + half,
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        (0..3).all(|i| p.0[i] >= self.min.0[i] && p.0[i] <= self.max.0[i])
    }

    /// Smallest per-axis overlap, or 0 when the boxes are separated.
    pub fn overlap_depth(&self, other: &Aabb) -> f64 {
        let mut depth = f64::INFINITY;
        for i in 0..3 {
            let o = self.max.0[i].min(other.max.0[i]) - self.min.0[i].max(other.min.0[i]);
            if o <= 0.0 {
                return 0.0;
            }
            depth = depth.min(o);
        }
        depth
    }

    /// Depth of `p` inside the box (distance to the nearest face), 0 outside.
    pub fn point_depth(&self, p: Vec3) -> f64 {
        let mut depth = f64::INFINITY;
        for i in 0..3 {
            let d = (p.0[i] - self.min.0[i]).min(self.max.0[i] - p.0[i]);
            if d <= 0.0 {
                return 0.0;
            }
            depth = depth.min(d);
        }
        depth
    }

    pub(crate) fn footprint_within(&self, other: &Aabb, tol: f64) -> bool {
        (0..2).all(|i| self.min.0[i] >= other.min.0[i] - tol && self.max.0[i] <= other.max.0[i] + tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PickUp,
    MoveNear,
    PutOn,
    PutIn,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::PickUp, TaskKind::MoveNear, TaskKind::PutOn, TaskKind::PutIn];

    pub fn needs_reference(self) -> bool {
        !matches!(self, TaskKind::PickUp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::PickUp => "pick_up",
            TaskKind::MoveNear => "move_near",
            TaskKind::PutOn => "put_on",
            TaskKind::PutIn => "put_in",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == norm || t.as_str().replace('_', "") == norm)
            .ok_or_else(|| Error::invalid(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub label: String,
    pub half_extents: Vec3,
    pub pose: Pose,
    pub is_container: bool,
    pub graspable: bool,
}

impl SceneObject {
    pub fn center(&self) -> Vec3 {
        self.pose.position
    }

    pub fn bounds_at(&self, center: Vec3) -> Aabb {
        Aabb::from_center(center, self.half_extents)
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds_at(self.center())
    }

    pub fn top_z(&self) -> f64 {
        self.center().z() + self.half_extents.z()
    }

    /// Open-topped interior of a container placed at `center`.
    pub fn cavity_at(&self, center: Vec3) -> Aabb {
        let b = self.bounds_at(center);
        Aabb {
            min: Vec3::new(
                b.min.x() + CONTAINER_WALL,
                b.min.y() + CONTAINER_WALL,
                b.min.z() + CONTAINER_WALL,
            ),
            max: Vec3::new(b.max.x() - CONTAINER_WALL, b.max.y() - CONTAINER_WALL, b.max.z()),
        }
    }
}

/// Penetration depth between two objects at the given centers. A box
/// sitting in a container's open-topped cavity does not touch the walls.
pub fn box_penetration(a: &SceneObject, a_center: Vec3, b: &SceneObject, b_center: Vec3) -> f64 {
    let ab = a.bounds_at(a_center);
    let bb = b.bounds_at(b_center);
    let in_cavity = |inner: &Aabb, container: &SceneObject, c: Vec3| {
        let cav = container.cavity_at(c);
        inner.footprint_within(&cav, 1e-9) && inner.min.z() >= cav.min.z() - PENETRATION_TOLERANCE
    };
    if b.is_container && in_cavity(&ab, b, b_center) {
        return 0.0;
    }
    if a.is_container && in_cavity(&bb, a, a_center) {
        return 0.0;
    }
    ab.overlap_depth(&bb)
}

/// Depth of a point inside an object, ignoring a container's cavity.
pub fn point_penetration(p: Vec3, obj: &SceneObject, center: Vec3) -> f64 {
    if obj.is_container {
        let cav = obj.cavity_at(center);
        let inside_cavity = p.x() >= cav.min.x()
            && p.x() <= cav.max.x()
            && p.y() >= cav.min.y()
            && p.y() <= cav.max.y()
            && p.z() >= cav.min.z();
        if inside_cavity {
            return 0.0;
        }
    }
    obj.bounds_at(center).point_depth(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub workspace: Aabb,
    pub table_height: f64,
    pub brightness: f64,
}

impl Scene {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn require(&self, id: &str) -> Result<&SceneObject> {
        self.object(id).ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    /// Workspace center, [`HOME_HEIGHT`] above the table.
    pub fn home(&self) -> Vec3 {
        let c = self.workspace.center();
        Vec3::new(c.x(), c.y(), self.table_height + HOME_HEIGHT)
    }

    pub fn to_json(&self) -> Result<String> {
        canonical::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<Scene> {
        canonical::from_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    NonFinite { field: String },
    NonPositiveExtent { id: String },
    DuplicateId { id: String },
    OutsideWorkspace { id: String },
    Overlap { a: String, b: String },
    BrightnessOutOfRange,
    DanglingReference { id: String },
    MissingReference,
    UnexpectedReference,
    StaleText,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::NonFinite { field } => write!(f, "non-finite value in {field}"),
            ValidationIssue::NonPositiveExtent { id } => write!(f, "object `{id}` has a non-positive half extent"),
            ValidationIssue::DuplicateId { id } => write!(f, "duplicate object id `{id}`"),
            ValidationIssue::OutsideWorkspace { id } => write!(f, "object `{id}` lies outside the workspace"),
            ValidationIssue::Overlap { a, b } => write!(f, "overlap between `{a}` and `{b}`"),
            ValidationIssue::BrightnessOutOfRange => write!(f, "brightness outside (0, {MAX_BRIGHTNESS}]"),
            ValidationIssue::DanglingReference { id } => write!(f, "dangling reference to `{id}`"),
            ValidationIssue::MissingReference => write!(f, "task needs a reference object"),
            ValidationIssue::UnexpectedReference => write!(f, "task takes no reference object"),
            ValidationIssue::StaleText => write!(f, "prompt text does not match its fields"),
        }
    }
}

pub fn validate_scene(s: &Scene) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if !s.table_height.is_finite() || !s.workspace.min.is_finite() || !s.workspace.max.is_finite() {
        issues.push(ValidationIssue::NonFinite {
            field: "workspace".into(),
        });
    }
    if !(s.brightness > 0.0 && s.brightness <= MAX_BRIGHTNESS) {
        issues.push(ValidationIssue::BrightnessOutOfRange);
    }
    let mut seen = BTreeSet::new();
    for o in &s.objects {
        if !seen.insert(o.id.as_str()) {
            issues.push(ValidationIssue::DuplicateId { id: o.id.clone() });
        }
        if !o.half_extents.is_finite() {
            issues.push(ValidationIssue::NonFinite {
                field: format!("{}.half_extents", o.id),
            });
        } else if o.half_extents.0.iter().any(|h| *h <= 0.0) {
            issues.push(ValidationIssue::NonPositiveExtent { id: o.id.clone() });
        }
        if !s.workspace.contains_point(o.center()) {
            issues.push(ValidationIssue::OutsideWorkspace { id: o.id.clone() });
        }
    }
    for (i, a) in s.objects.iter().enumerate() {
        for b in &s.objects[i + 1..] {
            if box_penetration(a, a.center(), b, b.center()) > PENETRATION_TOLERANCE {
                issues.push(ValidationIssue::Overlap {
                    a: a.id.clone(),
                    b: b.id.clone(),
                });
            }
        }
    }
    issues
}

/// Scene checks plus prompt cross-references.
pub fn validate_case(tc: &TestCase) -> Vec<ValidationIssue> {
    let mut issues = validate_scene(&tc.scene);
    let p = &tc.prompt;
    if tc.scene.object(&p.target_id).is_none() {
        issues.push(ValidationIssue::DanglingReference {
            id: p.target_id.clone(),
        });
    }
    match (&p.reference_id, p.task.needs_reference()) {
        (Some(r), true) if tc.scene.object(r).is_none() => {
            issues.push(ValidationIssue::DanglingReference { id: r.clone() })
        }
        (None, true) => issues.push(ValidationIssue::MissingReference),
        (Some(_), false) => issues.push(ValidationIssue::UnexpectedReference),
        _ => {}
    }
    if issues.is_empty() && p.rendered(&tc.scene).ok().as_deref() != Some(p.text.as_str()) {
        issues.push(ValidationIssue::StaleText);
    }
    issues
}

/// Fills the instruction template for `task`.
pub fn render_prompt(
    task: TaskKind,
    target_label: &str,
    reference_label: Option<&str>,
    verb: &str,
    negated: bool,
) -> Result<String> {
    let body = match (task, reference_label) {
        (TaskKind::PickUp, None) => format!("{verb} the {target_label}"),
        (TaskKind::PickUp, Some(_)) => {
            return Err(Error::invalid("pick_up takes no reference object"));
        }
        (_, None) => return Err(Error::invalid(format!("{task} needs a reference object"))),
        (TaskKind::MoveNear, Some(r)) => format!("{verb} the {target_label} near the {r}"),
        (TaskKind::PutOn, Some(r)) => format!("{verb} the {target_label} on the {r}"),
        (TaskKind::PutIn, Some(r)) => format!("{verb} the {target_label} in the {r}"),
    };
    Ok(if negated { format!("don't {body}") } else { body })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub task: TaskKind,
    pub verb: String,
    pub target_id: String,
    pub reference_id: Option<String>,
    pub negated: bool,
    pub text: String,
}

impl Prompt {
    pub fn new(
        scene: &Scene,
        task: TaskKind,
        verb: &str,
        target_id: &str,
        reference_id: Option<&str>,
        negated: bool,
    ) -> Result<Prompt> {
        let mut p = Prompt {
            task,
            verb: verb.to_string(),
            target_id: target_id.to_string(),
            reference_id: reference_id.map(str::to_string),
            negated,
            text: String::new(),
        };
        p.text = p.rendered(scene)?;
        Ok(p)
    }

    pub fn rendered(&self, scene: &Scene) -> Result<String> {
        let target = scene.require(&self.target_id)?;
        let reference = match &self.reference_id {
            Some(r) => Some(scene.require(r)?.label.as_str()),
            None => None,
        };
        render_prompt(self.task, &target.label, reference, &self.verb, self.negated)
    }

    pub fn rerender(&mut self, scene: &Scene) -> Result<()> {
        self.text = self.rendered(scene)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub prompt: Prompt,
    pub scene: Scene,
    pub seed: u64,
}

impl TestCase {
    pub fn to_json(&self) -> Result<String> {
        canonical::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<TestCase> {
        canonical::from_str(s)
    }
}

pub const SUITE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub suite_version: u32,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(cases: Vec<TestCase>) -> Self {
        TestSuite {
            suite_version: SUITE_VERSION,
            cases,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        canonical::to_string(self)
    }

    /// Parses and validates every case.
    pub fn from_json(s: &str) -> Result<TestSuite> {
        let suite: TestSuite = canonical::from_str(s)?;
        if suite.suite_version != SUITE_VERSION {
            return Err(Error::invalid(format!(
                "unsupported suite_version {}",
                suite.suite_version
            )));
        }
        let mut ids = BTreeSet::new();
        for tc in &suite.cases {
            if !ids.insert(tc.id.as_str()) {
                return Err(Error::invalid(format!("duplicate test case id `{}`", tc.id)));
            }
            if let Some(issue) = validate_case(tc).first() {
                return Err(Error::invalid(format!("test case `{}`: {issue}", tc.id)));
            }
        }
        Ok(suite)
    }
}

/// Verb synonyms per task. The first entry of each list is the task's
/// canonical verb.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub verbs: BTreeMap<TaskKind, Vec<String>>,
}

impl Default for Lexicon {
    fn default() -> Self {
        let entry = |t, vs: &[&str]| (t, vs.iter().map(|s| s.to_string()).collect());
        Lexicon {
            verbs: BTreeMap::from([
                entry(TaskKind::PickUp, &["pick", "grab", "take", "lift"]),
                entry(TaskKind::MoveNear, &["move", "bring", "shift"]),
                entry(TaskKind::PutOn, &["put", "place", "set", "stack"]),
                entry(TaskKind::PutIn, &["put", "place", "insert", "drop"]),
            ]),
        }
    }
}

impl Lexicon {
    pub fn verbs_for(&self, task: TaskKind) -> &[String] {
        self.verbs.get(&task).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn canonical_verb(&self, task: TaskKind) -> Option<&str> {
        self.verbs_for(task).first().map(String::as_str)
    }

    /// Deterministically draws a synonym of `verb` other than `verb` itself.
    pub fn synonym_for(&self, verb: &str, task: TaskKind, seed: u64) -> Result<String> {
        let verbs = self.verbs_for(task);
        if !verbs.iter().any(|v| v == verb) {
            return Err(Error::invalid(format!("verb `{verb}` not in the {task} lexicon")));
        }
        let candidates: Vec<&String> = verbs.iter().filter(|v| *v != verb).collect();
        if candidates.is_empty() {
            return Err(Error::invalid(format!("no synonym for `{verb}`")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(candidates[rng.gen_range(0..candidates.len())].clone())
    }
}

/// [`Lexicon::synonym_for`] over the default lexicon.
pub fn synonym_for(verb: &str, task: TaskKind, seed: u64) -> Result<String> {
    Lexicon::default().synonym_for(verb, task, seed)
}
