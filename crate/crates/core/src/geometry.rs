//! Poses, trajectories and trajectory distances.
//!
//! All lengths are meters. Distances between trajectories use the position
//! component only; orientations are carried along but never compared.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest trajectory length accepted by [`brute_force_frechet`].
pub const BRUTE_FORCE_MAX_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(*self).sqrt()
    }

    /// Length of the (x, y) projection.
    pub fn horizontal_norm(&self) -> f64 {
        (self.0[0] * self.0[0] + self.0[1] * self.0[1]).sqrt()
    }

    pub fn with_z(self, z: f64) -> Self {
        Vec3([self.0[0], self.0[1], z])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3(v)
    }
}

/// Unit quaternion stored scalar-first `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion([f64; 4]);

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion([1.0, 0.0, 0.0, 0.0]);
    /// Tool pointing straight down: a half turn about the x axis.
    pub const GRASP_DOWN: Quaternion = Quaternion([0.0, 1.0, 0.0, 0.0]);

    /// Normalizes `q`. Inputs already within 1e-9 of unit norm are kept
    /// verbatim so that serialized quaternions re-parse to the same value.
    pub fn new(q: [f64; 4]) -> Result<Self> {
        if q.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("quaternion has non-finite component"));
        }
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("zero quaternion"));
        }
        if (norm - 1.0).abs() <= 1e-9 {
            return Ok(Quaternion(q));
        }
        Ok(Quaternion(q.map(|c| c / norm)))
    }

    pub fn components(&self) -> [f64; 4] {
        self.0
    }
}

impl TryFrom<[f64; 4]> for Quaternion {
    type Error = Error;
    fn try_from(q: [f64; 4]) -> Result<Self> {
        Quaternion::new(q)
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.0
    }
}

/// End-effector (or object) state: position plus orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose")]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

#[derive(Deserialize)]
struct RawPose {
    position: Vec3,
    orientation: Quaternion,
}

impl TryFrom<RawPose> for Pose {
    type Error = Error;
    fn try_from(raw: RawPose) -> Result<Self> {
        Pose::new(raw.position, raw.orientation)
    }
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quaternion) -> Result<Self> {
        if !position.is_finite() {
            return Err(Error::invalid("pose position is not finite"));
        }
        Ok(Pose { position, orientation })
    }

    /// Pose with identity orientation. Panics on non-finite input.
    pub fn at(position: Vec3) -> Self {
        Self::oriented(position, Quaternion::IDENTITY)
    }

    pub(crate) fn oriented(position: Vec3, orientation: Quaternion) -> Self {
        assert!(position.is_finite(), "non-finite pose position {position:?}");
        Pose { position, orientation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: u64,
    pub pose: Pose,
}

/// Non-empty sequence of poses with strictly increasing step indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Sample>", into = "Vec<Sample>")]
pub struct Trajectory {
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("trajectory is empty"));
        }
        if samples.windows(2).any(|w| w[1].step <= w[0].step) {
            return Err(Error::invalid("trajectory steps not strictly increasing"));
        }
        Ok(Trajectory { samples })
    }

    /// Builds a trajectory stepping 0, 1, 2, ... with identity orientation.
    pub fn from_positions(positions: &[Vec3]) -> Result<Self> {
        let samples = positions
            .iter()
            .enumerate()
            .map(|(i, p)| Pose::new(*p, Quaternion::IDENTITY).map(|pose| Sample { step: i as u64, pose }))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(samples)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &Pose {
        &self.samples[0].pose
    }

    pub fn last(&self) -> &Pose {
        &self.samples[self.samples.len() - 1].pose
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.samples.iter().map(|s| s.pose.position)
    }

    /// Applies the same translation to every sample.
    pub fn translated(&self, by: Vec3) -> Trajectory {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                step: s.step,
                pose: Pose::oriented(s.pose.position + by, s.pose.orientation),
            })
            .collect();
        Trajectory { samples }
    }
}

impl TryFrom<Vec<Sample>> for Trajectory {
    type Error = Error;
    fn try_from(samples: Vec<Sample>) -> Result<Self> {
        Trajectory::new(samples)
    }
}

impl From<Trajectory> for Vec<Sample> {
    fn from(t: Trajectory) -> Self {
        t.samples
    }
}

pub fn euclidean(p: Vec3, q: Vec3) -> f64 {
    (p - q).norm()
}

/// Discrete Fréchet distance over sample positions, by the O(|a|·|b|)
/// coupling-table recurrence kept to two rows.
pub fn discrete_frechet(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("discrete Fréchet of an empty trajectory"));
    }
    let pa: Vec<Vec3> = a.positions().collect();
    let pb: Vec<Vec3> = b.positions().collect();
    let mut prev = vec![0.0f64; pb.len()];
    let mut cur = vec![0.0f64; pb.len()];
    for (i, &p) in pa.iter().enumerate() {
        for (j, &q) in pb.iter().enumerate() {
            let d = euclidean(p, q);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[pb.len() - 1])
}

/// Minimum over every monotone coupling of the largest paired distance,
/// found by exhaustive enumeration. Exponential; limited to
/// [`BRUTE_FORCE_MAX_SAMPLES`] samples per side.
pub fn brute_force_frechet(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("brute-force Fréchet of an empty trajectory"));
    }
    if a.len() > BRUTE_FORCE_MAX_SAMPLES || b.len() > BRUTE_FORCE_MAX_SAMPLES {
        return Err(Error::invalid(format!(
            "brute-force Fréchet limited to {BRUTE_FORCE_MAX_SAMPLES} samples per side"
        )));
    }
    let pa: Vec<Vec3> = a.positions().collect();
    let pb: Vec<Vec3> = b.positions().collect();
    let mut best = f64::INFINITY;
    enumerate_couplings(&pa, &pb, 0, 0, 0.0, &mut best);
    Ok(best)
}

fn enumerate_couplings(pa: &[Vec3], pb: &[Vec3], i: usize, j: usize, running: f64, best: &mut f64) {
    let running = running.max(euclidean(pa[i], pb[j]));
    let (last_i, last_j) = (pa.len() - 1, pb.len() - 1);
    if i == last_i && j == last_j {
        if running < *best {
            *best = running;
        }
        return;
    }
    if i < last_i {
        enumerate_couplings(pa, pb, i + 1, j, running, best);
    }
    if j < last_j {
        enumerate_couplings(pa, pb, i, j + 1, running, best);
    }
    if i < last_i && j < last_j {
        enumerate_couplings(pa, pb, i + 1, j + 1, running, best);
    }
}

pub fn path_length(t: &Trajectory) -> f64 {
    t.samples
        .windows(2)
        .map(|w| euclidean(w[0].pose.position, w[1].pose.position))
        .sum()
}

/// Resamples `t` to `n` poses spaced uniformly by arc length along the
/// position polyline. Endpoints are copied exactly; each orientation comes
/// from the original sample nearest in arc length.
pub fn resample_uniform(t: &Trajectory, n: usize) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::invalid("resample_uniform needs n >= 2"));
    }
    let positions: Vec<Vec3> = t.positions().collect();
    let mut cumulative = Vec::with_capacity(positions.len());
    cumulative.push(0.0);
    for w in positions.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + euclidean(w[0], w[1]));
    }
    let total = *cumulative.last().unwrap();

    let nearest_orientation = |s: f64| {
        let idx = cumulative
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| (*x - s).abs().total_cmp(&(*y - s).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        t.samples[idx].pose.orientation
    };

    let mut samples = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let pose = if k == 0 {
            *t.first()
        } else if k == n - 1 {
            *t.last()
        } else if total == 0.0 {
            Pose::oriented(positions[0], t.first().orientation)
        } else {
            let s = total * k as f64 / (n - 1) as f64;
            while seg + 1 < cumulative.len() - 1 && cumulative[seg + 1] < s {
                seg += 1;
            }
            let seg_len = cumulative[seg + 1] - cumulative[seg];
            let frac = if seg_len > 0.0 {
                ((s - cumulative[seg]) / seg_len).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let p = positions[seg] + (positions[seg + 1] - positions[seg]) * frac;
            Pose::oriented(p, nearest_orientation(s))
        };
        samples.push(Sample { step: k as u64, pose });
    }
    Trajectory::new(samples)
}
