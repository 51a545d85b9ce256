use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::plan::{horizontal_perpendicular, Action};
use super::{
    Event, EventKind, ExecutionResult, FaultKind, FaultProfile, GripperSample, GripperState, FALL_PER_STEP,
    GRASP_RANGE, GRIPPER_ID, OSCILLATION_PERIOD, REGRASP_DELAY, STEP_SIZE,
};
use crate::geometry::{Pose, Quaternion, Sample, Trajectory, Vec3};
use crate::scene::{box_penetration, point_penetration, Scene, PENETRATION_TOLERANCE};

struct World<'a> {
    scene: &'a Scene,
    step: u64,
    ee: Vec3,
    held: Option<(usize, Vec3)>,
    gripper: GripperState,
    centers: Vec<Vec3>,
    falling: Vec<bool>,
    ee_trace: Vec<Vec3>,
    gripper_trace: Vec<GripperState>,
    object_traces: Vec<Vec<Vec3>>,
    events: Vec<Event>,
    contacts: BTreeSet<(String, String)>,
}

impl<'a> World<'a> {
    fn new(scene: &'a Scene) -> Self {
        let centers: Vec<Vec3> = scene.objects.iter().map(|o| o.center()).collect();
        let mut w = World {
            scene,
            step: 0,
            ee: scene.home(),
            held: None,
            gripper: GripperState::Open,
            falling: vec![false; centers.len()],
            object_traces: centers.iter().map(|c| vec![*c]).collect(),
            centers,
            ee_trace: vec![scene.home()],
            gripper_trace: vec![GripperState::Open],
            events: Vec::new(),
            contacts: BTreeSet::new(),
        };
        w.update_contacts();
        w
    }

    fn tick(&mut self, ee: Vec3) {
        self.step += 1;
        self.ee = ee;
        if let Some((i, offset)) = self.held {
            self.centers[i] = ee + offset;
        }
        for i in 0..self.centers.len() {
            if self.falling[i] {
                let rest = self.support_height(i) + self.scene.objects[i].half_extents.z();
                let next = self.centers[i].z() - FALL_PER_STEP;
                if next <= rest {
                    self.centers[i] = self.centers[i].with_z(rest);
                    self.falling[i] = false;
                } else {
                    self.centers[i] = self.centers[i].with_z(next);
                }
            }
        }
        self.ee_trace.push(ee);
        self.gripper_trace.push(self.gripper.clone());
        for (trace, c) in self.object_traces.iter_mut().zip(&self.centers) {
            trace.push(*c);
        }
        self.update_contacts();
    }

    fn set_gripper(&mut self, state: GripperState) {
        self.gripper = state.clone();
        *self.gripper_trace.last_mut().expect("trace starts non-empty") = state;
    }

    fn emit(&mut self, kind: EventKind) {
        self.events.push(Event { step: self.step, kind });
    }

    /// Highest surface at or below object `i`'s bottom face.
    fn support_height(&self, i: usize) -> f64 {
        let obj = &self.scene.objects[i];
        let bounds = obj.bounds_at(self.centers[i]);
        let bottom = bounds.min.z();
        let mut support = self.scene.table_height;
        for (j, other) in self.scene.objects.iter().enumerate() {
            if j == i {
                continue;
            }
            let ob = other.bounds_at(self.centers[j]);
            let overlaps = (0..2).all(|k| bounds.max.0[k].min(ob.max.0[k]) - bounds.min.0[k].max(ob.min.0[k]) > 1e-9);
            if !overlaps {
                continue;
            }
            let surface = if other.is_container && bounds.footprint_within(&other.cavity_at(self.centers[j]), 1e-9) {
                other.cavity_at(self.centers[j]).min.z()
            } else {
                ob.max.z()
            };
            if surface <= bottom + 1e-9 {
                support = support.max(surface);
            }
        }
        support
    }

    fn airborne(&self, i: usize) -> bool {
        let bottom = self.centers[i].z() - self.scene.objects[i].half_extents.z();
        bottom - self.support_height(i) > PENETRATION_TOLERANCE
    }

    fn close(&mut self) {
        if self.held.is_some() {
            return;
        }
        let ee = self.ee;
        let candidate = self
            .scene
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.graspable)
            .map(|(i, o)| {
                let top = self.centers[i].with_z(self.centers[i].z() + o.half_extents.z());
                (i, (top - ee).norm())
            })
            .filter(|(_, d)| *d <= GRASP_RANGE + 1e-9)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match candidate {
            Some((i, _)) => {
                self.held = Some((i, self.centers[i] - ee));
                self.falling[i] = false;
                let id = self.scene.objects[i].id.clone();
                self.set_gripper(GripperState::Holding(id.clone()));
                self.emit(EventKind::Grasp { object: id });
            }
            None => self.set_gripper(GripperState::Closed),
        }
    }

    fn open(&mut self, involuntary: bool) {
        if let Some((i, _)) = self.held.take() {
            let object = self.scene.objects[i].id.clone();
            self.falling[i] = self.airborne(i);
            self.emit(if involuntary {
                EventKind::Drop { object }
            } else {
                EventKind::Release { object }
            });
        }
        self.set_gripper(GripperState::Open);
    }

    fn update_contacts(&mut self) {
        let objects = &self.scene.objects;
        let held = self.held.map(|(i, _)| i);
        let mut now = BTreeSet::new();
        for (i, a) in objects.iter().enumerate() {
            if Some(i) != held && point_penetration(self.ee, a, self.centers[i]) > PENETRATION_TOLERANCE {
                now.insert((GRIPPER_ID.to_string(), a.id.clone()));
            }
            for (j, b) in objects.iter().enumerate().skip(i + 1) {
                if box_penetration(a, self.centers[i], b, self.centers[j]) > PENETRATION_TOLERANCE {
                    let pair = if a.id <= b.id {
                        (a.id.clone(), b.id.clone())
                    } else {
                        (b.id.clone(), a.id.clone())
                    };
                    now.insert(pair);
                }
            }
        }
        let onsets: Vec<_> = now.difference(&self.contacts).cloned().collect();
        for (a, b) in onsets {
            self.emit(EventKind::Contact { a, b });
        }
        self.contacts = now;
    }

    fn finish(self) -> ExecutionResult {
        let steps = self.ee_trace.len();
        let trajectory = trajectory_of(&self.ee_trace, Quaternion::GRASP_DOWN);
        let object_traces: BTreeMap<String, Trajectory> = self
            .scene
            .objects
            .iter()
            .zip(&self.object_traces)
            .map(|(o, t)| (o.id.clone(), trajectory_of(t, o.pose.orientation)))
            .collect();
        let moved = self.ee_trace.iter().any(|p| *p != self.ee_trace[0]);
        ExecutionResult {
            trajectory,
            gripper: self
                .gripper_trace
                .into_iter()
                .enumerate()
                .map(|(i, state)| GripperSample { step: i as u64, state })
                .collect(),
            object_traces,
            events: self.events,
            steps,
            moved,
        }
    }
}

fn trajectory_of(points: &[Vec3], orientation: Quaternion) -> Trajectory {
    let samples = points
        .iter()
        .enumerate()
        .map(|(i, p)| Sample {
            step: i as u64,
            pose: Pose::oriented(*p, orientation),
        })
        .collect();
    Trajectory::new(samples).expect("world traces are non-empty and ordered")
}

fn steps_for(len: f64) -> usize {
    ((len / STEP_SIZE) - 1e-9).ceil().max(1.0) as usize
}

/// Triangular wave with unit amplitude: 0, 1, 0, -1, ...
fn triangle(k: usize) -> f64 {
    let quarter = OSCILLATION_PERIOD / 4;
    let phase = k % OSCILLATION_PERIOD;
    let up = phase as f64 / quarter as f64;
    match phase / quarter {
        0 => up,
        1 => 2.0 - up,
        2 => 2.0 - up,
        _ => up - 4.0,
    }
}

pub(super) fn run(scene: &Scene, fault: &FaultProfile, actions: Vec<Action>) -> ExecutionResult {
    let mut world = World::new(scene);
    let mut queue: VecDeque<Action> = actions.into();
    let mut dropped = false;

    while let Some(action) = queue.pop_front() {
        match action {
            Action::Close => world.close(),
            Action::Open => world.open(false),
            Action::Wait(n) => {
                for _ in 0..n {
                    world.tick(world.ee);
                }
            }
            Action::Regrasp { object, resume } => {
                let o = &scene.objects[object];
                let top = world.centers[object].with_z(world.centers[object].z() + o.half_extents.z());
                queue.push_front(Action::Move {
                    to: resume,
                    travel: false,
                });
                queue.push_front(Action::Close);
                queue.push_front(Action::Move { to: top, travel: false });
            }
            Action::Move { to, travel } => {
                let from = world.ee;
                let delta = to - from;
                let len = delta.norm();
                if len == 0.0 {
                    continue;
                }
                let n = steps_for(len);
                let wobble = (travel && fault.kind == FaultKind::OscillationNoise && fault.magnitude > 0.0)
                    .then(|| horizontal_perpendicular(from, to, Vec3::new(1.0, 0.0, 0.0)) * fault.magnitude);
                for k in 1..=n {
                    let p = if k == n {
                        to
                    } else {
                        let base = from + delta * (k as f64 / n as f64);
                        match wobble {
                            Some(w) => base + w * triangle(k),
                            None => base,
                        }
                    };
                    world.tick(p);

                    if fault.kind == FaultKind::GraspInstability
                        && !dropped
                        && world.step >= fault.trigger_step.unwrap_or(0)
                    {
                        if let Some((i, _)) = world.held {
                            if world.airborne(i) {
                                dropped = true;
                                let resume = world.ee;
                                world.open(true);
                                if k < n {
                                    queue.push_front(Action::Move { to, travel });
                                }
                                queue.push_front(Action::Regrasp { object: i, resume });
                                queue.push_front(Action::Wait(REGRASP_DELAY));
                                break;
                            }
                        }
                    }
                }
            }
        }
    }
    world.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_wave() {
        let got: Vec<f64> = (0..9).map(triangle).collect();
        assert_eq!(got, vec![0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn step_counts() {
        assert_eq!(steps_for(0.1), 10);
        assert_eq!(steps_for(0.105), 11);
        assert_eq!(steps_for(0.001), 1);
    }
}
