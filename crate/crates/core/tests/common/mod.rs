#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajmt::generator::generate_suite;
use trajmt::geometry::{Trajectory, Vec3};
use trajmt::mt::{run_campaign, CampaignResult, CampaignSettings, MRKind, StrictnessLevel};
use trajmt::scene::{TaskKind, TestCase};
use trajmt::sim::{ExecutionResult, FaultProfile, GripperSample, GripperState};

pub const SUITE_SEED: u64 = 2024;

/// 10 sources per task.
pub fn suite40() -> Vec<TestCase> {
    let tasks: BTreeSet<_> = TaskKind::ALL.into_iter().collect();
    generate_suite(SUITE_SEED, &tasks, 10).unwrap().cases
}

pub fn suite(per_task: usize, tasks: &[TaskKind]) -> Vec<TestCase> {
    generate_suite(SUITE_SEED, &tasks.iter().copied().collect(), per_task)
        .unwrap()
        .cases
}

pub fn settings(fault: FaultProfile, mrs: &[MRKind]) -> CampaignSettings {
    CampaignSettings {
        mrs: mrs.iter().copied().collect(),
        fault,
        seed: 17,
        jobs: 0,
        ..CampaignSettings::default()
    }
}

pub fn campaign(sources: &[TestCase], fault: FaultProfile, mrs: &[MRKind]) -> CampaignResult {
    run_campaign(sources, &settings(fault, mrs)).unwrap()
}

/// Violation rate of `mr` at `level` over evaluated rows.
pub fn rate(result: &CampaignResult, mr: MRKind, level: StrictnessLevel) -> (usize, usize) {
    let rows: Vec<_> = result
        .rows
        .iter()
        .filter(|r| r.mr == mr && r.strictness == level && r.is_evaluated())
        .collect();
    (rows.iter().filter(|r| r.is_violation()).count(), rows.len())
}

/// Follow-up ids violated per (relation, level).
pub fn violation_sets(result: &CampaignResult) -> BTreeMap<(MRKind, StrictnessLevel), BTreeSet<String>> {
    let mut m: BTreeMap<_, BTreeSet<String>> = BTreeMap::new();
    for r in &result.rows {
        let e = m.entry((r.mr, r.strictness)).or_default();
        if r.is_violation() {
            e.insert(r.followup_id.clone());
        }
    }
    m
}

pub fn random_trajectory(rng: &mut ChaCha8Rng, max_len: usize) -> Trajectory {
    let n = rng.gen_range(1..=max_len);
    let pts: Vec<Vec3> = (0..n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    Trajectory::from_positions(&pts).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A recorded episode with a still end effector, the given object traces,
/// and the gripper holding `held` at the last step.
pub fn hand_built(traces: &[(&str, Vec<Vec3>)], held: Option<&str>) -> ExecutionResult {
    let steps = traces[0].1.len();
    let mut gripper: Vec<GripperSample> = (0..steps as u64)
        .map(|step| GripperSample {
            step,
            state: GripperState::Open,
        })
        .collect();
    if let Some(h) = held {
        gripper.last_mut().unwrap().state = GripperState::Holding(h.to_string());
    }
    ExecutionResult {
        trajectory: Trajectory::from_positions(&vec![Vec3::new(0.0, 0.0, 0.3); steps]).unwrap(),
        gripper,
        object_traces: traces
            .iter()
            .map(|(id, pts)| (id.to_string(), Trajectory::from_positions(pts).unwrap()))
            .collect(),
        events: Vec::new(),
        steps,
        moved: false,
    }
}

/// Object at height `z0` that then rises by each of `lifts` in turn.
pub fn lift_trace(z0: f64, lifts: &[f64]) -> Vec<Vec3> {
    std::iter::once(z0)
        .chain(lifts.iter().map(|l| z0 + l))
        .map(|z| Vec3::new(0.25, 0.0, z))
        .collect()
}
