//! Every fault kind, at its documented magnitude, yields its designated
//! diagnosis label on all 20 cases of a fixed suite.

mod common;

use common::suite;
use trajmt::mt::{generate_followup, generate_followup_with, FollowUpCase, FollowUpOptions, MRKind};
use trajmt::oracles::{check_task, diagnose, FailureLabel};
use trajmt::scene::{Lexicon, TaskKind, TestCase};
use trajmt::sim::{execute, execute_with_relocation, FaultKind, FaultProfile};

const CASES: usize = 20;

fn followups(task: TaskKind, mr: MRKind, opts: &FollowUpOptions) -> Vec<FollowUpCase> {
    suite(CASES, &[task])
        .iter()
        .enumerate()
        .map(|(i, tc)| generate_followup_with(mr, tc, i as u64, opts).unwrap())
        .collect()
}

fn assert_label(cases: &[(TestCase, Option<[f64; 2]>)], fault: FaultProfile, label: FailureLabel) {
    assert_eq!(cases.len(), CASES);
    for (tc, delta_p) in cases {
        let r = execute_with_relocation(tc, &fault, *delta_p).unwrap();
        let oracle = check_task(tc, &r).unwrap();
        let d = diagnose(&r, tc, &oracle);
        assert!(
            d.has(label),
            "{}: {:?} lacks {label} ({})",
            tc.id,
            d.labels,
            oracle.reason
        );
        assert!(d.metrics.contains_key(&label));
    }
}

fn plain(cases: Vec<TestCase>) -> Vec<(TestCase, Option<[f64; 2]>)> {
    cases.into_iter().map(|c| (c, None)).collect()
}

#[test]
fn fault_free_runs_have_no_labels() {
    for tc in suite(5, &TaskKind::ALL) {
        let r = execute(&tc, &FaultProfile::none()).unwrap();
        let oracle = check_task(&tc, &r).unwrap();
        assert!(oracle.success, "{}: {}", tc.id, oracle.reason);
        assert!(diagnose(&r, &tc, &oracle).labels.is_empty(), "{}", tc.id);
    }
}

#[test]
fn prompt_verb_sensitivity_is_incomplete_task() {
    let lexicon = Lexicon::default();
    let cases: Vec<TestCase> = suite(CASES, &[TaskKind::PickUp])
        .into_iter()
        .enumerate()
        .map(|(i, mut tc)| {
            tc.prompt.verb = lexicon.synonym_for("pick", TaskKind::PickUp, i as u64).unwrap();
            tc.prompt.rerender(&tc.scene).unwrap();
            tc
        })
        .collect();
    assert_label(
        &plain(cases),
        FaultProfile::new(FaultKind::PromptVerbSensitivity, 0.1),
        FailureLabel::IncompleteTask,
    );
}

#[test]
fn distractor_attraction_is_suboptimal() {
    let cases = followups(TaskKind::PickUp, MRKind::Mr2ObjectAddition, &FollowUpOptions::default());
    assert_label(
        &plain(cases.into_iter().map(|f| f.test).collect()),
        FaultProfile::new(FaultKind::DistractorAttraction, 0.6),
        FailureLabel::TrajectorySubOptimality,
    );
}

#[test]
fn illumination_sensitivity_is_incomplete_task() {
    let opts = FollowUpOptions {
        mr3_factors: vec![0.6, 1.4],
        ..FollowUpOptions::default()
    };
    let cases = followups(TaskKind::PickUp, MRKind::Mr3Brightness, &opts);
    assert_label(
        &plain(cases.into_iter().map(|f| f.test).collect()),
        FaultProfile::new(FaultKind::IlluminationSensitivity, 0.5),
        FailureLabel::IncompleteTask,
    );
}

#[test]
fn negation_blindness_is_instruction_violation() {
    let cases: Vec<TestCase> = suite(5, &TaskKind::ALL)
        .iter()
        .map(|tc| generate_followup(MRKind::Mr4Negation, tc, 0).unwrap().test)
        .collect();
    assert_label(
        &plain(cases),
        FaultProfile::new(FaultKind::NegationBlindness, 0.0),
        FailureLabel::InstructionViolation,
    );
}

#[test]
fn relocation_reaction_is_incomplete_task() {
    let cases = followups(TaskKind::PickUp, MRKind::Mr5Relocation, &FollowUpOptions::default());
    let cases: Vec<_> = cases.into_iter().map(|f| (f.test, f.meta.delta_p())).collect();
    assert_label(
        &cases,
        FaultProfile::new(FaultKind::RelocationReaction, 0.2),
        FailureLabel::IncompleteTask,
    );
}

#[test]
fn grasp_instability_is_grasp_instability() {
    assert_label(
        &plain(suite(5, &TaskKind::ALL)),
        FaultProfile {
            kind: FaultKind::GraspInstability,
            magnitude: 0.0,
            trigger_step: Some(40),
        },
        FailureLabel::GraspInstability,
    );
}

#[test]
fn oscillation_noise_is_control_instability() {
    assert_label(
        &plain(suite(5, &TaskKind::ALL)),
        FaultProfile::new(FaultKind::OscillationNoise, 0.05),
        FailureLabel::ControlInstability,
    );
}

#[test]
fn collision_blindness_is_collision() {
    assert_label(
        &plain(suite(10, &[TaskKind::PutOn, TaskKind::PutIn])),
        FaultProfile::new(FaultKind::CollisionBlindness, 0.0),
        FailureLabel::Collision,
    );
}
