use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use tamp_core::bt::Outcome;
use tamp_core::dmp::{load_demo, Demo};
use tamp_core::opt::Status;
use tamp_core::sim::*;
use tamp_core::stl::{parse, robustness};

fn scenario_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(rel)
}

fn load(rel: &str) -> Scenario {
    Scenario::load(scenario_path(rel)).unwrap()
}

// all pick-move-place variants share demos, seed and learning config
fn pmp_skills() -> &'static BTreeMap<String, SkillBundle> {
    static SKILLS: OnceLock<BTreeMap<String, SkillBundle>> = OnceLock::new();
    SKILLS.get_or_init(|| load("pick_move_place/scenario.json").learn_skills().unwrap())
}

fn run(rel: &str) -> (Scenario, ExecutionLog, Evaluation) {
    let sc = load(rel);
    let log = execute(&sc, pmp_skills(), None).unwrap();
    let ev = evaluate(&log, &sc).unwrap();
    (sc, log, ev)
}

fn kinds(log: &ExecutionLog, kind: EventKind) -> Vec<&Event> {
    log.events.iter().filter(|e| e.kind == kind).collect()
}

#[test]
fn nominal_run_is_monotone_and_satisfies_the_task() {
    let (sc, log, ev) = run("pick_move_place/scenario.json");
    assert_eq!(log.outcome, Outcome::Success);
    assert_eq!(log.epsilon_sequence(), vec![0, 1, 2]);
    assert!(log.rows.len() <= sc.spec.max_ticks + 1);
    assert!(ev.satisfied && ev.robustness >= 0.0, "{ev:?}");
    assert!(ev.subtasks.iter().all(|s| s.executed));
    assert!(kinds(&log, EventKind::MonitorViolated).is_empty());
}

#[test]
fn cup_knocked_away_after_placing_reenters_pick() {
    let (_, log, ev) = run("pick_move_place/scenario_teleport.json");
    assert_eq!(log.outcome, Outcome::Success);
    assert_eq!(kinds(&log, EventKind::Disturbance).len(), 1);
    assert_eq!(log.epsilon_sequence(), vec![0, 1, 2, 0, 1, 2]);
    assert!(ev.satisfied, "{ev:?}");
    // the cup ends up in the goal region again
    let last = |c: &str| *log.channel(c).unwrap().last().unwrap();
    assert!((last("cup.x") - 0.4).abs() < 0.02 && (last("cup.y") - 0.5).abs() < 0.02);
}

#[test]
fn push_during_place_reenters_move() {
    let (_, log, _) = run("pick_move_place/scenario_push.json");
    assert_eq!(log.outcome, Outcome::Success);
    let eps = log.epsilon_sequence();
    assert_eq!(&eps[..3], &[0, 1, 2]);
    assert!(eps[3..].contains(&1), "{eps:?}");
    assert_eq!(*eps.last().unwrap(), 2);
}

#[test]
fn moved_obstacle_is_avoided_by_replanning() {
    let (sc, log, ev) = run("pick_move_place/scenario_obstacle.json");
    assert_eq!(log.outcome, Outcome::Success);
    assert!(ev.satisfied, "{ev:?}");
    // the plan made before the disturbance is stale once move starts
    assert!(kinds(&log, EventKind::Replan).iter().any(|e| e.subtask == Some(1)));
    // clearance from the obstacle's new location holds on the executed path
    let Mutation::MoveRegion { center, .. } = &sc.spec.disturbances[0].mutation else { panic!() };
    let y = |a: &str| log.channel(&format!("y.{a}")).unwrap();
    let (x, yy, z) = (y("x"), y("y"), y("z"));
    let seg = ev.subtasks[1].segment.unwrap();
    for r in seg[0]..=seg[1] {
        let d = ((x[r] - center[0]).powi(2) + (yy[r] - center[1]).powi(2) + (z[r] - center[2]).powi(2)).sqrt();
        assert!(d > 0.07, "row {r}: clearance {d}");
    }
}

#[test]
fn blocked_corridor_fails_after_one_replan() {
    let (_, log, ev) = run("pick_move_place/scenario_blocked.json");
    assert_eq!(log.outcome, Outcome::Failure);
    let violations = kinds(&log, EventKind::MonitorViolated);
    assert!(violations.len() >= 2 && violations.iter().all(|e| e.subtask == Some(1)));
    assert!(!ev.satisfied);
}

#[test]
fn runs_are_byte_identical() {
    let sc = load("pick_move_place/scenario_teleport.json");
    let csv = |log: &ExecutionLog| {
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        buf
    };
    let skills_a = sc.learn_skills().unwrap();
    let skills_b = sc.learn_skills().unwrap();
    assert_eq!(skills_a, skills_b);
    let a = execute(&sc, &skills_a, None).unwrap();
    let b = execute(&sc, &skills_b, None).unwrap();
    assert_eq!(csv(&a), csv(&b));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn end_effector_replays_the_plan_sample_by_sample() {
    let sc = load("pick_move_place/scenario.json");
    let plan = plan_task(&sc, pmp_skills()).unwrap();
    let log = execute(&sc, pmp_skills(), Some(&plan)).unwrap();
    let pick = &plan.actions[0];
    let (x, y, z) = (log.channel("y.x").unwrap(), log.channel("y.y").unwrap(), log.channel("y.z").unwrap());
    // row k is the state after the tick that commanded sample k
    for k in 1..pick.len() {
        assert_eq!(log.rows[k].epsilon, Some(0));
        assert_eq!(log.rows[k].progress, Some(k));
        assert_eq!([x[k], y[k], z[k]], pick.positions[k]);
    }
}

#[test]
fn initially_satisfied_task_runs_no_action() {
    let mut spec = load("pick_move_place/scenario.json").spec;
    spec.world.objects.get_mut("cup").unwrap().position = [0.4, 0.5, 0.05];
    let sc = Scenario::from_spec(spec, &scenario_path("pick_move_place")).unwrap();
    let log = execute(&sc, pmp_skills(), None).unwrap();
    assert_eq!(log.outcome, Outcome::Success);
    assert!(log.epsilon_sequence().is_empty());
    assert_eq!(log.rows.len(), 2);
    let ev = evaluate(&log, &sc).unwrap();
    assert!(ev.satisfied && ev.subtasks.iter().all(|s| !s.executed));
}

#[test]
fn unknown_entities_and_skills_are_rejected() {
    let base = load("pick_move_place/scenario.json").spec;
    let dir = scenario_path("pick_move_place");

    let mut spec = base.clone();
    spec.skills.remove("carry");
    assert!(matches!(Scenario::from_spec(spec, &dir), Err(SimError::UnknownSkill(s)) if s == "carry"));

    let mut spec = base.clone();
    spec.world.regions.remove("goal");
    assert!(matches!(Scenario::from_spec(spec, &dir), Err(SimError::UnknownEntity(s)) if s == "goal"));

    let mut spec = base.clone();
    spec.world.objects.remove("cup");
    assert!(matches!(Scenario::from_spec(spec, &dir), Err(SimError::UnknownEntity(s)) if s == "cup"));

    let mut spec = base;
    spec.disturbances = vec![Disturbance {
        when: Trigger::AfterSuccess { subtask: "nope".into(), delay: 0 },
        mutation: Mutation::PushEe { offset: [0.0; 3] },
    }];
    assert!(Scenario::from_spec(spec, &dir).is_err());
}

#[test]
fn schema_mismatch_is_reported() {
    let sc = load("pick_move_place/scenario.json");
    let plan = plan_task(&sc, pmp_skills()).unwrap();
    let text = serde_json::to_string(&plan).unwrap();
    let back: TaskPlan = serde_json::from_str(&text).unwrap();
    assert_eq!(back, plan);

    let bundle = &pmp_skills()["reach"];
    assert_eq!(&SkillBundle::from_json(&bundle.to_json()).unwrap(), bundle);
    let mut v: serde_json::Value = serde_json::from_str(&bundle.to_json()).unwrap();
    v["schema_version"] = 99.into();
    assert!(matches!(
        SkillBundle::from_json(&v.to_string()),
        Err(SimError::Schema { found: 99, expected: 1 })
    ));
}

fn line_demo(offset: f64) -> Demo {
    let n = 100;
    let positions = (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64;
            let s = s * s * (3.0 - 2.0 * s);
            [s * 0.4, offset + 0.1 * (std::f64::consts::PI * s).sin(), 0.2 - 0.1 * s]
        })
        .collect();
    Demo { dt: 0.02, positions, orientations: None }
}

#[test]
fn single_demo_skill_has_unit_weights_and_reproduces_it() {
    let demo = line_demo(0.0);
    let b = learn_skill("s", std::slice::from_ref(&demo), &LearnConfig::default()).unwrap();
    assert!(b.weights.iter().flatten().all(|w| (w - 1.0).abs() < 1e-12));
    let y = b.model.positions(&b.model.forcing, b.model.y_init, b.model.y_goal).unwrap();
    let path: f64 = demo.positions.windows(2).map(|w| dist(w[0], w[1])).sum();
    let rmse = (y.iter().zip(&demo.positions).map(|(a, b)| dist(*a, *b).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    assert!(rmse <= 0.01 * path, "rmse {rmse} path {path}");
}

#[test]
fn varied_demos_get_non_uniform_weights() {
    let demos: Vec<Demo> = [-0.02, 0.0, 0.03].iter().map(|o| line_demo(*o)).collect();
    let b = learn_skill("s", &demos, &LearnConfig::default()).unwrap();
    assert!(b.weights.iter().flatten().all(|w| *w > 0.0 && *w <= 1.0));
    assert!(b.weights.iter().any(|w| w[1] < 1.0 - 1e-6));
}

#[test]
fn non_finite_demo_sample_is_rejected_with_its_row() {
    let text = "t,x,y,z\n0,0,0,0\n0.02,0.1,nan,0\n0.04,0.2,0,0\n";
    let err = load_demo(text.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("row 2"), "{err}");
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[test]
fn breakfast_scenario_is_satisfied() {
    let sc = load("breakfast/scenario.json");
    let skills = sc.learn_skills().unwrap();
    let plan = plan_task(&sc, &skills).unwrap();
    assert!(plan.actions.iter().all(|a| a.status == Status::Satisfied && a.robustness >= 0.0));
    let log = execute(&sc, &skills, Some(&plan)).unwrap();
    assert_eq!(log.outcome, Outcome::Success);
    assert_eq!(log.epsilon_sequence(), (0..8).collect::<Vec<_>>());
    let ev = evaluate(&log, &sc).unwrap();
    assert!(ev.satisfied, "{ev:?}");

    // the yank passes the via-point on the executed motion
    let seg = ev.subtasks[7].segment.unwrap();
    let tr = log.trace().unwrap().window(seg[0], seg[1] + 1).unwrap();
    let via = sc.spec.world.regions["via"].center;
    let f = parse(&format!("F[40,110](norm2(y - [{}, {}, {}]) < 0.02)", via[0], via[1], via[2])).unwrap();
    assert!(robustness(&f, &tr, 0).unwrap() >= 0.0);
}

#[test]
fn contradictory_via_point_is_best_effort_not_success() {
    let sc = load("breakfast/scenario_infeasible.json");
    let skills = sc.learn_skills().unwrap();
    let plan = plan_task(&sc, &skills).unwrap();
    let yank = plan.actions.last().unwrap();
    assert_eq!(yank.status, Status::BestEffort);
    assert!(yank.robustness < 0.0 && yank.report.robustness_exact < 0.0);
    let log = execute(&sc, &skills, Some(&plan)).unwrap();
    assert_ne!(log.outcome, Outcome::Success);
    let ev = evaluate(&log, &sc).unwrap();
    assert!(!ev.satisfied && ev.robustness < 0.0);
}

#[test]
fn tea_scenario_respects_clearance_and_velocity_limits() {
    let sc = load("tea/scenario.json");
    let skills = sc.learn_skills().unwrap();
    assert!(skills["pour"].orientation.is_some());
    let log = execute(&sc, &skills, None).unwrap();
    assert_eq!(log.outcome, Outcome::Success);
    assert_eq!(log.epsilon_sequence(), vec![0, 1, 2]);
    let ev = evaluate(&log, &sc).unwrap();
    assert!(ev.satisfied, "{ev:?}");

    let tr = log.trace().unwrap();
    let sugar = sc.spec.world.regions["sugar"].center;
    let carry = ev.subtasks[1].segment.unwrap();
    let x = |c: &str| tr.channel(c).unwrap().to_vec();
    let (yx, yy, yz) = (x("y.x"), x("y.y"), x("y.z"));
    for r in carry[0]..=carry[1] {
        let d = dist([yx[r], yy[r], yz[r]], sugar);
        assert!(d >= 0.04 + 0.02, "row {r}: {d}");
    }
    let pour = ev.subtasks[2].segment.unwrap();
    for r in pour[0] + 1..=pour[1] {
        assert!(((yz[r] - yz[r - 1]) / log.dt).abs() < 0.01);
    }
    // poured: the tilt was reached
    assert!(x("q.x")[pour[1]] > 0.5);
}
