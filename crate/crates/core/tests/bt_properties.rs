use std::collections::BTreeMap;

use tamp_core::bt::{run_to_completion, BtContext, BtFault, BtInstance, Outcome, TickStatus};
use tamp_core::stl::Formula;
use tamp_core::task::{ActionNode, ActionSpec, Binding, BtBlueprint, BtNode, ConditionExpr, Symbol};

const ALL: [TickStatus; 3] = [TickStatus::Success, TickStatus::Failure, TickStatus::Running];

/// Leaves return scripted statuses; ticks and halts are counted per leaf.
#[derive(Default)]
struct Script {
    status: BTreeMap<String, TickStatus>,
    conditions: BTreeMap<String, bool>,
    ticks: BTreeMap<String, usize>,
    halts: BTreeMap<String, usize>,
}

impl BtContext for Script {
    fn condition(&mut self, id: &str, _expr: &ConditionExpr) -> Result<bool, BtFault> {
        self.conditions.get(id).copied().ok_or_else(|| BtFault::Unresolvable { id: id.into(), reason: "unscripted".into() })
    }

    fn tick_action(&mut self, a: &ActionNode) -> Result<TickStatus, BtFault> {
        *self.ticks.entry(a.name.clone()).or_default() += 1;
        Ok(self.status[&a.name])
    }

    fn halt_action(&mut self, a: &ActionNode) {
        *self.halts.entry(a.name.clone()).or_default() += 1;
    }
}

fn leaf(i: usize) -> BtNode {
    BtNode::Action(ActionNode {
        subtask: i,
        name: format!("c{i}"),
        spec: ActionSpec {
            skill: "s".into(),
            init: Binding::Named("ee".into()),
            goal: Binding::Point([0.0; 3]),
            grasp: false,
            release: false,
            object: None,
            orientation: None,
        },
        constraint: Formula::True,
        post: "true".into(),
    })
}

fn blueprint(root: BtNode) -> BtBlueprint {
    let mut symbols = BTreeMap::new();
    symbols.insert("true".to_owned(), ConditionExpr::True);
    BtBlueprint { schema_version: 1, root, symbols }
}

fn combos(n: usize) -> Vec<Vec<TickStatus>> {
    (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let s = ALL[k % 3];
                    k /= 3;
                    s
                })
                .collect()
        })
        .collect()
}

fn run_once(root: BtNode, statuses: &[TickStatus]) -> (TickStatus, Script) {
    let mut ctx = Script::default();
    for (i, s) in statuses.iter().enumerate() {
        ctx.status.insert(format!("c{i}"), *s);
    }
    let mut inst = BtInstance::new(blueprint(root)).unwrap();
    let s = inst.tick(&mut ctx).unwrap();
    (s, ctx)
}

fn ticked(ctx: &Script, n: usize) -> Vec<bool> {
    (0..n).map(|i| ctx.ticks.get(&format!("c{i}")).copied().unwrap_or(0) == 1).collect()
}

#[test]
fn sequence_truth_table() {
    for n in [2, 3] {
        for c in combos(n) {
            let (s, ctx) = run_once(BtNode::Sequence { children: (0..n).map(leaf).collect() }, &c);
            let first = c.iter().position(|s| *s != TickStatus::Success);
            let want = first.map_or(TickStatus::Success, |i| c[i]);
            assert_eq!(s, want, "{c:?}");
            let reach = first.map_or(n, |i| i + 1);
            assert_eq!(ticked(&ctx, n), (0..n).map(|i| i < reach).collect::<Vec<_>>(), "{c:?}");
        }
    }
}

#[test]
fn fallback_truth_table() {
    for n in [2, 3] {
        for c in combos(n) {
            let (s, ctx) = run_once(BtNode::Fallback { children: (0..n).map(leaf).collect() }, &c);
            let first = c.iter().position(|s| *s != TickStatus::Failure);
            let want = first.map_or(TickStatus::Failure, |i| c[i]);
            assert_eq!(s, want, "{c:?}");
            let reach = first.map_or(n, |i| i + 1);
            assert_eq!(ticked(&ctx, n), (0..n).map(|i| i < reach).collect::<Vec<_>>(), "{c:?}");
        }
    }
}

#[test]
fn parallel_truth_table() {
    for n in [2, 3] {
        for alpha in 1..=n {
            for beta in 0..n {
                for c in combos(n) {
                    let root = BtNode::Parallel {
                        success_threshold: alpha,
                        failure_threshold: beta,
                        children: (0..n).map(leaf).collect(),
                    };
                    let (s, ctx) = run_once(root, &c);
                    let succ = c.iter().filter(|s| **s == TickStatus::Success).count();
                    let fail = c.iter().filter(|s| **s == TickStatus::Failure).count();
                    let want = if fail > beta {
                        TickStatus::Failure
                    } else if succ >= alpha {
                        TickStatus::Success
                    } else {
                        TickStatus::Running
                    };
                    assert_eq!(s, want, "alpha {alpha} beta {beta} {c:?}");
                    assert!(ticked(&ctx, n).iter().all(|t| *t), "all children ticked");
                }
            }
        }
    }
}

#[test]
fn documented_examples() {
    use TickStatus::*;
    let seq = BtNode::Sequence { children: (0..3).map(leaf).collect() };
    assert_eq!(run_once(seq, &[Success, Success, Success]).0, Success);

    let fb = BtNode::Fallback { children: (0..2).map(leaf).collect() };
    let (s, ctx) = run_once(fb, &[Success, Failure]);
    assert_eq!(s, Success);
    assert_eq!(ctx.ticks.get("c1"), None);

    let par = BtNode::Parallel { success_threshold: 2, failure_threshold: 1, children: (0..3).map(leaf).collect() };
    assert_eq!(run_once(par, &[Success, Success, Failure]).0, Success);
}

#[test]
fn preempted_action_is_halted_once() {
    use TickStatus::*;
    // Fallback(c0, c1): c1 runs while c0 fails, then c0 succeeds and preempts it
    let mut inst = BtInstance::new(blueprint(BtNode::Fallback { children: vec![leaf(0), leaf(1)] })).unwrap();
    let mut ctx = Script::default();
    ctx.status.insert("c0".into(), Failure);
    ctx.status.insert("c1".into(), Running);
    assert_eq!(inst.tick(&mut ctx).unwrap(), Running);
    assert_eq!(inst.switching_signal(), Some(1));
    assert_eq!(inst.tick(&mut ctx).unwrap(), Running);
    assert!(ctx.halts.is_empty());
    ctx.status.insert("c0".into(), Success);
    assert_eq!(inst.tick(&mut ctx).unwrap(), Success);
    assert_eq!(ctx.halts.get("c1"), Some(&1));
    assert_eq!(inst.switching_signal(), None);
    inst.tick(&mut ctx).unwrap();
    assert_eq!(ctx.halts.get("c1"), Some(&1));
}

#[test]
fn running_child_of_failed_parallel_is_halted() {
    use TickStatus::*;
    let root = BtNode::Parallel { success_threshold: 2, failure_threshold: 0, children: vec![leaf(0), leaf(1)] };
    let mut inst = BtInstance::new(blueprint(root)).unwrap();
    let mut ctx = Script::default();
    ctx.status.insert("c0".into(), Success);
    ctx.status.insert("c1".into(), Running);
    assert_eq!(inst.tick(&mut ctx).unwrap(), Running);
    assert_eq!(inst.switching_signal(), Some(1));
    ctx.status.insert("c0".into(), Failure);
    assert_eq!(inst.tick(&mut ctx).unwrap(), Failure);
    assert_eq!(ctx.halts.get("c1"), Some(&1));
    assert_eq!(inst.switching_signal(), None);
}

#[test]
fn ticking_is_pure_for_fixed_inputs() {
    for c in combos(3) {
        let root = BtNode::Fallback {
            children: vec![leaf(0), BtNode::Sequence { children: vec![leaf(1), leaf(2)] }],
        };
        let mut inst = BtInstance::new(blueprint(root)).unwrap();
        let mut ctx = Script::default();
        for (i, s) in c.iter().enumerate() {
            ctx.status.insert(format!("c{i}"), *s);
        }
        let a = inst.tick(&mut ctx).unwrap();
        let sig = inst.switching_signal();
        let summary = inst.summary();
        for _ in 0..3 {
            assert_eq!(inst.tick(&mut ctx).unwrap(), a);
            assert_eq!(inst.switching_signal(), sig);
            assert_eq!(inst.summary(), summary);
        }
    }
}

#[test]
fn unknown_condition_is_a_fault() {
    let bp = blueprint(BtNode::Condition { id: "nope".into() });
    assert!(matches!(BtInstance::new(bp), Err(BtFault::UnknownCondition(_))));

    // resolvable in the table but not by the world
    let mut bp = blueprint(BtNode::Condition { id: "Picked".into() });
    bp.symbols.insert("Picked".into(), ConditionExpr::Symbol(Symbol { name: "Picked".into(), args: vec![], negated: false }));
    let mut inst = BtInstance::new(bp).unwrap();
    let log = run_to_completion(&mut inst, &mut Script::default(), 5, |_, _| false);
    assert!(matches!(log.outcome, Outcome::Fault(_)));
}

#[test]
fn any_of_short_circuits() {
    let mut bp = blueprint(BtNode::Condition { id: "done".into() });
    bp.symbols.insert("done".into(), ConditionExpr::AnyOf { ids: vec!["a".into(), "b".into()] });
    for id in ["a", "b"] {
        bp.symbols.insert(id.into(), ConditionExpr::Symbol(Symbol { name: id.into(), args: vec![], negated: false }));
    }
    let mut inst = BtInstance::new(bp).unwrap();
    let mut ctx = Script::default();
    ctx.conditions.insert("a".into(), true);
    // `b` is unscripted and would fault if evaluated
    assert_eq!(inst.tick(&mut ctx).unwrap(), TickStatus::Success);
    ctx.conditions.insert("a".into(), false);
    ctx.conditions.insert("b".into(), false);
    assert_eq!(inst.tick(&mut ctx).unwrap(), TickStatus::Failure);
}

#[test]
fn empty_tree_succeeds_immediately() {
    let mut inst = BtInstance::new(blueprint(BtNode::Sequence { children: vec![] })).unwrap();
    let log = run_to_completion(&mut inst, &mut Script::default(), 10, |_, _| false);
    assert_eq!(log.outcome, Outcome::Success);
    assert_eq!(log.records.len(), 1);
    assert!(log.epsilon_sequence().is_empty());
}

#[test]
fn run_times_out_with_partial_log() {
    let mut inst = BtInstance::new(blueprint(leaf(0))).unwrap();
    let mut ctx = Script::default();
    ctx.status.insert("c0".into(), TickStatus::Running);
    let log = run_to_completion(&mut inst, &mut ctx, 7, |_, _| false);
    assert_eq!(log.outcome, Outcome::TimedOut);
    assert_eq!(log.records.len(), 7);
    assert_eq!(log.epsilon_sequence(), [0]);
}

#[test]
fn keep_going_extends_a_settled_run() {
    let mut inst = BtInstance::new(blueprint(leaf(0))).unwrap();
    let mut ctx = Script::default();
    ctx.status.insert("c0".into(), TickStatus::Success);
    let mut extra = 3;
    let log = run_to_completion(&mut inst, &mut ctx, 100, |_, _| {
        extra -= 1;
        extra > 0
    });
    assert_eq!(log.outcome, Outcome::Success);
    assert_eq!(log.records.len(), 3);
}
