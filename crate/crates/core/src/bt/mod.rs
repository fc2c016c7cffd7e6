//! Behaviour-tree execution with reactive (memoryless) tick semantics.
//!
//! Composite nodes keep no state between ticks: every tick restarts from the
//! root and re-evaluates all conditions, so a falsified post-condition
//! re-enters its subtask on the next tick. Action progress lives in the
//! [`BtContext`], which is told when a running action is preempted.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{ActionNode, BtBlueprint, BtNode, ConditionExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TickStatus {
    Running,
    Success,
    Failure,
}

impl TickStatus {
    pub fn letter(self) -> char {
        match self {
            TickStatus::Running => 'R',
            TickStatus::Success => 'S',
            TickStatus::Failure => 'F',
        }
    }
}

impl fmt::Display for TickStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TickStatus::Running => "running",
            TickStatus::Success => "success",
            TickStatus::Failure => "failure",
        })
    }
}

/// Faults are not Failure: they mean the tree or world is inconsistent.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BtFault {
    #[error("condition `{0}` is not in the symbol table")]
    UnknownCondition(String),
    #[error("monitor refers to missing action of subtask {0}")]
    UnknownMonitor(usize),
    #[error("cannot resolve `{id}`: {reason}")]
    Unresolvable { id: String, reason: String },
    #[error("{0}")]
    Action(String),
}

/// World-facing side of the engine.
pub trait BtContext {
    /// Evaluates a leaf condition (`Symbol`, `Stl` or `Monitor`); `True` and
    /// `AnyOf` are resolved by the engine.
    fn condition(&mut self, id: &str, expr: &ConditionExpr) -> Result<bool, BtFault>;
    /// Advances the action by one control step.
    fn tick_action(&mut self, action: &ActionNode) -> Result<TickStatus, BtFault>;
    /// The action was Running last tick and has been preempted.
    fn halt_action(&mut self, action: &ActionNode);
}

pub struct BtInstance {
    blueprint: BtBlueprint,
    active: BTreeSet<usize>,
    statuses: Vec<Option<TickStatus>>,
    ticks: usize,
}

impl BtInstance {
    pub fn new(blueprint: BtBlueprint) -> Result<Self, BtFault> {
        validate(&blueprint)?;
        let nodes = count(&blueprint.root);
        Ok(Self { blueprint, active: BTreeSet::new(), statuses: vec![None; nodes], ticks: 0 })
    }

    pub fn blueprint(&self) -> &BtBlueprint {
        &self.blueprint
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    pub fn tick<C: BtContext>(&mut self, ctx: &mut C) -> Result<TickStatus, BtFault> {
        self.statuses.iter_mut().for_each(|s| *s = None);
        let mut walk = Walk { symbols: &self.blueprint.symbols, statuses: &mut self.statuses, next: 0, running: Vec::new(), finished: Vec::new() };
        let status = walk.node(&self.blueprint.root, ctx, true)?;
        let Walk { running, finished, .. } = walk;
        let now: BTreeSet<usize> = running.into_iter().collect();
        let finished: BTreeSet<usize> = finished.into_iter().collect();
        let actions = action_index(&self.blueprint.root);
        for id in self.active.difference(&now) {
            if !finished.contains(id) {
                ctx.halt_action(actions[id]);
            }
        }
        // an action that ran but whose ancestor stopped is preempted too
        for id in now.iter().filter(|id| !self.path_running(**id)) {
            ctx.halt_action(actions[id]);
        }
        self.active = now.into_iter().filter(|id| self.path_running(*id)).collect();
        self.ticks += 1;
        Ok(status)
    }

    fn path_running(&self, target: usize) -> bool {
        fn go(n: &BtNode, id: &mut usize, target: usize, st: &[Option<TickStatus>]) -> Option<bool> {
            let me = *id;
            *id += 1;
            let running = st[me] == Some(TickStatus::Running);
            if me == target {
                return Some(running);
            }
            if let BtNode::Sequence { children } | BtNode::Fallback { children } | BtNode::Parallel { children, .. } = n {
                for c in children {
                    if let Some(r) = go(c, id, target, st) {
                        return Some(r && running);
                    }
                }
            }
            None
        }
        go(&self.blueprint.root, &mut 0, target, &self.statuses).unwrap_or(false)
    }

    /// Subtask index of the Running action, if any (the switching signal).
    pub fn switching_signal(&self) -> Option<usize> {
        let actions = action_index(&self.blueprint.root);
        self.active.iter().next().map(|id| actions[id].subtask)
    }

    /// Status of each node on the last tick, in pre-order; `None` if not ticked.
    pub fn node_statuses(&self) -> &[Option<TickStatus>] {
        &self.statuses
    }

    /// One letter per top-level child (`S`, `F`, `R`, `-` for not ticked).
    pub fn summary(&self) -> String {
        let (BtNode::Sequence { children } | BtNode::Fallback { children } | BtNode::Parallel { children, .. }) =
            &self.blueprint.root
        else {
            return self.statuses[0].map_or('-', TickStatus::letter).to_string();
        };
        let mut id = 1;
        let mut out = String::with_capacity(children.len());
        for c in children {
            out.push(self.statuses[id].map_or('-', TickStatus::letter));
            id += count(c);
        }
        out
    }
}

struct Walk<'a> {
    symbols: &'a std::collections::BTreeMap<String, ConditionExpr>,
    statuses: &'a mut Vec<Option<TickStatus>>,
    next: usize,
    running: Vec<usize>,
    finished: Vec<usize>,
}

impl Walk<'_> {
    fn node<C: BtContext>(&mut self, n: &BtNode, ctx: &mut C, ticked: bool) -> Result<TickStatus, BtFault> {
        let me = self.next;
        self.next += 1;
        if !ticked {
            // keep pre-order numbering aligned for skipped subtrees
            if let BtNode::Sequence { children } | BtNode::Fallback { children } | BtNode::Parallel { children, .. } = n {
                for c in children {
                    self.node(c, ctx, false)?;
                }
            }
            return Ok(TickStatus::Failure);
        }
        let status = match n {
            BtNode::Sequence { children } => self.ordered(children, ctx, TickStatus::Success)?,
            BtNode::Fallback { children } => self.ordered(children, ctx, TickStatus::Failure)?,
            BtNode::Parallel { success_threshold, failure_threshold, children } => {
                let (mut s, mut f) = (0, 0);
                for c in children {
                    match self.node(c, ctx, true)? {
                        TickStatus::Success => s += 1,
                        TickStatus::Failure => f += 1,
                        TickStatus::Running => {}
                    }
                }
                if f > *failure_threshold {
                    TickStatus::Failure
                } else if s >= *success_threshold {
                    TickStatus::Success
                } else {
                    TickStatus::Running
                }
            }
            BtNode::Condition { id } => {
                if self.resolve(id, ctx)? { TickStatus::Success } else { TickStatus::Failure }
            }
            BtNode::Action(a) => {
                let s = ctx.tick_action(a)?;
                if s == TickStatus::Running {
                    self.running.push(me);
                } else {
                    self.finished.push(me);
                }
                s
            }
        };
        self.statuses[me] = Some(status);
        Ok(status)
    }

    /// Sequence (`pass` = Success) or Fallback (`pass` = Failure): tick in
    /// order until a child returns something other than `pass`.
    fn ordered<C: BtContext>(&mut self, children: &[BtNode], ctx: &mut C, pass: TickStatus) -> Result<TickStatus, BtFault> {
        let mut result = pass;
        for c in children {
            if result != pass {
                self.node(c, ctx, false)?;
                continue;
            }
            result = self.node(c, ctx, true)?;
        }
        Ok(result)
    }

    fn resolve<C: BtContext>(&mut self, id: &str, ctx: &mut C) -> Result<bool, BtFault> {
        let expr = self.symbols.get(id).ok_or_else(|| BtFault::UnknownCondition(id.to_owned()))?;
        match expr {
            ConditionExpr::True => Ok(true),
            ConditionExpr::AnyOf { ids } => {
                for i in ids {
                    if self.resolve(i, ctx)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            other => ctx.condition(id, other),
        }
    }
}

fn count(n: &BtNode) -> usize {
    match n {
        BtNode::Sequence { children } | BtNode::Fallback { children } | BtNode::Parallel { children, .. } => {
            1 + children.iter().map(count).sum::<usize>()
        }
        _ => 1,
    }
}

fn action_index(root: &BtNode) -> std::collections::BTreeMap<usize, &ActionNode> {
    fn go<'a>(n: &'a BtNode, id: &mut usize, out: &mut std::collections::BTreeMap<usize, &'a ActionNode>) {
        let me = *id;
        *id += 1;
        match n {
            BtNode::Sequence { children } | BtNode::Fallback { children } | BtNode::Parallel { children, .. } => {
                children.iter().for_each(|c| go(c, id, out))
            }
            BtNode::Action(a) => {
                out.insert(me, a);
            }
            BtNode::Condition { .. } => {}
        }
    }
    let mut out = std::collections::BTreeMap::new();
    go(root, &mut 0, &mut out);
    out
}

fn validate(bp: &BtBlueprint) -> Result<(), BtFault> {
    let subtasks: BTreeSet<usize> = bp.actions().iter().map(|a| a.subtask).collect();
    fn check(id: &str, bp: &BtBlueprint, subtasks: &BTreeSet<usize>, depth: usize) -> Result<(), BtFault> {
        let expr = bp.symbols.get(id).ok_or_else(|| BtFault::UnknownCondition(id.to_owned()))?;
        match expr {
            ConditionExpr::AnyOf { ids } if depth < 16 => {
                ids.iter().try_for_each(|i| check(i, bp, subtasks, depth + 1))
            }
            ConditionExpr::AnyOf { .. } => Err(BtFault::Unresolvable { id: id.to_owned(), reason: "alias cycle".into() }),
            ConditionExpr::Monitor { subtask } if !subtasks.contains(subtask) => Err(BtFault::UnknownMonitor(*subtask)),
            _ => Ok(()),
        }
    }
    fn walk(n: &BtNode, bp: &BtBlueprint, subtasks: &BTreeSet<usize>) -> Result<(), BtFault> {
        match n {
            BtNode::Sequence { children } | BtNode::Fallback { children } | BtNode::Parallel { children, .. } => {
                children.iter().try_for_each(|c| walk(c, bp, subtasks))
            }
            BtNode::Condition { id } => check(id, bp, subtasks, 0),
            BtNode::Action(a) => check(&a.post, bp, subtasks, 0),
        }
    }
    walk(&bp.root, bp, &subtasks)
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Failure,
    TimedOut,
    Fault(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub epsilon: Option<usize>,
    pub status: TickStatus,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<TickRecord>,
    pub outcome: Outcome,
}

impl RunLog {
    /// ε per tick with consecutive repeats and idle ticks collapsed.
    pub fn epsilon_sequence(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for e in self.records.iter().filter_map(|r| r.epsilon) {
            if out.last() != Some(&e) {
                out.push(e);
            }
        }
        out
    }
}

/// Ticks until the root settles and `keep_going` declines another tick, or
/// until `max_ticks`. `keep_going` runs after every tick and is where a
/// simulator applies commands, disturbances and logging.
pub fn run_to_completion<C, K>(inst: &mut BtInstance, ctx: &mut C, max_ticks: usize, mut keep_going: K) -> RunLog
where
    C: BtContext,
    K: FnMut(&mut C, &TickRecord) -> bool,
{
    let mut records = Vec::new();
    for tick in 0..max_ticks {
        let status = match inst.tick(ctx) {
            Ok(s) => s,
            Err(e) => return RunLog { records, outcome: Outcome::Fault(e.to_string()) },
        };
        let rec = TickRecord { tick, epsilon: inst.switching_signal(), status, summary: inst.summary() };
        let more = keep_going(ctx, &rec);
        records.push(rec);
        if status != TickStatus::Running && !more {
            let outcome = if status == TickStatus::Success { Outcome::Success } else { Outcome::Failure };
            return RunLog { records, outcome };
        }
    }
    RunLog { records, outcome: Outcome::TimedOut }
}
