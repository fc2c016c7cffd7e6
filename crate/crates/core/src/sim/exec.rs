//! Tick loop: the behaviour tree decides which action commands the
//! end-effector, each action replays its planned rollout one sample per
//! tick, and scripted disturbances mutate the world in between.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::plan::{apply_effects, plan_action, ActionPlan, TaskPlan};
use super::scenario::{Mutation, Scenario, Trigger};
use super::skill::SkillBundle;
use super::world::WorldState;
use super::{SimError, SCHEMA_VERSION};
use crate::bt::{run_to_completion, BtContext, BtFault, BtInstance, Outcome, TickStatus};
use crate::stl::{first_difference, prefix_verdict, robustness, SignalTrace, Verdict};
use crate::task::{ActionNode, ConditionExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Action starts executing a plan (first tick commands sample 1).
    Start,
    Replan,
    MonitorViolated,
    Completed,
    Failed,
    Halted,
    Disturbance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: usize,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<usize>,
    pub detail: String,
}

/// World state after a tick. Row 0 is the state before the first tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub tick: usize,
    /// Subtask whose action commanded this tick's pose.
    pub epsilon: Option<usize>,
    /// Rollout sample commanded this tick.
    pub progress: Option<usize>,
    pub status: Option<TickStatus>,
    pub summary: String,
    pub channels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub schema_version: u32,
    pub scenario: String,
    pub dt: f64,
    pub channel_names: Vec<String>,
    pub rows: Vec<LogRow>,
    pub events: Vec<Event>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub outcome: Outcome,
    pub ticks: usize,
    pub epsilon_sequence: Vec<usize>,
    pub replans: usize,
    pub events: Vec<Event>,
}

impl ExecutionLog {
    /// ε over ticks with repeats collapsed.
    pub fn epsilon_sequence(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for e in self.rows.iter().filter_map(|r| r.epsilon) {
            if out.last() != Some(&e) {
                out.push(e);
            }
        }
        out
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            schema_version: SCHEMA_VERSION,
            scenario: self.scenario.clone(),
            outcome: self.outcome.clone(),
            ticks: self.rows.len().saturating_sub(1),
            epsilon_sequence: self.epsilon_sequence(),
            replans: self.events.iter().filter(|e| e.kind == EventKind::Replan).count(),
            events: self.events.clone(),
        }
    }

    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.channel_names.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.channels[i]).collect())
    }

    /// Numeric trace of every row: world and predicate channels plus
    /// `epsilon` (-1 when idle) and `progress`.
    pub fn trace(&self) -> Result<SignalTrace, SimError> {
        let mut tr = SignalTrace::new(self.dt, self.rows.len())?;
        tr.insert("epsilon", self.rows.iter().map(|r| r.epsilon.map_or(-1.0, |e| e as f64)).collect())?;
        tr.insert("progress", self.rows.iter().map(|r| r.progress.map_or(-1.0, |e| e as f64)).collect())?;
        for (i, name) in self.channel_names.iter().enumerate() {
            tr.insert(name.clone(), self.rows.iter().map(|r| r.channels[i]).collect())?;
        }
        Ok(tr)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| SimError::Scenario(format!("writing log: {e}"));
        let mut header: Vec<String> = ["tick", "time", "epsilon", "progress", "status", "summary"].map(String::from).to_vec();
        header.extend(self.channel_names.iter().cloned());
        wtr.write_record(&header).map_err(io)?;
        for r in &self.rows {
            let mut rec = vec![
                r.tick.to_string(),
                format!("{}", r.tick as f64 * self.dt),
                r.epsilon.map_or(String::new(), |e| (e + 1).to_string()),
                r.progress.map_or(String::new(), |k| k.to_string()),
                r.status.map_or("init".into(), |s| s.to_string()),
                r.summary.clone(),
            ];
            rec.extend(r.channels.iter().map(|v| format!("{v}")));
            wtr.write_record(&rec).map_err(io)?;
        }
        wtr.flush().map_err(|e| SimError::Scenario(format!("writing log: {e}")))
    }
}

#[derive(Debug, Default)]
struct ActionState {
    progress: Option<usize>,
    prefix: Vec<([f64; 3], [f64; 4])>,
    replanned: bool,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    skills: &'a BTreeMap<String, SkillBundle>,
    world: WorldState,
    plans: Vec<Option<ActionPlan>>,
    state: Vec<ActionState>,
    events: Vec<Event>,
    tick: usize,
    commanded: Option<(usize, usize)>,
    /// Tick at which each disturbance fires, once known.
    schedule: Vec<Option<usize>>,
    fired: Vec<bool>,
    fault: Option<String>,
}

impl Sim<'_> {
    fn event(&mut self, kind: EventKind, subtask: Option<usize>, detail: impl Into<String>) {
        let detail = detail.into();
        log::debug!("tick {}: {kind:?} {subtask:?} {detail}", self.tick);
        self.events.push(Event { tick: self.tick, kind, subtask, detail });
    }

    fn name(&self, i: usize) -> &str {
        &self.scenario.task.subtasks[i].name
    }

    fn action(&self, i: usize) -> &ActionNode {
        self.scenario.blueprint.actions().into_iter().find(|a| a.subtask == i).expect("validated")
    }

    fn replan(&mut self, i: usize, why: &str) -> Result<(), BtFault> {
        let action = self.action(i).clone();
        let bundle = self.skills.get(&action.spec.skill).ok_or_else(|| BtFault::Action(format!("skill `{}` not learned", action.spec.skill)))?;
        let plan = plan_action(bundle, &action, &self.world, &self.scenario.spec.optimizer)
            .map_err(|e| BtFault::Action(format!("planning `{}`: {e}", action.name)))?;
        let detail = format!("{why}; robustness {:.4e} ({:?})", plan.robustness, plan.status);
        self.plans[i] = Some(plan);
        self.event(EventKind::Replan, Some(i), detail);
        Ok(())
    }

    /// Signed margin of a symbol-table entry.
    fn margin(&self, expr: &ConditionExpr) -> Result<f64, SimError> {
        Ok(match expr {
            ConditionExpr::True => f64::INFINITY,
            ConditionExpr::Symbol(sym) => {
                let m = self.world.margin(&self.scenario.predicate(&sym.id())?)?;
                if sym.negated { -m } else { m }
            }
            ConditionExpr::Stl { formula } => self.world.formula_margin(formula)?,
            ConditionExpr::AnyOf { ids } => {
                let mut best = f64::NEG_INFINITY;
                for id in ids {
                    let e = self.scenario.blueprint.symbols.get(id).ok_or_else(|| SimError::Scenario(format!("unknown condition `{id}`")))?;
                    best = best.max(self.margin(e)?);
                }
                best
            }
            ConditionExpr::Monitor { .. } => f64::NAN,
        })
    }

    fn holds(&self, id: &str) -> Result<bool, BtFault> {
        let expr = self.scenario.blueprint.symbols.get(id).ok_or_else(|| BtFault::UnknownCondition(id.to_owned()))?;
        self.margin(expr)
            .map(|m| m > 0.0)
            .map_err(|e| BtFault::Unresolvable { id: id.to_owned(), reason: e.to_string() })
    }

    fn prefix_trace(&self, i: usize) -> Result<SignalTrace, SimError> {
        let prefix = &self.state[i].prefix;
        let mut tr = SignalTrace::new(self.scenario.spec.dt, prefix.len())?;
        for (d, a) in ["x", "y", "z"].iter().enumerate() {
            let y: Vec<f64> = prefix.iter().map(|p| p.0[d]).collect();
            tr.insert(format!("vel.{a}"), first_difference(&y, self.scenario.spec.dt))?;
            tr.insert(format!("y.{a}"), y)?;
        }
        for (d, a) in ["w", "x", "y", "z"].iter().enumerate() {
            let q: Vec<f64> = prefix.iter().map(|p| p.1[d]).collect();
            tr.insert(format!("qvel.{a}"), first_difference(&q, self.scenario.spec.dt))?;
            tr.insert(format!("q.{a}"), q)?;
        }
        Ok(tr)
    }

    fn constraint_now(&self, i: usize) -> Result<crate::stl::Formula, SimError> {
        Ok(self.action(i).constraint.bind(&self.world.points())?)
    }

    fn monitor(&mut self, i: usize) -> Result<bool, BtFault> {
        if self.state[i].progress.is_none() {
            return Ok(true);
        }
        let fault = |e: SimError| BtFault::Action(e.to_string());
        let f = self.constraint_now(i).map_err(fault)?;
        let verdict = prefix_verdict(&f, &self.prefix_trace(i).map_err(fault)?, 0).map_err(|e| fault(e.into()))?;
        if verdict != Verdict::Violated {
            return Ok(true);
        }
        let name = self.name(i).to_owned();
        self.event(EventKind::MonitorViolated, Some(i), format!("`{f}` violated on the executed prefix of `{name}`"));
        if self.state[i].replanned {
            return Ok(false);
        }
        // one re-optimization from where we are, then give up
        self.replan(i, "monitor violation")?;
        let here = (self.world.ee.position, self.world.ee.orientation);
        let s = &mut self.state[i];
        s.replanned = true;
        s.progress = Some(0);
        s.prefix = vec![here];
        self.event(EventKind::Start, Some(i), "restart");
        Ok(true)
    }

    fn apply(&mut self, m: &Mutation) -> Result<(), SimError> {
        match m {
            Mutation::Teleport { object, position } => {
                if self.world.holding() == Some(object.as_str()) {
                    self.world.release();
                }
                let o = self.world.objects.get_mut(object).ok_or_else(|| SimError::UnknownEntity(object.clone()))?;
                o.position = *position;
            }
            Mutation::PushEe { offset } => {
                let p = self.world.ee.position;
                let q = self.world.ee.orientation;
                self.world.command(std::array::from_fn(|d| p[d] + offset[d]), q);
            }
            Mutation::MoveRegion { region, center } => {
                let r = self.world.regions.get_mut(region).ok_or_else(|| SimError::UnknownEntity(region.clone()))?;
                r.center = *center;
            }
        }
        Ok(())
    }

    /// Applies what is due now; true if anything fired.
    fn disturb(&mut self) -> bool {
        let mut any = false;
        for k in 0..self.schedule.len() {
            if !self.fired[k] && self.schedule[k] == Some(self.tick) {
                self.fired[k] = true;
                let m = self.scenario.spec.disturbances[k].mutation.clone();
                if let Err(e) = self.apply(&m) {
                    self.fault = Some(e.to_string());
                }
                self.event(EventKind::Disturbance, None, format!("{m:?}"));
                any = true;
            }
        }
        any
    }

    fn schedule_after(&mut self, name: &str) {
        for (k, d) in self.scenario.spec.disturbances.iter().enumerate() {
            if let Trigger::AfterSuccess { subtask, delay } = &d.when {
                if subtask == name && self.schedule[k].is_none() {
                    self.schedule[k] = Some(self.tick + delay);
                }
            }
        }
    }

    fn pending(&self) -> bool {
        (0..self.schedule.len()).any(|k| !self.fired[k] && self.schedule[k].is_some())
    }

    fn channel_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.world.channels().into_iter().map(|(n, _)| n).collect();
        names.extend(self.predicate_ids().into_iter().map(|id| format!("pred.{}", id.replace(':', "_"))));
        names
    }

    fn predicate_ids(&self) -> Vec<String> {
        self.scenario
            .blueprint
            .symbols
            .iter()
            .filter(|(_, e)| !matches!(e, ConditionExpr::Monitor { .. }))
            .map(|(k, _)| k.clone())
            .collect()
    }

    fn row(&self, status: Option<TickStatus>, summary: String) -> Result<LogRow, SimError> {
        let mut channels: Vec<f64> = self.world.channels().into_iter().map(|(_, v)| v).collect();
        for id in self.predicate_ids() {
            channels.push(self.margin(&self.scenario.blueprint.symbols[&id])?);
        }
        Ok(LogRow {
            tick: self.tick,
            epsilon: self.commanded.map(|c| c.0),
            progress: self.commanded.map(|c| c.1),
            status,
            summary,
            channels,
        })
    }
}

impl BtContext for Sim<'_> {
    fn condition(&mut self, id: &str, expr: &ConditionExpr) -> Result<bool, BtFault> {
        if let Some(f) = &self.fault {
            return Err(BtFault::Action(f.clone()));
        }
        match expr {
            ConditionExpr::Monitor { subtask } => self.monitor(*subtask),
            _ => self.holds(id),
        }
    }

    fn tick_action(&mut self, a: &ActionNode) -> Result<TickStatus, BtFault> {
        let i = a.subtask;
        if self.state[i].progress.is_none() {
            let valid = self.plans[i].as_ref().is_some_and(|p| p.valid_for(a, &self.world));
            if !valid {
                let why = if self.plans[i].is_some() { "world changed since planning" } else { "no plan" };
                self.replan(i, why)?;
            }
            let here = (self.world.ee.position, self.world.ee.orientation);
            let s = &mut self.state[i];
            s.progress = Some(0);
            s.prefix = vec![here];
            s.replanned = false;
            self.event(EventKind::Start, Some(i), "enter");
        }
        let plan = self.plans[i].as_ref().expect("planned above");
        let k = self.state[i].progress.expect("started");
        if k + 1 < plan.len() {
            let (p, q) = plan.pose(k + 1);
            self.world.command(p, q);
            self.state[i].prefix.push((p, q));
            self.state[i].progress = Some(k + 1);
            self.commanded = Some((i, k + 1));
            return Ok(TickStatus::Running);
        }
        // every sample has been commanded: settle the outcome without moving
        self.state[i].progress = None;
        let fault = |e: SimError| BtFault::Action(e.to_string());
        let f = self.constraint_now(i).map_err(fault)?;
        let rho = robustness(&f, &self.prefix_trace(i).map_err(fault)?, 0).map_err(|e| fault(e.into()))?;
        let grasped = apply_effects(a, &mut self.world).map_err(fault)?;
        let post = self.holds(&a.post)?;
        let failure = if rho < 0.0 {
            Some(format!("constraint robustness {rho:.4e} on the executed motion"))
        } else if !grasped {
            Some("grasp missed".to_owned())
        } else if !post {
            Some(format!("post-condition `{}` false", a.post))
        } else {
            None
        };
        if let Some(why) = failure {
            self.event(EventKind::Failed, Some(i), why);
            return Ok(TickStatus::Failure);
        }
        self.event(EventKind::Completed, Some(i), format!("robustness {rho:.4e}"));
        self.schedule_after(&a.name.clone());
        Ok(TickStatus::Success)
    }

    fn halt_action(&mut self, a: &ActionNode) {
        let i = a.subtask;
        self.state[i].progress = None;
        let name = self.name(i).to_owned();
        // preempted because its own goal already holds: that is a completion
        if self.holds(&a.post).unwrap_or(false) {
            self.event(EventKind::Completed, Some(i), format!("`{name}` reached its post-condition early"));
            self.schedule_after(&name);
        } else {
            self.event(EventKind::Halted, Some(i), format!("`{name}` preempted"));
        }
    }
}

/// Runs the scenario from its initial world. `plan` holds the offline
/// plans; actions re-plan whenever theirs no longer fits the world.
pub fn execute(
    scenario: &Scenario,
    skills: &BTreeMap<String, SkillBundle>,
    plan: Option<&TaskPlan>,
) -> Result<ExecutionLog, SimError> {
    let n = scenario.task.len();
    for a in scenario.blueprint.actions() {
        let b = skills.get(&a.spec.skill).ok_or_else(|| SimError::UnknownSkill(a.spec.skill.clone()))?;
        let dt = b.model.params.dt;
        if ((dt - scenario.spec.dt) / scenario.spec.dt).abs() > 1e-9 {
            return Err(SimError::Scenario(format!(
                "skill `{}` has dt {dt}, scenario control period is {}",
                a.spec.skill, scenario.spec.dt
            )));
        }
    }
    let mut plans = vec![None; n];
    if let Some(p) = plan {
        for a in &p.actions {
            if a.subtask < n {
                plans[a.subtask] = Some(a.clone());
            }
        }
    }
    let disturbances = &scenario.spec.disturbances;
    let mut sim = Sim {
        scenario,
        skills,
        world: scenario.spec.world.clone(),
        plans,
        state: (0..n).map(|_| ActionState::default()).collect(),
        events: Vec::new(),
        tick: 0,
        commanded: None,
        schedule: disturbances.iter().map(|d| match d.when { Trigger::Tick(t) => Some(t), _ => None }).collect(),
        fired: vec![false; disturbances.len()],
        fault: None,
    };
    let mut inst = BtInstance::new(scenario.blueprint.clone()).map_err(|e| SimError::Scenario(e.to_string()))?;
    let channel_names = sim.channel_names();
    sim.disturb();
    let mut rows = vec![sim.row(None, "-".repeat(n))?];
    sim.tick = 1;
    let log = run_to_completion(&mut inst, &mut sim, scenario.spec.max_ticks, |sim, rec| {
        let fired = sim.disturb();
        match sim.row(Some(rec.status), rec.summary.clone()) {
            Ok(r) => rows.push(r),
            Err(e) => sim.fault = Some(e.to_string()),
        }
        sim.commanded = None;
        sim.tick += 1;
        // a fresh disturbance gets at least one tick to be noticed
        (fired || sim.pending()) && sim.fault.is_none()
    });
    let outcome = match sim.fault.take() {
        Some(f) => Outcome::Fault(f),
        None => log.outcome,
    };
    Ok(ExecutionLog {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.spec.name.clone(),
        dt: scenario.spec.dt,
        channel_names,
        rows,
        events: sim.events,
        outcome,
    })
}
