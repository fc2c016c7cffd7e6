//! Motion planning for action nodes: bind the action's endpoints and the
//! named points of its constraint in the current world, then optimize the
//! skill's forcing term under that constraint.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::skill::SkillBundle;
use super::world::WorldState;
use super::SimError;
use crate::dmp::{Forcing, QuatDmpModel};
use crate::opt::{lenient_f64, optimize, OptConfig, OptReport, OptimizationProblem, OrientationPart, Status};
use crate::stl::parse;
use crate::task::{ActionNode, Binding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub subtask: usize,
    pub name: String,
    pub skill: String,
    pub y_init: [f64; 3],
    pub y_goal: [f64; 3],
    pub q_init: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_goal: Option<[f64; 4]>,
    /// World positions substituted for the constraint's named points.
    pub bindings: BTreeMap<String, [f64; 3]>,
    /// The constraint with its points bound, as optimized.
    pub constraint: String,
    pub status: Status,
    #[serde(with = "lenient_f64")]
    pub robustness: f64,
    pub positions: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientations: Option<Vec<[f64; 4]>>,
    pub f_opt: Forcing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fq_opt: Option<Forcing>,
    pub report: OptReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub schema_version: u32,
    pub scenario: String,
    pub actions: Vec<ActionPlan>,
}

/// Endpoints and point bindings an action would be planned with in `world`.
fn setup(action: &ActionNode, world: &WorldState) -> Result<([f64; 3], [f64; 3], BTreeMap<String, [f64; 3]>), SimError> {
    // execution always starts where the end-effector is
    let y_init = world.ee.position;
    let y_goal = world.resolve(&action.spec.goal)?;
    let mut bindings = BTreeMap::new();
    for name in action.constraint.unbound_points() {
        bindings.insert(name.clone(), world.entity(&name)?);
    }
    Ok((y_init, y_goal, bindings))
}

pub fn plan_action(
    bundle: &SkillBundle,
    action: &ActionNode,
    world: &WorldState,
    config: &OptConfig,
) -> Result<ActionPlan, SimError> {
    let (y_init, y_goal, bindings) = setup(action, world)?;
    let constraint = action.constraint.bind(&bindings)?;
    let mut problem = OptimizationProblem::new(bundle.model.clone(), constraint.clone(), config.clone());
    problem.weights = bundle.weights.clone();
    problem.y_init = y_init;
    problem.y_goal = y_goal;
    let q_init = world.ee.orientation;
    if let Some(q_goal) = action.spec.orientation {
        let n = bundle.samples();
        let model = match &bundle.orientation {
            Some(m) => m.clone(),
            None => QuatDmpModel { dt: bundle.model.params.dt, ..QuatDmpModel::new(q_init, q_goal, n) },
        };
        problem.orientation = Some(OrientationPart { f_lrn: model.forcing.clone(), model, q_init, q_goal });
    }
    let result = optimize(&problem)?;
    if result.status != Status::Satisfied {
        log::warn!(
            "action `{}`: constraint `{constraint}` not met (robustness {:.4e})",
            action.name,
            result.robustness_exact
        );
    }
    let positions = problem.model.positions(&result.f_opt, y_init, y_goal)?;
    let orientations = match (&problem.orientation, &result.fq_opt) {
        (Some(o), Some(fq)) => Some(o.model.orientations_with(fq, o.q_init, o.q_goal)?),
        _ => None,
    };
    Ok(ActionPlan {
        subtask: action.subtask,
        name: action.name.clone(),
        skill: action.spec.skill.clone(),
        y_init,
        y_goal,
        q_init,
        q_goal: action.spec.orientation,
        bindings,
        constraint: constraint.to_string(),
        status: result.status,
        robustness: result.robustness_exact,
        positions,
        orientations,
        report: result.report(&problem),
        f_opt: result.f_opt,
        fq_opt: result.fq_opt,
    })
}

impl ActionPlan {
    /// True when planning `action` in `world` now would pose the same problem.
    pub fn valid_for(&self, action: &ActionNode, world: &WorldState) -> bool {
        match setup(action, world) {
            Ok((y_init, y_goal, bindings)) => {
                y_init == self.y_init
                    && y_goal == self.y_goal
                    && bindings == self.bindings
                    && (self.q_goal.is_none() || world.ee.orientation == self.q_init)
            }
            Err(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Commanded pose of sample `k`; orientation is held when not planned.
    pub fn pose(&self, k: usize) -> ([f64; 3], [f64; 4]) {
        let q = self.orientations.as_ref().map_or(self.q_init, |o| o[k]);
        (self.positions[k], q)
    }

    pub fn bound_constraint(&self) -> Result<crate::stl::Formula, SimError> {
        Ok(parse(&self.constraint)?)
    }
}

/// Object the action grasps: explicit, or its goal when that is an object.
pub(crate) fn grasp_target(action: &ActionNode, world: &WorldState) -> Option<String> {
    if !action.spec.grasp {
        return None;
    }
    action.spec.object.clone().or_else(|| match &action.spec.goal {
        Binding::Named(n) | Binding::Offset { at: n, .. } if world.objects.contains_key(n) => Some(n.clone()),
        _ => None,
    })
}

/// Grasp or release on completion. Returns false if a grasp missed.
pub fn apply_effects(action: &ActionNode, world: &mut WorldState) -> Result<bool, SimError> {
    if action.spec.release {
        world.release();
    }
    match grasp_target(action, world) {
        Some(o) => world.grasp(&o),
        None => Ok(true),
    }
}

/// Plans every action in order against the world its predecessors leave
/// behind when executed as planned.
pub fn plan_task(
    scenario: &super::Scenario,
    skills: &BTreeMap<String, SkillBundle>,
) -> Result<TaskPlan, SimError> {
    let mut world = scenario.spec.world.clone();
    let mut actions = Vec::new();
    for a in scenario.blueprint.actions() {
        let bundle = skills.get(&a.spec.skill).ok_or_else(|| SimError::UnknownSkill(a.spec.skill.clone()))?;
        let plan = plan_action(bundle, a, &world, &scenario.spec.optimizer)?;
        let (p, q) = plan.pose(plan.len() - 1);
        world.command(p, q);
        apply_effects(a, &mut world)?;
        actions.push(plan);
    }
    Ok(TaskPlan { schema_version: super::SCHEMA_VERSION, scenario: scenario.spec.name.clone(), actions })
}
