use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::world::{builtin, PredicateDef, WorldState};
use super::{check_schema, read, LearnConfig, SimError, SCHEMA_VERSION};
use crate::dmp::{load_demo_file, Demo};
use crate::opt::OptConfig;
use crate::task::{abstract_to_ltl, ltl_to_bt, parse_task, BtBlueprint, ConditionExpr, TaskSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Tick(usize),
    /// `delay` ticks after the named subtask's action first completes.
    AfterSuccess { subtask: String, #[serde(default)] delay: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mutation {
    /// Moves an object; a held object is knocked out of the gripper.
    Teleport { object: String, position: [f64; 3] },
    PushEe { offset: [f64; 3] },
    MoveRegion { region: String, center: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub when: Trigger,
    pub mutation: Mutation,
}

fn default_max_ticks() -> usize {
    3000
}

fn default_dt() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    pub name: String,
    /// Task file, relative to the scenario file.
    pub task: String,
    /// Skill id to demonstration CSVs, relative to the scenario file.
    pub skills: BTreeMap<String, Vec<String>>,
    pub world: WorldState,
    #[serde(default)]
    pub predicates: BTreeMap<String, PredicateDef>,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptConfig,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: usize,
    /// Control period: one DMP sample per tick.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

/// A validated scenario with its task compiled.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub dir: PathBuf,
    pub task: TaskSpec,
    pub blueprint: BtBlueprint,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let v: serde_json::Value = serde_json::from_str(&read(path)?)?;
        check_schema(&v, SCHEMA_VERSION)?;
        let spec: ScenarioSpec = serde_json::from_value(v)?;
        Self::from_spec(spec, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_spec(spec: ScenarioSpec, dir: &Path) -> Result<Self, SimError> {
        spec.world.validate()?;
        let task = parse_task(&read(&dir.join(&spec.task))?)?;
        for files in spec.skills.values() {
            for f in files {
                if !dir.join(f).is_file() {
                    return Err(SimError::Scenario(format!("demonstration `{f}` does not exist")));
                }
            }
        }
        let blueprint = ltl_to_bt(&abstract_to_ltl(&task))?;
        let s = Self { spec, dir: dir.to_owned(), task, blueprint };
        let w = &s.spec.world;
        for a in s.blueprint.actions() {
            if !s.spec.skills.contains_key(&a.spec.skill) {
                return Err(SimError::UnknownSkill(a.spec.skill.clone()));
            }
            w.resolve(&a.spec.init)?;
            w.resolve(&a.spec.goal)?;
            if let Some(o) = &a.spec.object {
                if !w.objects.contains_key(o) {
                    return Err(SimError::UnknownEntity(o.clone()));
                }
            }
            for p in a.constraint.unbound_points() {
                w.entity(&p)?;
            }
        }
        for (id, expr) in &s.blueprint.symbols {
            match expr {
                ConditionExpr::Symbol(sym) => {
                    let def = s
                        .predicate(&sym.id())
                        .map_err(|_| SimError::Scenario(format!("`{id}`: predicate `{}` is not defined", sym.id())))?;
                    match &def {
                        PredicateDef::Held { object } => {
                            w.objects.get(object).ok_or_else(|| SimError::UnknownEntity(object.clone()))?;
                        }
                        PredicateDef::At { object, target, .. }
                        | PredicateDef::Placed { object, target, .. }
                        | PredicateDef::Above { object, target, .. } => {
                            w.objects.get(object).ok_or_else(|| SimError::UnknownEntity(object.clone()))?;
                            w.resolve(target)?;
                        }
                        PredicateDef::Empty | PredicateDef::Stl { .. } => {}
                    }
                }
                ConditionExpr::Stl { formula } if formula.horizon() > 0 => {
                    return Err(SimError::Scenario(format!("`{id}`: world condition must be instantaneous")));
                }
                _ => {}
            }
        }
        for d in &s.spec.disturbances {
            if let Trigger::AfterSuccess { subtask, .. } = &d.when {
                if !s.task.subtasks.iter().any(|t| &t.name == subtask) {
                    return Err(SimError::Scenario(format!("disturbance waits for unknown subtask `{subtask}`")));
                }
            }
        }
        Ok(s)
    }

    /// Scenario table first, then the built-in predicates.
    pub fn predicate(&self, id: &str) -> Result<PredicateDef, SimError> {
        if let Some(p) = self.spec.predicates.get(id) {
            return Ok(p.clone());
        }
        let sym = crate::task::Condition::parse(id)
            .ok()
            .and_then(|c| match c {
                crate::task::Condition::Symbol(s) => Some(s),
                _ => None,
            })
            .ok_or_else(|| SimError::Scenario(format!("predicate `{id}` is not defined")))?;
        builtin(&sym).ok_or_else(|| SimError::Scenario(format!("predicate `{id}` is not defined")))
    }

    /// Learns every skill the scenario names, seeded by the scenario seed.
    pub fn learn_skills(&self) -> Result<BTreeMap<String, super::SkillBundle>, SimError> {
        let mut cfg = self.spec.learn.clone();
        cfg.gmm.seed = self.spec.seed;
        self.spec
            .skills
            .keys()
            .map(|k| Ok((k.clone(), super::learn_skill(k, &self.demos(k)?, &cfg)?)))
            .collect()
    }

    pub fn demos(&self, skill: &str) -> Result<Vec<Demo>, SimError> {
        let files = self.spec.skills.get(skill).ok_or_else(|| SimError::UnknownSkill(skill.to_owned()))?;
        files
            .iter()
            .map(|f| {
                let p = self.dir.join(f);
                load_demo_file(&p).map_err(|e| SimError::Scenario(format!("{}: {e}", p.display())))
            })
            .collect()
    }
}
