//! Kinematic simulation of task execution: scenarios, per-action motion
//! planning under each action's constraint, the tick loop with scripted
//! disturbances, and post-hoc evaluation of the executed log.

mod eval;
mod exec;
mod plan;
mod scenario;
mod skill;
mod world;

pub use eval::{evaluate, Evaluation, SubtaskEvaluation};
pub use exec::{execute, Event, EventKind, ExecutionLog, LogRow, RunSummary};
pub use plan::{apply_effects, plan_action, plan_task, ActionPlan, TaskPlan};
pub use scenario::{Disturbance, Mutation, Scenario, ScenarioSpec, Trigger};
pub use skill::{learn_skill, LearnConfig, SkillBundle};
pub use world::{builtin, PredicateDef, Pose, Region, WorldState, AT_TOLERANCE, BOOL_MARGIN, GRASP_TOLERANCE};

use thiserror::Error;

use crate::dmp::DmpError;
use crate::opt::OptError;
use crate::stats::StatsError;
use crate::stl::StlError;
use crate::task::TaskError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("no skill `{0}` has been learned")]
    UnknownSkill(String),
    #[error("schema version {found} not supported (expected {expected})")]
    Schema { found: u64, expected: u32 },
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Opt(#[from] OptError),
}

pub fn check_schema(v: &serde_json::Value, expected: u32) -> Result<(), SimError> {
    match v.get("schema_version").and_then(|s| s.as_u64()) {
        Some(found) if found == expected as u64 => Ok(()),
        Some(found) => Err(SimError::Schema { found, expected }),
        None => Err(SimError::Scenario("missing schema_version".into())),
    }
}

pub(crate) fn read(path: &std::path::Path) -> Result<String, SimError> {
    std::fs::read_to_string(path).map_err(|source| SimError::File { path: path.display().to_string(), source })
}
