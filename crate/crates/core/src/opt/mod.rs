//! Forcing-term optimisation under an STL constraint.
//!
//! Minimises `lambda1 * max(0, margin - smooth_rho) + lambda2 * J_dmp` over
//! `dF = F - F_lrn`, where `J_dmp` is the weighted forcing distance (or, for
//! comparison, the distance between rolled-out trajectories).

mod objective;
mod optimizer;
pub mod table2;

pub mod lenient_f64;

pub use objective::{
    objective_dmp, objective_stl, objective_stl_grad, objective_trajectory, Candidate, OrientationPart,
};
pub use optimizer::optimize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmp::{DmpError, DmpModel, Forcing};
use crate::stl::{Formula, SignalTrace, StlError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum OptError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Stl(#[from] StlError),
}

/// Which similarity term accompanies the constraint penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmpObjective {
    /// `|| W (F - F_lrn) ||_2`
    #[default]
    Forcing,
    /// `|| y(F) - y(F_lrn) ||_2`, the trajectory-space alternative.
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub temperature: f64,
    pub anneal_every: usize,
    pub anneal_factor: f64,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub grad_tol: f64,
    pub plateau_tol: f64,
    pub plateau_window: usize,
    /// Required robustness floor.
    pub margin: f64,
    pub objective: DmpObjective,
    /// Raise `lambda1` tenfold while the penalty stays active, and raise the
    /// margin when the smoothed value passes but the exact one does not.
    pub continuation: bool,
    pub max_rounds: usize,
    /// Keep `y(T-1)` fixed by projecting every step off the endpoint map.
    pub preserve_endpoint: bool,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            lambda1: 10.0,
            lambda2: 1.0,
            temperature: 0.05,
            anneal_every: 400,
            anneal_factor: 0.5,
            max_iters: 2000,
            learning_rate: 1.0,
            grad_tol: 1e-6,
            plateau_tol: 1e-9,
            plateau_window: 50,
            margin: 0.0,
            objective: DmpObjective::Forcing,
            continuation: true,
            max_rounds: 6,
            preserve_endpoint: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub model: DmpModel,
    pub f_lrn: Forcing,
    /// Per-sample, per-axis weights on the forcing difference.
    pub weights: Vec<[f64; 3]>,
    pub constraint: Formula,
    pub y_init: [f64; 3],
    pub y_goal: [f64; 3],
    pub orientation: Option<OrientationPart>,
    pub config: OptConfig,
}

impl OptimizationProblem {
    /// Problem with unit weights over the model's own forcing and endpoints.
    pub fn new(model: DmpModel, constraint: Formula, config: OptConfig) -> Self {
        let n = model.samples();
        Self {
            f_lrn: model.forcing.clone(),
            weights: vec![[1.0; 3]; n],
            y_init: model.y_init,
            y_goal: model.y_goal,
            model,
            constraint,
            orientation: None,
            config,
        }
    }

    pub fn samples(&self) -> usize {
        self.f_lrn.len()
    }

    pub fn validate(&self) -> Result<(), OptError> {
        let n = self.samples();
        if self.weights.len() != n {
            return Err(OptError::Shape(format!("{} weight rows for {n} samples", self.weights.len())));
        }
        if let Some(o) = &self.orientation {
            if o.f_lrn.len() != n {
                return Err(OptError::Shape(format!("{} orientation rows for {n} samples", o.f_lrn.len())));
            }
        }
        if self.constraint.horizon() >= n {
            return Err(OptError::Invalid(format!(
                "constraint horizon {} does not fit {n} samples",
                self.constraint.horizon()
            )));
        }
        let c = &self.config;
        if !(c.lambda1 >= 0.0 && c.lambda2 >= 0.0 && c.temperature > 0.0 && c.learning_rate > 0.0) {
            return Err(OptError::Invalid("lambdas must be non-negative, temperature and rate positive".into()));
        }
        if !self.constraint.unbound_points().is_empty() {
            return Err(StlError::UnboundPoint(self.constraint.unbound_points().join(", ")).into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Satisfied,
    BestEffort,
    Failed,
}

/// One run of the inner descent at fixed weights, margin and temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub lambda1: f64,
    pub margin: f64,
    pub temperature: f64,
    /// Objective after every accepted step (first entry: stage start).
    pub history: Vec<f64>,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientNorm,
    Plateau,
    MaxIterations,
    StepCollapse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub f_opt: Forcing,
    pub fq_opt: Option<Forcing>,
    pub trace: SignalTrace,
    pub robustness_exact: f64,
    pub robustness_smooth: f64,
    pub stages: Vec<Stage>,
    pub iterations: usize,
    pub status: Status,
    pub wall_time: f64,
}

impl OptimizationResult {
    /// Objective values of all stages, concatenated.
    pub fn history(&self) -> Vec<f64> {
        self.stages.iter().flat_map(|s| s.history.iter().copied()).collect()
    }

    pub fn report(&self, problem: &OptimizationProblem) -> OptReport {
        OptReport {
            schema_version: SCHEMA_VERSION,
            constraint: problem.constraint.to_string(),
            status: self.status,
            robustness_exact: self.robustness_exact,
            robustness_smooth: self.robustness_smooth,
            iterations: self.iterations,
            forcing_distance: objective_dmp(&self.f_opt, &problem.f_lrn, &vec![[1.0; 3]; problem.samples()])
                .unwrap_or(f64::NAN),
            stages: self.stages.clone(),
            wall_time: self.wall_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptReport {
    pub schema_version: u32,
    pub constraint: String,
    pub status: Status,
    #[serde(with = "lenient_f64")]
    pub robustness_exact: f64,
    #[serde(with = "lenient_f64")]
    pub robustness_smooth: f64,
    pub iterations: usize,
    pub forcing_distance: f64,
    pub stages: Vec<Stage>,
    pub wall_time: f64,
}
