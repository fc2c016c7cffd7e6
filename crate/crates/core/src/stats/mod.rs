//! Multi-demonstration statistics: resampling and alignment, a Gaussian
//! mixture over (phase, position) with regression on phase, and the
//! variance-based weights applied to the forcing-term objective.

mod demos;
mod gmm;
mod weights;

pub use demos::DemoSet;
pub use gmm::{fit_gmm_gmr, Gmm, GmmConfig, GmmInit};
pub use weights::{combine_weights, space_weights, time_weights};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no demonstrations")]
    Empty,
    #[error("demonstration {index} has {len} samples, need at least 2")]
    TooShort { index: usize, len: usize },
    #[error("need at least {needed} samples for {components} components, have {have}")]
    NotEnoughData { needed: usize, have: usize, components: usize },
    #[error("negative variance {value} at sample {index}")]
    NegativeVariance { index: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Phase-indexed mean and covariance of a demonstration set together with
/// the derived weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoStats {
    pub schema_version: u32,
    pub phases: Vec<f64>,
    pub mean: Vec<[f64; 3]>,
    pub cov: Vec<[[f64; 3]; 3]>,
    /// Per-axis weights over time, `w_time[axis][t]`.
    pub w_time: [Vec<f64>; 3],
    /// Per-sample weights over axes, `w_space[t][axis]`.
    pub w_space: Vec<[f64; 3]>,
    /// Element-wise product of the two.
    pub w: Vec<[f64; 3]>,
}

impl DemoStats {
    pub fn from_moments(phases: Vec<f64>, mean: Vec<[f64; 3]>, cov: Vec<[[f64; 3]; 3]>) -> Result<Self, StatsError> {
        let diag: Vec<[f64; 3]> = cov.iter().map(|c| [c[0][0], c[1][1], c[2][2]]).collect();
        let per_axis: [Vec<f64>; 3] = std::array::from_fn(|d| diag.iter().map(|v| v[d]).collect());
        let w_time = [time_weights(&per_axis[0])?, time_weights(&per_axis[1])?, time_weights(&per_axis[2])?];
        let w_space = space_weights(&diag)?;
        let w = combine_weights(&w_time, &w_space)?;
        Ok(Self { schema_version: SCHEMA_VERSION, phases, mean, cov, w_time, w_space, w })
    }

    pub fn variances(&self) -> Vec<[f64; 3]> {
        self.cov.iter().map(|c| [c[0][0], c[1][1], c[2][2]]).collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}
