//! Discrete movement primitives: canonical phase, cosine basis regression,
//! position and quaternion attractor systems, and demonstration loading.

mod basis;
mod canonical;
mod demo;
mod position;
mod quat;

pub use basis::{BasisFit, BasisSet};
pub use canonical::CanonicalSystem;
pub use demo::{load_demo, load_demo_file, Demo};
pub use position::{learn_forcing, DmpModel, DmpParams, Forcing, Integrator};
pub use quat::{angle_between, learn_quat_forcing, quat_exp, quat_log, QuatDmpModel};

use thiserror::Error;

use crate::stl::StlError;

#[derive(Debug, Error)]
pub enum DmpError {
    #[error("demonstration has {0} samples, need at least 3")]
    DemoTooShort(usize),
    #[error("non-finite value in {what} at sample {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("rollout diverged at step {0}")]
    Diverged(usize),
    #[error("forcing has {got} samples, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("basis regression rejected: {0}")]
    Regression(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Trace(#[from] StlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// First derivative: central differences, second-order one-sided at the
/// endpoints. Needs at least three samples.
pub(crate) fn gradient(xs: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|k| match k {
            0 => (-3.0 * xs[0] + 4.0 * xs[1] - xs[2]) / (2.0 * dt),
            k if k == n - 1 => (3.0 * xs[k] - 4.0 * xs[k - 1] + xs[k - 2]) / (2.0 * dt),
            k => (xs[k + 1] - xs[k - 1]) / (2.0 * dt),
        })
        .collect()
}

/// Second derivative: central three-point stencil, second-order one-sided
/// four-point stencils at the endpoints (three-point with only three samples).
pub(crate) fn second_derivative(xs: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    let h2 = dt * dt;
    (0..n)
        .map(|k| {
            if n < 4 {
                return (xs[0] - 2.0 * xs[1] + xs[2]) / h2;
            }
            match k {
                0 => (2.0 * xs[0] - 5.0 * xs[1] + 4.0 * xs[2] - xs[3]) / h2,
                k if k == n - 1 => (2.0 * xs[k] - 5.0 * xs[k - 1] + 4.0 * xs[k - 2] - xs[k - 3]) / h2,
                k => (xs[k + 1] - 2.0 * xs[k] + xs[k - 1]) / h2,
            }
        })
        .collect()
}

pub(crate) fn axis(points: &[[f64; 3]], a: usize) -> Vec<f64> {
    points.iter().map(|p| p[a]).collect()
}
