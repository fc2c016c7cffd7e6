//! Signal temporal logic: formula syntax, exact and smooth robustness, and
//! prefix monitoring over uniformly sampled traces.
//!
//! Interval bounds are sample offsets (inclusive). Use
//! [`parse::TimeUnit::Seconds`] to write them in seconds instead.

mod ast;
mod eval;
mod monitor;
pub mod parse;
mod smooth;
mod trace;

pub use ast::{Comparison, Expr, Formula, Interval, Point, Predicate};
pub use eval::{breakdown, robustness, robustness_signal};
pub use monitor::{prefix_bounds, prefix_verdict, Verdict};
pub use parse::{parse, parse_with, ParseOptions, TimeUnit};
pub use smooth::{smooth_robustness, smooth_robustness_grad, softmax, softmin, softmin_weights, TraceGradient};
pub use trace::SignalTrace;
pub(crate) use trace::{first_difference, first_difference_vjp};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("interval lower bound {start} exceeds upper bound {end}")]
    IntervalOrder { start: usize, end: usize },
    #[error("trace of length {len} too short to evaluate horizon {horizon} at t0 = {t0}")]
    TraceTooShort { t0: usize, horizon: usize, len: usize },
    #[error("channel `{0}` not present in trace")]
    MissingChannel(String),
    #[error("point `{0}` is not bound to coordinates")]
    UnboundPoint(String),
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
}
