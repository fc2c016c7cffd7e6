//! Exact discrete-time quantitative semantics.
//!
//! Every node is evaluated bottom-up into a robustness signal over all start
//! times it can be evaluated at (`T - horizon(node)` samples). Temporal
//! operators use a monotone-deque sliding window, so each node costs O(T).

use std::collections::VecDeque;

use super::ast::{Expr, Formula, Point};
use super::{SignalTrace, StlError};

/// Robustness of `formula` on `trace` at sample `t0`.
pub fn robustness(formula: &Formula, trace: &SignalTrace, t0: usize) -> Result<f64, StlError> {
    check_horizon(formula, trace, t0)?;
    let signal = robustness_signal(formula, trace)?;
    Ok(signal[t0])
}

/// Robustness at every start time `0..=T-1-horizon`.
pub fn robustness_signal(formula: &Formula, trace: &SignalTrace) -> Result<Vec<f64>, StlError> {
    check_horizon(formula, trace, 0)?;
    signal(formula, trace)
}

pub(crate) fn check_horizon(formula: &Formula, trace: &SignalTrace, t0: usize) -> Result<(), StlError> {
    let horizon = formula.horizon();
    if t0 + horizon > trace.len().saturating_sub(1) {
        return Err(StlError::TraceTooShort { t0, horizon, len: trace.len() });
    }
    Ok(())
}

/// Robustness of each subformula at `t0` (pre-order), skipping subformulas
/// whose own horizon does not fit.
pub fn breakdown(formula: &Formula, trace: &SignalTrace, t0: usize) -> Result<Vec<(String, f64)>, StlError> {
    check_horizon(formula, trace, t0)?;
    let mut out = Vec::new();
    for sub in formula.subformulas() {
        if t0 + sub.horizon() < trace.len() {
            out.push((sub.to_string(), signal(sub, trace)?[t0]));
        }
    }
    Ok(out)
}

fn signal(formula: &Formula, trace: &SignalTrace) -> Result<Vec<f64>, StlError> {
    Ok(match formula {
        Formula::True => vec![f64::INFINITY; trace.len()],
        Formula::Predicate(p) => eval_expr(&p.expr, trace)?
            .into_iter()
            .map(|v| p.margin(v))
            .collect(),
        Formula::Not(f) => signal(f, trace)?.into_iter().map(|v| -v).collect(),
        Formula::And(a, b) => zip_with(signal(a, trace)?, signal(b, trace)?, f64::min),
        Formula::Or(a, b) => zip_with(signal(a, trace)?, signal(b, trace)?, f64::max),
        Formula::Implies(a, b) => {
            let na: Vec<f64> = signal(a, trace)?.into_iter().map(|v| -v).collect();
            zip_with(na, signal(b, trace)?, f64::max)
        }
        Formula::Globally(i, f) => sliding(&signal(f, trace)?, i.start, i.end, Extremum::Min),
        Formula::Eventually(i, f) => sliding(&signal(f, trace)?, i.start, i.end, Extremum::Max),
    })
}

fn zip_with(a: Vec<f64>, b: Vec<f64>, op: fn(f64, f64) -> f64) -> Vec<f64> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

#[derive(Clone, Copy)]
enum Extremum {
    Min,
    Max,
}

/// `out[t] = extremum(x[t+a ..= t+b])` for every `t` with `t + b < x.len()`.
fn sliding(x: &[f64], a: usize, b: usize, which: Extremum) -> Vec<f64> {
    if x.len() <= b {
        return Vec::new();
    }
    let n_out = x.len() - b;
    let better = |new: f64, old: f64| match which {
        Extremum::Min => new <= old,
        Extremum::Max => new >= old,
    };
    let mut out = Vec::with_capacity(n_out);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = a;
    for t in 0..n_out {
        while next <= t + b {
            while dq.back().is_some_and(|&j| better(x[next], x[j])) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        while dq.front().is_some_and(|&j| j < t + a) {
            dq.pop_front();
        }
        out.push(x[*dq.front().expect("window is non-empty")]);
    }
    out
}

/// Values of an expression at every sample.
pub(crate) fn eval_expr(expr: &Expr, trace: &SignalTrace) -> Result<Vec<f64>, StlError> {
    let n = trace.len();
    Ok(match expr {
        Expr::Channel(c) => trace
            .channel(c)
            .ok_or_else(|| StlError::MissingChannel(c.clone()))?
            .to_vec(),
        Expr::Const(c) => vec![*c; n],
        Expr::Norm { vector, point } => {
            let comps = vector_channels(trace, vector)?;
            let p = literal(point)?;
            (0..n)
                .map(|k| {
                    (0..3)
                        .map(|a| (comps[a][k] - p[a]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        }
        Expr::Abs(e) => eval_expr(e, trace)?.into_iter().map(f64::abs).collect(),
        Expr::Scale(k, e) => eval_expr(e, trace)?.into_iter().map(|v| k * v).collect(),
        Expr::Add(a, b) => zip_with(eval_expr(a, trace)?, eval_expr(b, trace)?, |x, y| x + y),
        Expr::Sub(a, b) => zip_with(eval_expr(a, trace)?, eval_expr(b, trace)?, |x, y| x - y),
    })
}

pub(crate) fn vector_channels<'a>(trace: &'a SignalTrace, vector: &str) -> Result<[&'a [f64]; 3], StlError> {
    let mut out: [&[f64]; 3] = [&[], &[], &[]];
    for (slot, axis) in out.iter_mut().zip(["x", "y", "z"]) {
        let name = format!("{vector}.{axis}");
        *slot = trace.channel(&name).ok_or(StlError::MissingChannel(name))?;
    }
    Ok(out)
}

pub(crate) fn literal(point: &Point) -> Result<[f64; 3], StlError> {
    match point {
        Point::Literal(p) => Ok(*p),
        Point::Named(n) => Err(StlError::UnboundPoint(n.clone())),
    }
}
