use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OptError, OptimizationProblem};
use crate::dmp::{Forcing, QuatDmpModel};
use crate::stl::{first_difference_vjp, smooth_robustness, smooth_robustness_grad, SignalTrace, TraceGradient};

/// Orientation forcing optimised alongside the position forcing. Its
/// similarity term is unweighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationPart {
    pub model: QuatDmpModel,
    pub f_lrn: Forcing,
    pub q_init: [f64; 4],
    pub q_goal: [f64; 4],
}

/// Full forcing (position and, optionally, orientation) to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub f: Forcing,
    pub fq: Option<Forcing>,
}

impl Candidate {
    pub fn learned(problem: &OptimizationProblem) -> Self {
        Self { f: problem.f_lrn.clone(), fq: problem.orientation.as_ref().map(|o| o.f_lrn.clone()) }
    }
}

/// `|| W (F - F_lrn) ||_2` over all samples and axes.
pub fn objective_dmp(f: &[[f64; 3]], f_lrn: &[[f64; 3]], w: &[[f64; 3]]) -> Result<f64, OptError> {
    if f.len() != f_lrn.len() || f.len() != w.len() {
        return Err(OptError::Shape(format!("F {} / F_lrn {} / W {} rows", f.len(), f_lrn.len(), w.len())));
    }
    let s: f64 = f
        .iter()
        .zip(f_lrn)
        .zip(w)
        .map(|((a, b), w)| (0..3).map(|d| (w[d] * (a[d] - b[d])).powi(2)).sum::<f64>())
        .sum();
    Ok(s.sqrt())
}

/// `|| y(F) - y(F_lrn) ||_2` over the position rollouts.
pub fn objective_trajectory(problem: &OptimizationProblem, f: &[[f64; 3]]) -> Result<f64, OptError> {
    let m = &problem.model;
    let y = m.positions(f, problem.y_init, problem.y_goal)?;
    let y0 = m.positions(&problem.f_lrn, problem.y_init, problem.y_goal)?;
    Ok(y.iter().zip(&y0).map(|(a, b)| (0..3).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>()).sum::<f64>().sqrt())
}

/// Rollout of a candidate: position channels, plus orientation channels when
/// the problem has an orientation part.
pub(crate) fn rollout(problem: &OptimizationProblem, c: &Candidate) -> Result<SignalTrace, OptError> {
    let mut tr = problem.model.rollout_with(&c.f, problem.y_init, problem.y_goal)?;
    if let (Some(o), Some(fq)) = (&problem.orientation, &c.fq) {
        let qt = o.model.rollout_with(fq, o.q_init, o.q_goal)?;
        for (name, values) in qt.channels() {
            tr.insert(name.clone(), values.clone())?;
        }
    }
    Ok(tr)
}

/// `max(0, margin - smooth_rho)` at the configured temperature and margin.
pub fn objective_stl(problem: &OptimizationProblem, c: &Candidate) -> Result<f64, OptError> {
    let cfg = &problem.config;
    let tr = rollout(problem, c)?;
    let rho = smooth_robustness(&problem.constraint, &tr, 0, cfg.temperature)?;
    Ok((cfg.margin - rho).max(0.0))
}

/// [`objective_stl`] with its gradient with respect to both forcing terms.
pub fn objective_stl_grad(
    problem: &OptimizationProblem,
    c: &Candidate,
) -> Result<(f64, Forcing, Option<Forcing>), OptError> {
    let cfg = &problem.config;
    let (v, g, gq, _) = hinge_grad(problem, c, cfg.temperature, cfg.margin)?;
    Ok((v, g, gq))
}

/// Hinge value, its gradients and the smooth robustness.
pub(crate) fn hinge_grad(
    problem: &OptimizationProblem,
    c: &Candidate,
    temperature: f64,
    margin: f64,
) -> Result<(f64, Forcing, Option<Forcing>, f64), OptError> {
    let n = c.f.len();
    let tr = rollout(problem, c)?;
    let (rho, grad) = smooth_robustness_grad(&problem.constraint, &tr, 0, temperature)?;
    let mut gf = vec![[0.0; 3]; n];
    let mut gq = c.fq.as_ref().map(|_| vec![[0.0; 3]; n]);
    if rho >= margin {
        return Ok((0.0, gf, gq, rho));
    }
    // d(margin - rho) = -d rho
    let ybar = pull_back(&grad, "y", "vel", ["x", "y", "z"], n, tr.dt());
    let ybar: Vec<[f64; 3]> = ybar.into_iter().map(|r| [-r[0], -r[1], -r[2]]).collect();
    gf = problem.model.adjoint(&ybar);
    if let (Some(o), Some(fq), Some(gq)) = (&problem.orientation, &c.fq, gq.as_mut()) {
        let qbar = pull_back(&grad, "q", "qvel", ["w", "x", "y", "z"], n, tr.dt());
        if qbar.iter().flatten().any(|v| *v != 0.0) {
            *gq = orientation_grad(o, fq, &qbar)?;
            for row in gq.iter_mut() {
                *row = row.map(|v| -v);
            }
        }
    }
    Ok((margin - rho, gf, gq, rho))
}

/// Gradient on the `prefix.*` channels, folding in the one on their
/// first-difference channels `vel_prefix.*`.
fn pull_back<const D: usize>(
    grad: &TraceGradient,
    prefix: &str,
    vel_prefix: &str,
    axes: [&str; D],
    n: usize,
    dt: f64,
) -> Vec<[f64; D]> {
    let mut out = vec![[0.0; D]; n];
    for (d, axis) in axes.iter().enumerate() {
        if let Some(g) = grad.get(&format!("{prefix}.{axis}")) {
            for k in 0..n {
                out[k][d] += g[k];
            }
        }
        if let Some(g) = grad.get(&format!("{vel_prefix}.{axis}")) {
            for (k, v) in first_difference_vjp(g, dt).into_iter().enumerate() {
                out[k][d] += v;
            }
        }
    }
    out
}

/// `qbar . dq/dF_q` by central differences, one column per forcing entry.
/// Columns are computed in parallel and collected in order.
fn orientation_grad(o: &OrientationPart, fq: &[[f64; 3]], qbar: &[[f64; 4]]) -> Result<Forcing, OptError> {
    let n = fq.len();
    let h = 1e-5;
    let dot = |qs: &[[f64; 4]]| -> f64 { qs.iter().zip(qbar).map(|(q, b)| (0..4).map(|i| q[i] * b[i]).sum::<f64>()).sum() };
    let columns: Vec<Result<f64, OptError>> = (0..n * 3)
        .into_par_iter()
        .map(|col| {
            let (k, d) = (col / 3, col % 3);
            let mut f = fq.to_vec();
            f[k][d] += h;
            let plus = dot(&o.model.orientations_with(&f, o.q_init, o.q_goal)?);
            f[k][d] -= 2.0 * h;
            let minus = dot(&o.model.orientations_with(&f, o.q_init, o.q_goal)?);
            Ok((plus - minus) / (2.0 * h))
        })
        .collect();
    let mut out = vec![[0.0; 3]; n];
    for (col, v) in columns.into_iter().enumerate() {
        out[col / 3][col % 3] = v?;
    }
    Ok(out)
}
