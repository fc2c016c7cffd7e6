//! Adam on `x` with `F = F_lrn + phi * x`. Probes may go uphill; only a
//! probe that does not increase the objective replaces the incumbent and
//! enters the stage history, which is therefore non-increasing. After
//! `STALL_PATIENCE` fruitless probes the search returns to the incumbent
//! with half the rate.
//!
//! The position part of every step is projected onto the null space of the
//! linear map from forcing to the final position, which therefore never
//! moves. Temperature is annealed between stages; the outer rounds raise
//! `lambda1` (penalty still active) or the margin (smoothed value passes,
//! exact one does not).

use std::time::Instant;

use super::objective::{hinge_grad, rollout};
use super::{
    Candidate, DmpObjective, OptError, OptimizationProblem, OptimizationResult, Stage, Status,
    StopReason,
};
use crate::stl::{robustness, smooth_robustness};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-12;
const MIN_TEMPERATURE_RATIO: f64 = 1e-3;
/// Non-improving probes tolerated before returning to the incumbent.
const STALL_PATIENCE: usize = 20;

struct Eval {
    value: f64,
    grad: Vec<f64>,
}

struct Solver<'a> {
    p: &'a OptimizationProblem,
    phase: Vec<f64>,
    /// Endpoint direction in decision space, per position axis (shared).
    endpoint: Option<Vec<f64>>,
    y_lrn: Vec<[f64; 3]>,
    n: usize,
    has_q: bool,
}

impl<'a> Solver<'a> {
    fn dim(&self) -> usize {
        self.n * if self.has_q { 6 } else { 3 }
    }

    fn candidate(&self, x: &[f64]) -> Candidate {
        let n = self.n;
        let f = (0..n)
            .map(|k| std::array::from_fn(|d| self.p.f_lrn[k][d] + self.phase[k] * x[3 * k + d]))
            .collect();
        let fq = self.p.orientation.as_ref().map(|o| {
            (0..n)
                .map(|k| std::array::from_fn(|d| o.f_lrn[k][d] + self.phase[k] * x[3 * n + 3 * k + d]))
                .collect()
        });
        Candidate { f, fq }
    }

    fn project(&self, v: &mut [f64]) {
        let Some(a) = &self.endpoint else { return };
        let aa: f64 = a.iter().map(|x| x * x).sum();
        if aa == 0.0 {
            return;
        }
        for d in 0..3 {
            let dot: f64 = (0..self.n).map(|k| a[k] * v[3 * k + d]).sum();
            for k in 0..self.n {
                v[3 * k + d] -= a[k] * dot / aa;
            }
        }
    }

    fn evaluate(&self, x: &[f64], lambda1: f64, temperature: f64, margin: f64) -> Result<Eval, OptError> {
        let n = self.n;
        let c = self.candidate(x);
        let mut grad = vec![0.0; self.dim()];
        let hinge = if lambda1 > 0.0 {
            let (h, gf, gq, _) = hinge_grad(self.p, &c, temperature, margin)?;
            for k in 0..n {
                for d in 0..3 {
                    grad[3 * k + d] += lambda1 * gf[k][d] * self.phase[k];
                    if let Some(gq) = &gq {
                        grad[3 * n + 3 * k + d] += lambda1 * gq[k][d] * self.phase[k];
                    }
                }
            }
            h
        } else {
            let tr = rollout(self.p, &c)?;
            let rho = smooth_robustness(&self.p.constraint, &tr, 0, temperature)?;
            (margin - rho).max(0.0)
        };
        let lambda2 = self.p.config.lambda2;
        let sim = match self.p.config.objective {
            DmpObjective::Forcing => {
                let w = &self.p.weights;
                let mut s = 0.0;
                for k in 0..n {
                    for d in 0..3 {
                        s += (w[k][d] * self.phase[k] * x[3 * k + d]).powi(2);
                        if self.has_q {
                            s += (self.phase[k] * x[3 * n + 3 * k + d]).powi(2);
                        }
                    }
                }
                let norm = s.sqrt();
                if norm > 0.0 {
                    for k in 0..n {
                        for d in 0..3 {
                            let wp = w[k][d] * self.phase[k];
                            grad[3 * k + d] += lambda2 * wp * wp * x[3 * k + d] / norm;
                            if self.has_q {
                                let i = 3 * n + 3 * k + d;
                                grad[i] += lambda2 * self.phase[k] * self.phase[k] * x[i] / norm;
                            }
                        }
                    }
                }
                norm
            }
            DmpObjective::Trajectory => {
                let y = self.p.model.positions(&c.f, self.p.y_init, self.p.y_goal)?;
                let diff: Vec<[f64; 3]> =
                    y.iter().zip(&self.y_lrn).map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]]).collect();
                let norm = diff.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    let ybar: Vec<[f64; 3]> = diff.iter().map(|r| r.map(|v| v / norm)).collect();
                    let g = self.p.model.adjoint(&ybar);
                    for k in 0..n {
                        for d in 0..3 {
                            grad[3 * k + d] += lambda2 * g[k][d] * self.phase[k];
                        }
                    }
                }
                norm
            }
        };
        self.project(&mut grad);
        Ok(Eval { value: lambda1 * hinge + lambda2 * sim, grad })
    }

    /// Descends from `x` for at most `budget` iterations and leaves the best
    /// iterate in `x`.
    fn stage(
        &self,
        x: &mut [f64],
        lambda1: f64,
        temperature: f64,
        margin: f64,
        budget: usize,
        lr: &mut f64,
    ) -> Result<(Stage, usize), OptError> {
        let cfg = &self.p.config;
        let dim = self.dim();
        let (mut m, mut v) = (vec![0.0; dim], vec![0.0; dim]);
        let mut best = self.evaluate(x, lambda1, temperature, margin)?;
        let mut history = vec![best.value];
        let mut trail = vec![best.value];
        let mut stop = StopReason::MaxIterations;
        let min_lr = cfg.learning_rate * 1e-12;
        let mut used = 0;
        let mut t = 0;
        let mut stalled = 0;
        let mut probe = x.to_vec();
        let mut cur_grad = best.grad.clone();
        for it in 1..=budget {
            used = it;
            if best.grad.iter().map(|g| g * g).sum::<f64>().sqrt() < cfg.grad_tol {
                stop = StopReason::GradientNorm;
                break;
            }
            t += 1;
            let mut step = vec![0.0; dim];
            for i in 0..dim {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * cur_grad[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * cur_grad[i] * cur_grad[i];
                let mh = m[i] / (1.0 - BETA1.powi(t));
                let vh = v[i] / (1.0 - BETA2.powi(t));
                step[i] = -*lr * mh / (vh.sqrt() + EPS);
            }
            self.project(&mut step);
            for i in 0..dim {
                probe[i] += step[i];
            }
            let next = match self.evaluate(&probe, lambda1, temperature, margin) {
                Ok(e) if e.value.is_finite() => Some(e),
                Ok(_) | Err(OptError::Dmp(_)) => None,
                Err(e) => return Err(e),
            };
            match next {
                Some(e) if e.value <= best.value => {
                    x.copy_from_slice(&probe);
                    cur_grad = e.grad.clone();
                    best = e;
                    history.push(best.value);
                    stalled = 0;
                }
                Some(e) if stalled < STALL_PATIENCE => {
                    cur_grad = e.grad;
                    stalled += 1;
                }
                _ => {
                    // back to the incumbent with a smaller rate and fresh moments
                    probe.copy_from_slice(x);
                    cur_grad = best.grad.clone();
                    m.iter_mut().chain(v.iter_mut()).for_each(|a| *a = 0.0);
                    t = 0;
                    stalled = 0;
                    *lr *= 0.5;
                    if *lr < min_lr {
                        stop = StopReason::StepCollapse;
                        break;
                    }
                }
            }
            trail.push(best.value);
            if trail.len() > cfg.plateau_window {
                let old = trail[trail.len() - 1 - cfg.plateau_window];
                if old - best.value <= cfg.plateau_tol * best.value.abs().max(f64::MIN_POSITIVE) {
                    stop = StopReason::Plateau;
                    break;
                }
            }
        }
        Ok((Stage { lambda1, margin, temperature, history, stop }, used))
    }
}

pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult, OptError> {
    let start = Instant::now();
    problem.validate()?;
    let cfg = &problem.config;
    let n = problem.samples();
    let phase = problem.model.canonical().phases(n);
    let endpoint = cfg.preserve_endpoint.then(|| {
        let s = problem.model.endpoint_sensitivity(n);
        s.iter().zip(&phase).map(|(a, b)| a * b).collect()
    });
    let y_lrn = problem.model.positions(&problem.f_lrn, problem.y_init, problem.y_goal)?;
    let solver = Solver { p: problem, phase, endpoint, y_lrn, n, has_q: problem.orientation.is_some() };
    let mut x = vec![0.0; solver.dim()];
    let (mut lambda1, mut margin, mut temperature) = (cfg.lambda1, cfg.margin, cfg.temperature);
    let mut lr = cfg.learning_rate;
    let mut stages = Vec::new();
    let mut iterations = 0;
    let exact_of = |x: &[f64]| -> Result<f64, OptError> {
        let tr = rollout(problem, &solver.candidate(x))?;
        Ok(robustness(&problem.constraint, &tr, 0)?)
    };
    for round in 0..cfg.max_rounds.max(1) {
        let mut used_in_round = 0;
        // one stage per annealing step; a stage that stops early still
        // counts as a full one so a stuck round cannot spin
        let max_stages = cfg.max_iters.div_ceil(cfg.anneal_every.max(1));
        for _ in 0..max_stages {
            if used_in_round >= cfg.max_iters {
                break;
            }
            let budget = cfg.anneal_every.min(cfg.max_iters - used_in_round);
            let (stage, used) = solver.stage(&mut x, lambda1, temperature, margin, budget, &mut lr)?;
            used_in_round += used;
            iterations += used;
            let converged = stage.stop != StopReason::MaxIterations;
            let moved = stage.history.len() > 1;
            stages.push(stage);
            if lambda1 == 0.0 || (converged && exact_of(&x)? >= 0.0) {
                break;
            }
            if !moved {
                // the penalty is too weak to leave this point at all:
                // leave the temperature for the next, stronger round
                break;
            }
            if temperature > cfg.temperature * MIN_TEMPERATURE_RATIO {
                temperature *= cfg.anneal_factor;
            }
            lr = lr.max(cfg.learning_rate * 1e-3);
        }
        let exact = exact_of(&x)?;
        if exact >= 0.0 || !cfg.continuation || lambda1 == 0.0 || round + 1 == cfg.max_rounds {
            break;
        }
        let c = solver.candidate(&x);
        let smooth = smooth_robustness(&problem.constraint, &rollout(problem, &c)?, 0, temperature)?;
        if smooth < margin {
            lambda1 *= 10.0;
            log::debug!("round {round}: penalty still active (smooth {smooth:.3e}), lambda1 -> {lambda1}");
        } else {
            margin += -exact + 1e-6 * (1.0 + margin.abs());
            log::debug!("round {round}: smooth passes but exact {exact:.3e} < 0, margin -> {margin:.3e}");
        }
        lr = cfg.learning_rate;
    }
    let c = solver.candidate(&x);
    let trace = rollout(problem, &c)?;
    let robustness_exact = robustness(&problem.constraint, &trace, 0)?;
    let robustness_smooth = smooth_robustness(&problem.constraint, &trace, 0, cfg.temperature)?;
    let status = if robustness_exact >= 0.0 {
        Status::Satisfied
    } else if robustness_exact.is_finite() {
        log::warn!("constraint not met: exact robustness {robustness_exact:.4e}");
        Status::BestEffort
    } else {
        Status::Failed
    };
    Ok(OptimizationResult {
        f_opt: c.f,
        fq_opt: c.fq,
        trace,
        robustness_exact,
        robustness_smooth,
        stages,
        iterations,
        status,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
