//! Orientation DMP
//!
//! ```text
//! tau eta' = alpha (beta 2 log(g * conj(q)) - eta) + F
//! tau q'   = 1/2 eta * q
//! ```
//!
//! Stepped like the position system (velocity first), with `q` advanced by
//! the exponential map and renormalised every step.
//! Quaternions are stored as `[w, x, y, z]`.

use nalgebra::{Quaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{gradient, DmpError, Forcing};
use crate::stl::{first_difference, SignalTrace};

const SMALL_ANGLE: f64 = 1e-8;

fn to_na(q: [f64; 4]) -> Quaternion<f64> {
    Quaternion::new(q[0], q[1], q[2], q[3])
}

fn from_na(q: Quaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Logarithm of a unit quaternion as a rotation half-vector.
pub fn quat_log(q: [f64; 4]) -> [f64; 3] {
    let u = Vector3::new(q[1], q[2], q[3]);
    let n = u.norm();
    if n < SMALL_ANGLE {
        return [q[1], q[2], q[3]];
    }
    let s = n.atan2(q[0]) / n;
    [u.x * s, u.y * s, u.z * s]
}

/// Exponential of a pure quaternion `(0, v)`.
pub fn quat_exp(v: [f64; 3]) -> [f64; 4] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n < SMALL_ANGLE {
        let q = [1.0, v[0], v[1], v[2]];
        return normalize(q);
    }
    let s = n.sin() / n;
    [n.cos(), v[0] * s, v[1] * s, v[2] * s]
}

fn normalize(q: [f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

fn mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    from_na(to_na(a) * to_na(b))
}

fn conj(q: [f64; 4]) -> [f64; 4] {
    [q[0], -q[1], -q[2], -q[3]]
}

/// Rotation angle between two orientations (sign-invariant).
pub fn angle_between(a: [f64; 4], b: [f64; 4]) -> f64 {
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    2.0 * dot.abs().min(1.0).acos()
}

fn err_vec(goal: [f64; 4], q: [f64; 4]) -> [f64; 3] {
    quat_log(mul(goal, conj(q))).map(|v| 2.0 * v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuatDmpModel {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub dt: f64,
    pub q_init: [f64; 4],
    pub q_goal: [f64; 4],
    pub forcing: Forcing,
}

impl QuatDmpModel {
    pub fn new(q_init: [f64; 4], q_goal: [f64; 4], samples: usize) -> Self {
        Self { alpha: 25.0, beta: 6.25, tau: 1.0, dt: 0.02, q_init, q_goal, forcing: vec![[0.0; 3]; samples] }
    }

    pub fn samples(&self) -> usize {
        self.forcing.len()
    }

    /// Goal expressed in the hemisphere of `q_init`.
    fn aligned_goal(&self, q_init: [f64; 4], q_goal: [f64; 4]) -> [f64; 4] {
        let dot: f64 = q_init.iter().zip(&q_goal).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            log::warn!("orientation goal is in the opposite hemisphere of the start; flipping its sign");
            q_goal.map(|v| -v)
        } else {
            q_goal
        }
    }

    pub fn orientations_with(
        &self,
        f: &[[f64; 3]],
        q_init: [f64; 4],
        q_goal: [f64; 4],
    ) -> Result<Vec<[f64; 4]>, DmpError> {
        let q_init = normalize(q_init);
        let goal = self.aligned_goal(q_init, normalize(q_goal));
        let h = self.dt / self.tau;
        let mut q = q_init;
        let mut eta = [0.0; 3];
        let mut out = Vec::with_capacity(f.len());
        for (k, fk) in f.iter().enumerate() {
            out.push(q);
            if k + 1 == f.len() {
                break;
            }
            let e = err_vec(goal, q);
            for d in 0..3 {
                eta[d] += h * (self.alpha * (self.beta * e[d] - eta[d]) + fk[d]);
            }
            q = normalize(mul(quat_exp(eta.map(|v| 0.5 * h * v)), q));
            if q.iter().chain(&eta).any(|v| !v.is_finite()) {
                return Err(DmpError::Diverged(k + 1));
            }
        }
        Ok(out)
    }

    /// Trace with `q.*` channels and first-difference `qvel.*` channels.
    pub fn rollout_with(&self, f: &[[f64; 3]], q_init: [f64; 4], q_goal: [f64; 4]) -> Result<SignalTrace, DmpError> {
        let qs = self.orientations_with(f, q_init, q_goal)?;
        quats_to_trace(&qs, self.dt)
    }

    pub fn rollout(&self) -> Result<SignalTrace, DmpError> {
        self.rollout_with(&self.forcing, self.q_init, self.q_goal)
    }

    /// Learns the forcing that reproduces `demo` (unit quaternions).
    pub fn learn(demo: &[[f64; 4]], dt: f64) -> Result<Self, DmpError> {
        let mut m = Self::new(demo[0], *demo.last().ok_or(DmpError::DemoTooShort(0))?, demo.len());
        m.dt = dt;
        m.forcing = learn_quat_forcing(demo, &m)?;
        Ok(m)
    }
}

pub(crate) fn quats_to_trace(qs: &[[f64; 4]], dt: f64) -> Result<SignalTrace, DmpError> {
    let mut tr = SignalTrace::new(dt, qs.len())?;
    for (i, name) in ["w", "x", "y", "z"].iter().enumerate() {
        let c: Vec<f64> = qs.iter().map(|q| q[i]).collect();
        let vel = first_difference(&c, dt);
        tr.insert(format!("q.{name}"), c)?;
        tr.insert(format!("qvel.{name}"), vel)?;
    }
    Ok(tr)
}

/// Forcing from angular velocities `omega_k = 2 log(q_{k+1} conj(q_k)) / dt`.
pub fn learn_quat_forcing(demo: &[[f64; 4]], model: &QuatDmpModel) -> Result<Forcing, DmpError> {
    if demo.len() < 3 {
        return Err(DmpError::DemoTooShort(demo.len()));
    }
    if let Some(index) = demo.iter().position(|q| q.iter().any(|v| !v.is_finite())) {
        return Err(DmpError::NonFinite { what: "orientation demonstration", index });
    }
    let n = demo.len();
    let mut demo: Vec<[f64; 4]> = demo.iter().map(|&q| normalize(q)).collect();
    // keep consecutive samples in one hemisphere
    for k in 1..n {
        let dot: f64 = demo[k].iter().zip(&demo[k - 1]).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            demo[k] = demo[k].map(|v| -v);
        }
    }
    let goal = demo[n - 1];
    // backward-difference angular velocity, matching the integrator
    let mut omega = vec![[0.0; 3]; n];
    for k in 1..n {
        omega[k] = err_vec(demo[k], demo[k - 1]).map(|v| v / model.dt);
    }
    let mut out = vec![[0.0; 3]; n];
    for d in 0..3 {
        let w: Vec<f64> = omega.iter().map(|o| o[d]).collect();
        let wd = gradient(&w, model.dt);
        for k in 0..n {
            let e = err_vec(goal, demo[k])[d];
            out[k][d] = model.tau * model.tau * wd[k] - model.alpha * (model.beta * e - model.tau * w[k]);
        }
    }
    Ok(out)
}
