//! Position DMP
//!
//! ```text
//! tau v' = alpha (beta (g - y) - v) + F
//! tau y' = v
//! ```
//!
//! integrated on a fixed grid with `F` held constant over each step. The
//! default is semi-implicit Euler (velocity first, then position with the new
//! velocity): it is explicit, and with it `v_k / tau` is exactly the backward
//! difference of `y`, so the `vel.*` channels are the integrator's own
//! velocity. Both integrators make one step an affine map of `(y, v, F, g)`,
//! which [`DmpModel::adjoint`] exploits.

use serde::{Deserialize, Serialize};

use super::{axis, gradient, second_derivative, BasisFit, BasisSet, CanonicalSystem, DmpError};
use crate::stl::{first_difference, SignalTrace};

/// Time-indexed forcing term, one row per sample.
pub type Forcing = Vec<[f64; 3]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmpParams {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub dt: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

impl Default for DmpParams {
    fn default() -> Self {
        Self { alpha: 25.0, beta: 6.25, tau: 1.0, dt: 0.02, integrator: Integrator::Euler }
    }
}

impl DmpParams {
    pub fn validate(&self) -> Result<(), DmpError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.alpha) && ok(self.beta) && ok(self.tau) && ok(self.dt)) {
            return Err(DmpError::InvalidParameter(format!(
                "alpha, beta, tau, dt must be positive (got {}, {}, {}, {})",
                self.alpha, self.beta, self.tau, self.dt
            )));
        }
        Ok(())
    }

    /// One integration step for a single axis.
    pub(crate) fn step(&self, y: f64, v: f64, f: f64, g: f64) -> (f64, f64) {
        let h = self.dt / self.tau;
        let acc = |y: f64, v: f64| self.alpha * (self.beta * (g - y) - v) + f;
        match self.integrator {
            Integrator::Euler => {
                let v1 = v + h * acc(y, v);
                (y + h * v1, v1)
            }
            Integrator::Rk4 => {
                let (k1y, k1v) = (v, acc(y, v));
                let (k2y, k2v) = {
                    let (yy, vv) = (y + 0.5 * h * k1y, v + 0.5 * h * k1v);
                    (vv, acc(yy, vv))
                };
                let (k3y, k3v) = {
                    let (yy, vv) = (y + 0.5 * h * k2y, v + 0.5 * h * k2v);
                    (vv, acc(yy, vv))
                };
                let (k4y, k4v) = {
                    let (yy, vv) = (y + h * k3y, v + h * k3v);
                    (vv, acc(yy, vv))
                };
                (
                    y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
                    v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
                )
            }
        }
    }

    /// Linear part of one step: `[y', v'] = A [y, v] + b F + (terms in g)`.
    fn linearization(&self) -> ([[f64; 2]; 2], [f64; 2]) {
        let (y1, v1) = self.step(1.0, 0.0, 0.0, 0.0);
        let (y2, v2) = self.step(0.0, 1.0, 0.0, 0.0);
        let (yf, vf) = self.step(0.0, 0.0, 1.0, 0.0);
        ([[y1, y2], [v1, v2]], [yf, vf])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpModel {
    pub params: DmpParams,
    pub y_init: [f64; 3],
    pub y_goal: [f64; 3],
    /// Sample-wise learned forcing.
    pub forcing: Forcing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisFit>,
}

/// `F = tau^2 y'' - alpha (beta (g - y) - tau y')` with central differences.
pub fn learn_forcing(
    demo: &[[f64; 3]],
    params: &DmpParams,
    goal: [f64; 3],
) -> Result<Forcing, DmpError> {
    params.validate()?;
    if demo.len() < 3 {
        return Err(DmpError::DemoTooShort(demo.len()));
    }
    if let Some(index) = demo.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(DmpError::NonFinite { what: "demonstration", index });
    }
    let (a, b, tau) = (params.alpha, params.beta, params.tau);
    let mut out = vec![[0.0; 3]; demo.len()];
    for d in 0..3 {
        let y = axis(demo, d);
        let yd = gradient(&y, params.dt);
        let ydd = second_derivative(&y, params.dt);
        for k in 0..y.len() {
            out[k][d] = tau * tau * ydd[k] - a * (b * (goal[d] - y[k]) - tau * yd[k]);
        }
    }
    Ok(out)
}

impl DmpModel {
    /// Learns the sample-wise forcing of `demo` and, if `basis_count` is
    /// given, its basis-function regression.
    pub fn learn(demo: &[[f64; 3]], params: DmpParams, basis_count: Option<usize>) -> Result<Self, DmpError> {
        let goal = *demo.last().ok_or(DmpError::DemoTooShort(0))?;
        let forcing = learn_forcing(demo, &params, goal)?;
        let basis = match basis_count {
            Some(n) => {
                let cs = CanonicalSystem::for_samples(params.tau, params.dt, demo.len());
                let set = BasisSet::new(n, &cs, demo.len())?;
                Some(set.fit(&forcing, &cs.phases(demo.len()))?)
            }
            None => None,
        };
        Ok(Self { params, y_init: demo[0], y_goal: goal, forcing, basis })
    }

    pub fn samples(&self) -> usize {
        self.forcing.len()
    }

    pub fn canonical(&self) -> CanonicalSystem {
        CanonicalSystem::for_samples(self.params.tau, self.params.dt, self.samples())
    }

    /// Forcing regenerated from the basis weights over `samples` steps.
    pub fn basis_forcing(&self, samples: usize) -> Option<Forcing> {
        let fit = self.basis.as_ref()?;
        let cs = CanonicalSystem::for_samples(self.params.tau, self.params.dt, samples);
        Some(fit.reconstruct(&cs.phases(samples)))
    }

    /// Positions `y_0 .. y_{T-1}` for forcing `f`, starting at rest.
    pub fn positions(&self, f: &[[f64; 3]], y_init: [f64; 3], y_goal: [f64; 3]) -> Result<Vec<[f64; 3]>, DmpError> {
        let p = &self.params;
        p.validate()?;
        let n = f.len();
        let mut out = Vec::with_capacity(n);
        let mut y = y_init;
        let mut v = [0.0; 3];
        for (k, fk) in f.iter().enumerate() {
            out.push(y);
            if k + 1 == n {
                break;
            }
            for d in 0..3 {
                let (ny, nv) = p.step(y[d], v[d], fk[d], y_goal[d]);
                y[d] = ny;
                v[d] = nv;
            }
            if y.iter().chain(&v).any(|x| !x.is_finite()) {
                return Err(DmpError::Diverged(k + 1));
            }
        }
        Ok(out)
    }

    /// Rollout with `f` as a trace with `y.*` and first-difference `vel.*`
    /// channels.
    pub fn rollout_with(&self, f: &[[f64; 3]], y_init: [f64; 3], y_goal: [f64; 3]) -> Result<SignalTrace, DmpError> {
        let pos = self.positions(f, y_init, y_goal)?;
        positions_to_trace(&pos, self.params.dt)
    }

    /// Rollout of the learned forcing between the learned endpoints.
    pub fn rollout(&self) -> Result<SignalTrace, DmpError> {
        self.rollout_with(&self.forcing, self.y_init, self.y_goal)
    }

    /// Gradient of `sum_k <ybar_k, y_k>` with respect to every forcing sample.
    /// Independent of the forcing itself since the rollout is affine in it.
    pub fn adjoint(&self, ybar: &[[f64; 3]]) -> Forcing {
        let (a, b) = self.params.linearization();
        let n = ybar.len();
        let mut out = vec![[0.0; 3]; n];
        for d in 0..3 {
            // costate of (y_{k+1}, v_{k+1})
            let (mut ly, mut lv) = (0.0, 0.0);
            for k in (0..n).rev() {
                if k + 1 < n {
                    out[k][d] = b[0] * ly + b[1] * lv;
                }
                let ny = a[0][0] * ly + a[1][0] * lv + ybar[k][d];
                let nv = a[0][1] * ly + a[1][1] * lv;
                ly = ny;
                lv = nv;
            }
        }
        out
    }

    /// `d y_{T-1} / d F_k` (identical for every axis).
    pub fn endpoint_sensitivity(&self, samples: usize) -> Vec<f64> {
        let mut ybar = vec![[0.0; 3]; samples];
        if let Some(last) = ybar.last_mut() {
            *last = [1.0, 0.0, 0.0];
        }
        self.adjoint(&ybar).into_iter().map(|g| g[0]).collect()
    }
}

pub(crate) fn positions_to_trace(pos: &[[f64; 3]], dt: f64) -> Result<SignalTrace, DmpError> {
    let mut tr = SignalTrace::new(dt, pos.len())?;
    for (d, name) in ["x", "y", "z"].iter().enumerate() {
        let y = axis(pos, d);
        let vel = first_difference(&y, dt);
        tr.insert(format!("y.{name}"), y)?;
        tr.insert(format!("vel.{name}"), vel)?;
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_example() {
        // y'' = 0, y' = 1, y = 0.5, g = 1  ->  F = -25 (6.25 * 0.5 - 1)
        let p = DmpParams::default();
        let f = p.tau * p.tau * 0.0 - p.alpha * (p.beta * (1.0 - 0.5) - p.tau * 1.0);
        assert_eq!(f, -53.125);
        // a linear ramp through y = 0.5 with unit slope has y'' = 0, y' = 1
        let demo: Vec<[f64; 3]> = (0..5).map(|k| [0.5 + (k as f64 - 2.0) * p.dt, 0.0, 0.0]).collect();
        let learned = learn_forcing(&demo, &p, [1.0, 0.0, 0.0]).unwrap();
        assert!((learned[2][0] + 53.125).abs() < 1e-9);
    }

    #[test]
    fn rejects_short_and_nan() {
        let p = DmpParams::default();
        assert!(matches!(learn_forcing(&[[0.0; 3]; 2], &p, [0.0; 3]), Err(DmpError::DemoTooShort(2))));
        let mut demo = vec![[0.0; 3]; 5];
        demo[3][1] = f64::NAN;
        assert!(matches!(
            learn_forcing(&demo, &p, [0.0; 3]),
            Err(DmpError::NonFinite { index: 3, .. })
        ));
    }

    #[test]
    fn unforced_converges() {
        for integrator in [Integrator::Euler, Integrator::Rk4] {
            let params = DmpParams { integrator, ..Default::default() };
            let m = DmpModel { params, y_init: [0.0; 3], y_goal: [1.0, 1.0, 1.0], forcing: vec![[0.0; 3]; 151], basis: None };
            let tr = m.rollout().unwrap();
            let last = tr.channel("y.x").unwrap()[150];
            assert!((last - 1.0).abs() <= 1e-2, "{integrator:?}: {last}");
        }
    }

    #[test]
    fn diverging_gains_are_reported() {
        let params = DmpParams { alpha: 1e4, beta: 1e4, ..Default::default() };
        let m = DmpModel { params, y_init: [0.0; 3], y_goal: [1.0; 3], forcing: vec![[0.0; 3]; 400], basis: None };
        assert!(matches!(m.rollout(), Err(DmpError::Diverged(_))));
    }

    #[test]
    fn adjoint_matches_perturbation() {
        let m = DmpModel {
            params: DmpParams::default(),
            y_init: [0.0; 3],
            y_goal: [1.0; 3],
            forcing: vec![[0.0; 3]; 20],
            basis: None,
        };
        let sens = m.endpoint_sensitivity(20);
        let base = m.positions(&m.forcing, m.y_init, m.y_goal).unwrap();
        for k in [0, 5, 18, 19] {
            let mut f = m.forcing.clone();
            f[k][0] += 1.0;
            let y = m.positions(&f, m.y_init, m.y_goal).unwrap();
            assert!((y[19][0] - base[19][0] - sens[k]).abs() < 1e-12);
        }
    }
}
