//! `Psi_i(phi) = exp(h_i (cos(phi - c_i) - 1))`, normalised and regressed by
//! least squares. The cosine kernel is taken literally even though the phase
//! only spans (0, 1]; on that range it behaves like a Gaussian in phase.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{axis, CanonicalSystem, DmpError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFit {
    pub basis: BasisSet,
    /// One weight vector per spatial axis.
    pub weights: [Vec<f64>; 3],
    pub amplitude: f64,
    /// Root-mean-square residual per axis.
    pub residual: [f64; 3],
}

impl BasisSet {
    /// `n` centres at the phase of uniformly spaced times over `samples`, with
    /// neighbours crossing at half activation.
    pub fn new(n: usize, canonical: &CanonicalSystem, samples: usize) -> Result<Self, DmpError> {
        if n < 2 {
            return Err(DmpError::InvalidParameter(format!("basis count {n} < 2")));
        }
        let last = samples.saturating_sub(1) as f64 * canonical.dt;
        let centers: Vec<f64> = (0..n)
            .map(|i| canonical.phase_at(last * i as f64 / (n - 1) as f64))
            .collect();
        let widths = (0..n)
            .map(|i| {
                let gap = if i + 1 < n { centers[i] - centers[i + 1] } else { centers[i - 1] - centers[i] };
                std::f64::consts::LN_2 / (1.0 - gap.cos())
            })
            .collect();
        Ok(Self { centers, widths })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn activation(&self, i: usize, phase: f64) -> f64 {
        (self.widths[i] * ((phase - self.centers[i]).cos() - 1.0)).exp()
    }

    /// Normalised activations at `phase`; sums to one.
    pub fn normalized(&self, phase: f64) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.len()).map(|i| self.activation(i, phase)).collect();
        let sum: f64 = raw.iter().sum();
        if sum > 0.0 {
            raw.into_iter().map(|a| a / sum).collect()
        } else {
            // far outside every kernel: fall back to the nearest centre
            let nearest = (0..self.len())
                .min_by(|&a, &b| {
                    (phase - self.centers[a]).abs().total_cmp(&(phase - self.centers[b]).abs())
                })
                .unwrap_or(0);
            (0..self.len()).map(|i| if i == nearest { 1.0 } else { 0.0 }).collect()
        }
    }

    fn design(&self, phases: &[f64]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(phases.len(), self.len());
        for (k, &p) in phases.iter().enumerate() {
            for (i, v) in self.normalized(p).into_iter().enumerate() {
                a[(k, i)] = v;
            }
        }
        a
    }

    /// Least-squares weights for `target` sampled at `phases`.
    pub fn fit(&self, target: &[[f64; 3]], phases: &[f64]) -> Result<BasisFit, DmpError> {
        if target.len() != phases.len() {
            return Err(DmpError::LengthMismatch { expected: phases.len(), got: target.len() });
        }
        if self.len() > phases.len() {
            return Err(DmpError::Regression(format!(
                "{} basis functions for {} samples",
                self.len(),
                phases.len()
            )));
        }
        let a = self.design(phases);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * 1e-12 * phases.len() as f64;
        if svd.singular_values.iter().any(|&s| s <= tol) {
            return Err(DmpError::Regression("design matrix is rank deficient".into()));
        }
        let mut weights: [Vec<f64>; 3] = Default::default();
        let mut residual = [0.0; 3];
        for d in 0..3 {
            let b = DVector::from_vec(axis(target, d));
            let w = svd.solve(&b, tol).map_err(|e| DmpError::Regression(e.to_string()))?;
            let r = &a * &w - &b;
            residual[d] = (r.norm_squared() / phases.len() as f64).sqrt();
            weights[d] = w.iter().copied().collect();
        }
        Ok(BasisFit { basis: self.clone(), weights, amplitude: 1.0, residual })
    }
}

impl BasisFit {
    pub fn evaluate(&self, phase: f64) -> [f64; 3] {
        let psi = self.basis.normalized(phase);
        let mut out = [0.0; 3];
        for (d, o) in out.iter_mut().enumerate() {
            *o = self.amplitude * psi.iter().zip(&self.weights[d]).map(|(p, w)| p * w).sum::<f64>();
        }
        out
    }

    pub fn reconstruct(&self, phases: &[f64]) -> Vec<[f64; 3]> {
        phases.iter().map(|&p| self.evaluate(p)).collect()
    }
}
