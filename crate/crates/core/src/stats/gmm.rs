//! Full-covariance Gaussian mixture over `(ln phase, x, y, z)` fitted by EM,
//! and Gaussian mixture regression on phase.
//!
//! The log of the phase is affine in time, so components stay local along
//! the motion instead of crowding into the end where the phase flattens out.
//! Conditioning on `ln phase` is the same as conditioning on phase.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DemoSet, DemoStats, StatsError};
use crate::dmp::CanonicalSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tol: f64,
    pub seed: u64,
    /// Added to covariance diagonals after every M-step.
    pub floor: f64,
    pub init: GmmInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmmInit {
    /// Seeded k-means++ on standardised `(phase, position)`.
    KMeans,
    /// Equal-count segments along the phase axis, so every component starts
    /// out spanning all demonstrations at its phase.
    PhaseSegments,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { components: 8, max_iter: 300, tol: 1e-10, seed: 0, floor: 1e-8, init: GmmInit::PhaseSegments }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vector4<f64>>,
    pub covs: Vec<Matrix4<f64>>,
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Precision matrix and log normaliser of one component.
struct Density {
    precision: Matrix4<f64>,
    log_norm: f64,
}

impl Density {
    fn new(cov: &Matrix4<f64>) -> Option<Self> {
        let chol = cov.cholesky()?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Some(Self { precision: chol.inverse(), log_norm: -0.5 * (4.0 * LN_2PI + logdet) })
    }

    fn log_pdf(&self, x: &Vector4<f64>, mean: &Vector4<f64>) -> f64 {
        let d = x - mean;
        self.log_norm - 0.5 * d.dot(&(self.precision * d))
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn kmeans_pp(data: &[Vector4<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vector4<f64>> {
    // standardise so phase and position contribute comparably
    let n = data.len() as f64;
    let mean = data.iter().fold(Vector4::zeros(), |a, x| a + x) / n;
    let scale = data
        .iter()
        .fold(Vector4::zeros(), |a: Vector4<f64>, x| a + (x - mean).component_mul(&(x - mean)))
        .map(|v| (v / n).sqrt().max(1e-12));
    let z: Vec<Vector4<f64>> = data.iter().map(|x| (x - mean).component_div(&scale)).collect();

    let mut centers = vec![z[rng.gen_range(0..z.len())]];
    let mut d2: Vec<f64> = z.iter().map(|x| (x - centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen_range(0.0..total);
            let mut idx = d2.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.gen_range(0..z.len())
        };
        let c = z[pick];
        for (d, x) in d2.iter_mut().zip(&z) {
            *d = d.min((x - c).norm_squared());
        }
        centers.push(c);
    }
    // a few Lloyd iterations
    let mut labels = vec![0usize; z.len()];
    for _ in 0..25 {
        for (l, x) in labels.iter_mut().zip(&z) {
            *l = (0..k)
                .min_by(|&a, &b| (x - centers[a]).norm_squared().total_cmp(&(x - centers[b]).norm_squared()))
                .unwrap_or(0);
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vector4<f64>> = z.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(x, _)| x).collect();
            if !members.is_empty() {
                *center = members.iter().fold(Vector4::zeros(), |a, x| a + *x) / members.len() as f64;
            }
        }
    }
    centers.into_iter().map(|c| c.component_mul(&scale) + mean).collect()
}

fn phase_segments(data: &[Vector4<f64>], k: usize, floor: Matrix4<f64>) -> Gmm {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a][0].total_cmp(&data[b][0]).then(a.cmp(&b)));
    let mut gmm = Gmm { weights: Vec::new(), means: Vec::new(), covs: Vec::new() };
    for c in 0..k {
        let seg = &order[c * data.len() / k..(c + 1) * data.len() / k];
        let n = seg.len() as f64;
        let mean = seg.iter().fold(Vector4::zeros(), |a, &i| a + data[i]) / n;
        let cov = seg.iter().fold(Matrix4::zeros(), |a, &i| a + (data[i] - mean) * (data[i] - mean).transpose()) / n;
        gmm.weights.push(n / data.len() as f64);
        gmm.means.push(mean);
        gmm.covs.push(cov + floor);
    }
    gmm
}

impl Gmm {
    pub fn fit(data: &[Vector4<f64>], cfg: &GmmConfig) -> Result<Self, StatsError> {
        let k = cfg.components;
        if k == 0 {
            return Err(StatsError::InvalidParameter("zero mixture components".into()));
        }
        if data.len() < 10 * k {
            return Err(StatsError::NotEnoughData { needed: 10 * k, have: data.len(), components: k });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = data.len();
        let floor = Matrix4::identity() * cfg.floor;
        let global_cov = {
            let m = data.iter().fold(Vector4::zeros(), |a, x| a + x) / n as f64;
            data.iter().fold(Matrix4::zeros(), |a, x| a + (x - m) * (x - m).transpose()) / n as f64
        };
        let mut gmm = match cfg.init {
            GmmInit::KMeans => Gmm {
                weights: vec![1.0 / k as f64; k],
                covs: vec![global_cov / (k * k) as f64 + floor; k],
                means: kmeans_pp(data, k, &mut rng),
            },
            GmmInit::PhaseSegments => phase_segments(data, k, floor),
        };
        let mut resp = vec![vec![0.0; k]; n];
        let mut prev = f64::NEG_INFINITY;
        let mut best = (f64::NEG_INFINITY, gmm.clone());
        let mut converged = false;
        let mut logp = vec![0.0; k];
        for _ in 0..cfg.max_iter {
            // E-step
            let mut ll = 0.0;
            let dens: Vec<Option<Density>> = gmm.covs.iter().map(Density::new).collect();
            for (x, r) in data.iter().zip(resp.iter_mut()) {
                for c in 0..k {
                    logp[c] = gmm.weights[c].ln()
                        + dens[c].as_ref().map_or(f64::NEG_INFINITY, |d| d.log_pdf(x, &gmm.means[c]));
                }
                let lse = log_sum_exp(&logp);
                ll += lse;
                for c in 0..k {
                    r[c] = (logp[c] - lse).exp();
                }
            }
            if ll > best.0 {
                best = (ll, gmm.clone());
            }
            if (ll - prev).abs() <= cfg.tol * ll.abs().max(1.0) {
                converged = true;
                break;
            }
            prev = ll;
            // M-step
            for c in 0..k {
                let nk: f64 = resp.iter().map(|r| r[c]).sum();
                if nk < 1e-12 {
                    // dead component: park it on a random sample
                    gmm.means[c] = data[rng.gen_range(0..n)];
                    gmm.covs[c] = global_cov / (k * k) as f64 + floor;
                    gmm.weights[c] = 1e-6;
                    continue;
                }
                let mean = data.iter().zip(&resp).fold(Vector4::zeros(), |a, (x, r)| a + x * r[c]) / nk;
                let cov = data
                    .iter()
                    .zip(&resp)
                    .fold(Matrix4::zeros(), |a, (x, r)| a + (x - mean) * (x - mean).transpose() * r[c])
                    / nk;
                gmm.means[c] = mean;
                gmm.covs[c] = 0.5 * (cov + cov.transpose()) + floor;
                gmm.weights[c] = nk / n as f64;
            }
            let s: f64 = gmm.weights.iter().sum();
            gmm.weights.iter_mut().for_each(|w| *w /= s);
        }
        if !converged {
            log::warn!("EM did not converge in {} iterations; keeping the best fit", cfg.max_iter);
            gmm = best.1;
        }
        Ok(gmm)
    }

    /// Conditional mean and covariance of position given phase.
    pub fn regress(&self, phase: f64) -> (Vector3<f64>, Matrix3<f64>) {
        let k = self.weights.len();
        let mut logh = vec![0.0; k];
        let mut mus = Vec::with_capacity(k);
        let mut sigmas = Vec::with_capacity(k);
        for c in 0..k {
            let (m, s) = (&self.means[c], &self.covs[c]);
            let spp = s[(0, 0)];
            let sxp = Vector3::new(s[(1, 0)], s[(2, 0)], s[(3, 0)]);
            let sxx = s.fixed_view::<3, 3>(1, 1).into_owned();
            let d = phase - m[0];
            logh[c] = self.weights[c].ln() - 0.5 * (LN_2PI + spp.ln() + d * d / spp);
            mus.push(Vector3::new(m[1], m[2], m[3]) + sxp * (d / spp));
            sigmas.push(sxx - sxp * sxp.transpose() / spp);
        }
        let lse = log_sum_exp(&logh);
        let h: Vec<f64> = logh.iter().map(|l| (l - lse).exp()).collect();
        let mean = (0..k).fold(Vector3::zeros(), |a, c| a + mus[c] * h[c]);
        let second = (0..k).fold(Matrix3::zeros(), |a, c| a + (sigmas[c] + mus[c] * mus[c].transpose()) * h[c]);
        let cov = second - mean * mean.transpose();
        (mean, nearest_psd(0.5 * (cov + cov.transpose())))
    }
}

fn nearest_psd(m: Matrix3<f64>) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return m;
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let out = eig.eigenvectors * Matrix3::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    0.5 * (out + out.transpose())
}

/// Phase-conditioned statistics of `demos`. A set whose demonstrations are
/// all identical has that demonstration as its exact mean and zero spread.
pub fn fit_gmm_gmr(demos: &DemoSet, cfg: &GmmConfig) -> Result<DemoStats, StatsError> {
    let samples = demos.samples();
    let phases = CanonicalSystem::for_samples(1.0, demos.dt, samples).phases(samples);
    let unique = demos.unique();
    if unique.len() == 1 {
        return DemoStats::from_moments(phases, unique[0].clone(), vec![[[0.0; 3]; 3]; samples]);
    }
    let data: Vec<Vector4<f64>> = demos
        .demos
        .iter()
        .flat_map(|d| d.iter().zip(&phases).map(|(p, &ph)| Vector4::new(ph.ln(), p[0], p[1], p[2])))
        .collect();
    let gmm = Gmm::fit(&data, cfg)?;
    let mut mean = Vec::with_capacity(samples);
    let mut cov = Vec::with_capacity(samples);
    for &ph in &phases {
        let (m, c) = gmm.regress(ph.ln());
        mean.push([m.x, m.y, m.z]);
        cov.push(std::array::from_fn(|i| std::array::from_fn(|j| c[(i, j)])));
    }
    DemoStats::from_moments(phases, mean, cov)
}
