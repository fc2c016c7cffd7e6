use serde::{Deserialize, Serialize};

/// `phi(t) = exp(-alpha_phase * t / tau)`; `alpha_phase` is normally chosen so
/// that the phase reaches 0.01 at the nominal duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalSystem {
    pub tau: f64,
    pub alpha_phase: f64,
    pub dt: f64,
}

impl CanonicalSystem {
    /// Phase decays to 0.01 after `samples - 1` steps.
    pub fn for_samples(tau: f64, dt: f64, samples: usize) -> Self {
        let duration = dt * samples.saturating_sub(1).max(1) as f64;
        Self { tau, alpha_phase: 100f64.ln() * tau / duration, dt }
    }

    pub fn phase(&self, k: usize) -> f64 {
        (-self.alpha_phase * k as f64 * self.dt / self.tau).exp()
    }

    pub fn phase_at(&self, t: f64) -> f64 {
        (-self.alpha_phase * t / self.tau).exp()
    }

    pub fn phases(&self, samples: usize) -> Vec<f64> {
        (0..samples).map(|k| self.phase(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decays_from_one_to_one_percent() {
        let cs = CanonicalSystem::for_samples(1.0, 0.02, 151);
        let p = cs.phases(151);
        assert_eq!(p[0], 1.0);
        assert!((p[150] - 0.01).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[1] < w[0]));
    }
}
