//! Skill bundles: a DMP learned from the statistics of one or more
//! demonstrations, with the variance weights of its forcing objective.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::dmp::{learn_quat_forcing, Demo, DmpModel, DmpParams, QuatDmpModel};
use crate::stats::{fit_gmm_gmr, DemoSet, DemoStats, GmmConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillBundle {
    pub schema_version: u32,
    pub skill: String,
    pub model: DmpModel,
    pub stats: DemoStats,
    /// Forcing-objective weights, one row per sample.
    pub weights: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<QuatDmpModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    /// Common length after resampling; defaults to the first demo's.
    pub samples: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    /// Basis functions fitted to the learned forcing (capped at the sample count).
    pub bases: usize,
    pub gmm: GmmConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        let p = DmpParams::default();
        Self { samples: None, alpha: p.alpha, beta: p.beta, tau: p.tau, bases: 25, gmm: GmmConfig::default() }
    }
}

fn nlerp(a: [f64; 4], b: [f64; 4], s: f64) -> [f64; 4] {
    let sign = if a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let q: [f64; 4] = std::array::from_fn(|i| (1.0 - s) * a[i] + s * sign * b[i]);
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

fn resample_quats(q: &[[f64; 4]], samples: usize) -> Vec<[f64; 4]> {
    let n = q.len();
    (0..samples)
        .map(|k| {
            let s = k as f64 * (n - 1) as f64 / (samples - 1) as f64;
            let i = (s.floor() as usize).min(n - 2);
            nlerp(q[i], q[i + 1], s - i as f64)
        })
        .collect()
}

pub fn learn_skill(skill: &str, demos: &[Demo], cfg: &LearnConfig) -> Result<SkillBundle, SimError> {
    let first = demos.first().ok_or_else(|| SimError::Scenario(format!("skill `{skill}` has no demonstrations")))?;
    let samples = cfg.samples.unwrap_or(first.positions.len());
    let set = DemoSet::new(&demos.iter().map(|d| (d.dt, d.positions.clone())).collect::<Vec<_>>(), samples)?;
    let stats = fit_gmm_gmr(&set, &cfg.gmm)?;
    let params = DmpParams { alpha: cfg.alpha, beta: cfg.beta, tau: cfg.tau, dt: set.dt, ..DmpParams::default() };
    let model = DmpModel::learn(&stats.mean, params, Some(cfg.bases.min(samples)))?;
    let with_q = demos.iter().filter(|d| d.orientations.is_some()).count();
    let orientation = match with_q {
        0 => None,
        n if n == demos.len() => {
            let q = resample_quats(first.orientations.as_deref().expect("checked"), samples);
            let mut m = QuatDmpModel::new(q[0], q[samples - 1], samples);
            m.alpha = cfg.alpha;
            m.beta = cfg.beta;
            m.tau = cfg.tau;
            m.dt = set.dt;
            m.forcing = learn_quat_forcing(&q, &m)?;
            Some(m)
        }
        _ => return Err(SimError::Scenario(format!("skill `{skill}`: some demos lack orientation columns"))),
    };
    Ok(SkillBundle {
        schema_version: SCHEMA_VERSION,
        skill: skill.to_owned(),
        weights: stats.w.clone(),
        model,
        stats,
        orientation,
    })
}

impl SkillBundle {
    pub fn samples(&self) -> usize {
        self.model.samples()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        super::check_schema(&v, SCHEMA_VERSION)?;
        Ok(serde_json::from_value(v)?)
    }
}
