//! `--config` file: TOML overrides applied on top of a scenario.
//!
//! ```toml
//! seed = 3
//! max_ticks = 2500
//!
//! [optimizer]
//! lambda1 = 20.0
//! max_iters = 4000
//!
//! [learn]
//! samples = 150
//! ```
//!
//! Tables are merged key by key, so a partial `[optimizer]` only touches the
//! keys it names.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;
use tamp_core::opt::OptConfig;
use tamp_core::sim::{LearnConfig, ScenarioSpec};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_ticks: Option<usize>,
    pub optimizer: Option<toml::Table>,
    pub learn: Option<toml::Table>,
}

impl Overrides {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn apply(&self, spec: &mut ScenarioSpec) -> Result<()> {
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(m) = self.max_ticks {
            spec.max_ticks = m;
        }
        if let Some(t) = &self.optimizer {
            spec.optimizer = merge(&spec.optimizer, t).context("[optimizer]")?;
        }
        if let Some(t) = &self.learn {
            spec.learn = merge(&spec.learn, t).context("[learn]")?;
        }
        Ok(())
    }

    pub fn learn(&self, base: &LearnConfig) -> Result<LearnConfig> {
        match &self.learn {
            Some(t) => merge(base, t).context("[learn]"),
            None => Ok(base.clone()),
        }
    }

    pub fn optimizer(&self, base: &OptConfig) -> Result<OptConfig> {
        match &self.optimizer {
            Some(t) => merge(base, t).context("[optimizer]"),
            None => Ok(base.clone()),
        }
    }
}

/// `base` with the keys of `table` replaced, round-tripped through JSON.
fn merge<T: serde::Serialize + serde::de::DeserializeOwned>(base: &T, table: &toml::Table) -> Result<T> {
    let mut v = serde_json::to_value(base)?;
    let patch = serde_json::to_value(table)?;
    let obj = v.as_object_mut().expect("config serialises to an object");
    for (k, val) in patch.as_object().expect("table") {
        if !obj.contains_key(k) {
            anyhow::bail!("unknown key `{k}`");
        }
        obj.insert(k.clone(), val.clone());
    }
    Ok(serde_json::from_value(v)?)
}
