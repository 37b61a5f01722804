//! Run configuration, JSON (de)serialization and dotted-path overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::Env;
use crate::error::{Error, Result};
use crate::inner::PpoConfig;
use crate::model::{ActorCritic, NetworkConfig};
use crate::outer::OuterStrategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Method name recorded in summaries and score files.
    #[serde(default = "default_label")]
    pub label: String,
    pub env: String,
    pub ppo: PpoConfig,
    #[serde(default)]
    pub outer: OuterStrategy,
    #[serde(default)]
    pub network: NetworkConfig,
    pub total_transitions: u64,
    #[serde(default = "default_num_evals")]
    pub num_intermediate_evals: u64,
    #[serde(default = "default_intermediate_episodes")]
    pub eval_episodes_intermediate: u64,
    #[serde(default = "default_absolute_episodes")]
    pub absolute_eval_episodes: u64,
    #[serde(default)]
    pub seed: u64,
    /// Root of the evaluation streams. Derived from `seed` when absent.
    #[serde(default)]
    pub eval_seed: Option<u64>,
    /// Zero the inner Adam moments at the start of every outer iteration.
    #[serde(default)]
    pub reset_inner_optimizer: bool,
}

fn default_label() -> String {
    "ppo".to_string()
}

fn default_num_evals() -> u64 {
    20
}

fn default_intermediate_episodes() -> u64 {
    128
}

fn default_absolute_episodes() -> u64 {
    1280
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let env = Env::make(&self.env)?;
        self.ppo.validate()?;
        self.outer.validate()?;
        ActorCritic::for_env(&env, &self.network)?;
        let batch = self.ppo.batch_size() as u64;
        if self.total_transitions < batch {
            return Err(Error::Config(format!(
                "total_transitions = {} is smaller than one iteration ({batch} transitions)",
                self.total_transitions
            )));
        }
        if self.num_intermediate_evals == 0 {
            return Err(Error::Config("num_intermediate_evals must be >= 1".into()));
        }
        if self.eval_episodes_intermediate == 0 || self.absolute_eval_episodes == 0 {
            return Err(Error::Config("evaluation episode counts must be >= 1".into()));
        }
        Ok(())
    }

    /// Whole outer iterations that fit in the transition budget.
    pub fn total_iterations(&self) -> u64 {
        self.total_transitions / self.ppo.batch_size() as u64
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Canonical pretty JSON with a trailing newline. Every field is written,
    /// so the output replays to the same run.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn from_value(v: Value) -> Result<RunConfig> {
        Ok(serde_json::from_value(v)?)
    }

    /// Applies `path=value` overrides and re-validates field names through
    /// deserialization.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<RunConfig> {
        let mut v = self.to_value();
        for o in overrides {
            let (path, raw) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not of the form key=value", o.as_ref())))?;
            set_path(&mut v, path.trim(), parse_scalar(raw.trim()))?;
        }
        Self::from_value(v).map_err(|e| Error::Config(format!("after overrides: {e}")))
    }
}

/// Interprets `raw` as JSON if possible, else as a bare string.
pub fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets `root.a.b.c = value`. Intermediate keys must exist; numeric
/// segments index into arrays (`axes.0.values`). The final object key may be
/// new.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    if path.is_empty() {
        return Err(Error::Config("empty override path".into()));
    }
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().expect("non-empty path");
    let mut cur = root;
    for p in parts {
        cur = match cur {
            Value::Object(map) => map.get_mut(p),
            Value::Array(items) => p.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .filter(|c| c.is_object() || c.is_array())
        .ok_or_else(|| Error::Config(format!("override path `{path}`: `{p}` is not an object or array")))?;
    }
    match cur {
        Value::Object(map) => {
            map.insert(last.to_string(), value);
            Ok(())
        }
        Value::Array(items) => match last.parse::<usize>().ok().and_then(|i| items.get_mut(i)) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::Config(format!("override path `{path}`: index `{last}` out of range"))),
        },
        _ => Err(Error::Config(format!("override path `{path}` does not name an object field"))),
    }
}

/// Reads `root.a.b.c`.
pub fn get_path<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(root, |cur, p| match cur {
        Value::Array(items) => p.parse::<usize>().ok().and_then(|i| items.get(i)),
        _ => cur.get(p),
    })
}
