//! Experiment configuration files (TOML).
//!
//! ```toml
//! [model]
//! returns_to_scale = 1.5
//! interventions = [{ step = 50, param = "exploration_prob", value = 0.0 }]
//!
//! [smc]
//! ci_width_threshold = 1.0
//! master_seed = 7
//!
//! [query]
//! path = "queries/transient.quatex"
//!
//! [sweep]
//! param_name = "returns_to_scale"
//! values = [0.9, 1.0, 1.1]
//!
//! [compare]
//! pairs = [[0.9, 1.0], [1.0, 1.1]]
//!
//! [output]
//! dir = "out/alpha"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.
//! Omitted `model`/`smc` keys take their baseline defaults and are reported.

use std::fs;
use std::path::{Path, PathBuf};

use islet_core::model::{validate_value, ParamName};
use islet_core::{parse, ModelParams, QuerySpec, SmcSettings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub smc: SmcSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QuerySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param_name: ParamName,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub pairs: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

/// A validated configuration plus everything derived from reading it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    /// `query.path` resolved and parsed, when present.
    pub query: Option<(PathBuf, String, QuerySpec)>,
    pub output_dir: PathBuf,
    /// Dotted keys that were absent and took their defaults.
    pub defaults_applied: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_owned()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Checks cross-field rules not expressed by the types.
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| CliError::config(format!("model.{e}")))?;
        self.smc.validate().map_err(|e| CliError::config(e.to_string()))?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(CliError::config("sweep.values is empty"));
            }
            for (i, &v) in sweep.values.iter().enumerate() {
                validate_value(sweep.param_name, v).map_err(|e| CliError::config(format!("sweep.values[{i}]: {e}")))?;
                if sweep.values[..i].contains(&v) {
                    return Err(CliError::config(format!("sweep.values[{i}] repeats {v}")));
                }
            }
        }
        if let Some(compare) = &self.compare {
            let Some(sweep) = &self.sweep else {
                return Err(CliError::config("compare.pairs requires a [sweep] section"));
            };
            for (i, pair) in compare.pairs.iter().enumerate() {
                for v in pair {
                    if !sweep.values.contains(v) {
                        return Err(CliError::config(format!("compare.pairs[{i}] references {v}, which is not a sweep value")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Model parameters with `param` set to a sweep value.
    pub fn model_at(&self, param: ParamName, value: f64) -> ModelParams {
        let mut m = self.model.clone();
        m.set(param, value);
        m
    }
}

/// Reads, validates and resolves a config file.
pub fn load(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut loaded = load_str(&text, path.parent().unwrap_or(Path::new(".")))?;
    loaded.output_dir = resolve(path.parent(), &loaded.config.output.dir);
    Ok(loaded)
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() && !b.as_os_str().is_empty() => b.join(p),
        _ => p.to_path_buf(),
    }
}

/// As [`load`], for text whose relative paths hang off `base`.
pub fn load_str(text: &str, base: &Path) -> Result<Loaded> {
    let config = ExperimentConfig::from_toml(text)?;
    config.validate()?;
    let raw: toml::Table = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    let defaults_applied = omitted_keys(&raw);
    let query = match &config.query {
        Some(q) => {
            let qpath = resolve(Some(base), &q.path);
            let source = fs::read_to_string(&qpath)
                .map_err(|e| CliError::config(format!("query.path {}: {e}", qpath.display())))?;
            let spec = parse(&source).map_err(|e| CliError::config(format!("{}: {e}", qpath.display())))?;
            Some((qpath, source, spec))
        }
        None => None,
    };
    let output_dir = resolve(Some(base), &config.output.dir);
    Ok(Loaded { config, query, output_dir, defaults_applied })
}

fn omitted_keys(raw: &toml::Table) -> Vec<String> {
    let defaults = toml::Table::try_from(ExperimentConfig {
        model: ModelParams::default(),
        smc: SmcSettings::default(),
        query: None,
        sweep: None,
        compare: None,
        output: OutputSection::default(),
    })
    .expect("defaults serialize");
    let mut out = Vec::new();
    for section in ["model", "smc", "output"] {
        let given = raw.get(section).and_then(|v| v.as_table());
        if let Some(toml::Value::Table(keys)) = defaults.get(section) {
            for key in keys.keys() {
                if !given.is_some_and(|g| g.contains_key(key)) {
                    out.push(format!("{section}.{key}"));
                }
            }
        }
    }
    out
}

impl Loaded {
    pub fn require_query(&self) -> Result<&QuerySpec> {
        self.query.as_ref().map(|(_, _, q)| q).ok_or_else(|| CliError::config("missing [query] section"))
    }

    pub fn query_source(&self) -> &str {
        self.query.as_ref().map_or("", |(_, s, _)| s.as_str())
    }

    /// Short content hash of everything that determines an estimation's
    /// samples: model, SMC settings and query text.
    pub fn config_hash(&self, model: &ModelParams) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            model: &'a ModelParams,
            smc: &'a SmcSettings,
            query: &'a str,
        }
        let key = Key { model, smc: &self.config.smc, query: self.query_source() };
        let text = toml::to_string(&key).expect("hash key serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[model]
returns_to_scale = 1.1
interventions = [{ step = 50, param = "exploration_prob", value = 0.0 }]

[smc]
master_seed = 9
block_size = 10
max_runs = 100

[sweep]
param_name = "returns_to_scale"
values = [0.9, 1.0, 1.1]

[compare]
pairs = [[0.9, 1.1]]

[output]
dir = "results"
"#;

    #[test]
    fn defaults_are_baseline_and_reported() {
        let loaded = load_str("", Path::new(".")).unwrap();
        assert_eq!(loaded.config.model, ModelParams::default());
        assert_eq!(loaded.config.smc, SmcSettings::default());
        assert!(loaded.defaults_applied.contains(&"model.exploration_prob".to_owned()));
        assert!(loaded.defaults_applied.contains(&"smc.block_size".to_owned()));
        assert!(loaded.defaults_applied.contains(&"output.dir".to_owned()));
    }

    #[test]
    fn explicit_keys_are_not_reported() {
        let loaded = load_str(FULL, Path::new("/tmp/cfg")).unwrap();
        assert!(!loaded.defaults_applied.contains(&"model.returns_to_scale".to_owned()));
        assert!(loaded.defaults_applied.contains(&"model.skill_weight".to_owned()));
        assert_eq!(loaded.output_dir, Path::new("/tmp/cfg/results"));
        assert_eq!(loaded.config.model.interventions[0].param, ParamName::ExplorationProb);
    }

    #[test]
    fn effective_config_round_trips() {
        for text in ["", FULL, "[model]\nsignal_decay = inf\n"] {
            let cfg = ExperimentConfig::from_toml(text).unwrap();
            let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(cfg, again);
        }
    }

    fn config_err(text: &str) -> String {
        let err = load_str(text, Path::new(".")).unwrap_err();
        assert_eq!(err.kind, crate::error::ErrorKind::Config);
        err.message
    }

    #[test]
    fn typos_and_ranges_are_rejected_with_field_names() {
        assert!(config_err("[model]\nepsilon = 0.2\n").contains("epsilon"));
        assert!(config_err("[model]\nexploration_prob = 1.5\n").contains("model.exploration_prob out of [0,1]"));
        assert!(config_err("[smc]\nblock_size = 1\n").contains("smc.block_size"));
        assert!(config_err("[sweep]\nparam_name = \"returns_to_scale\"\nvalues = []\n").contains("empty"));
        assert!(config_err("[sweep]\nparam_name = \"returns_to_scale\"\nvalues = [1.0, 1.0]\n").contains("repeats"));
        assert!(config_err("[sweep]\nparam_name = \"alpha\"\nvalues = [1.0]\n").contains("alpha"));
        let bad_pair = "[sweep]\nparam_name = \"signal_decay\"\nvalues = [1.0, 3.0]\n[compare]\npairs = [[1.0, 5.0]]\n";
        assert!(config_err(bad_pair).contains("compare.pairs[0] references 5"));
        assert!(config_err("[query]\npath = \"/nonexistent/q.quatex\"\n").contains("query.path"));
        assert!(config_err("[model]\ninterventions = [{ step = 500, param = \"exploration_prob\", value = 0.0 }]\n")
            .contains("interventions[0].step"));
    }

    #[test]
    fn hash_tracks_model_settings_and_query() {
        let loaded = load_str(FULL, Path::new(".")).unwrap();
        let base = loaded.config_hash(&loaded.config.model);
        assert_eq!(base.len(), 16);
        assert_eq!(base, loaded.config_hash(&loaded.config.model));
        let other = loaded.config.model_at(ParamName::ReturnsToScale, 0.9);
        assert_ne!(base, loaded.config_hash(&other));
    }
}
