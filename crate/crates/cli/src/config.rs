//! Experiment configuration: one JSON file, unknown keys rejected everywhere.

use std::fs;
use std::path::{Path, PathBuf};

use climfs::baselines::VariantKind;
use climfs::dataset::{MissingScenario, PlantedClusters};
use climfs::model::FitConfig;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A dataset manifest (resolved relative to the config file).
    Manifest(PathBuf),
    /// The planted-cluster generator.
    Synthetic(PlantedClusters),
}

/// Model hyperparameters. When `n_clusters` is absent it is taken from the labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSection {
    pub config: FitConfig,
    pub infer_clusters: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            config: FitConfig::default(),
            infer_clusters: true,
        }
    }
}

impl<'de> Deserialize<'de> for FitSection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        let infer_clusters = value.as_object().is_some_and(|m| !m.contains_key("n_clusters"));
        let config = FitConfig::deserialize(value).map_err(|e| D::Error::custom(format!("fit: {e}")))?;
        Ok(Self { config, infer_clusters })
    }
}

impl Serialize for FitSection {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.config.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// k-means repetitions per report.
    pub runs: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { runs: 50, seed: 0 }
    }
}

fn default_methods() -> Vec<VariantKind> {
    vec![VariantKind::Full]
}

fn default_ratios() -> Vec<f64> {
    vec![0.1, 0.2, 0.3, 0.4, 0.5]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Scale every sample column of every view to unit length before masking.
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Missing-data protocol; omitted means the data is used as given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<MissingScenario>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default = "default_methods")]
    pub methods: Vec<VariantKind>,
    #[serde(default = "default_ratios")]
    pub feature_ratios: Vec<f64>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads, resolves relative manifest paths against the file's directory, and validates.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let DataSource::Manifest(p) = &mut cfg.data {
            if p.is_relative() {
                *p = path.parent().unwrap_or_else(|| Path::new(".")).join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces every seed (generator, scenario, fit, evaluation) with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        if let DataSource::Synthetic(g) = &mut self.data {
            g.seed = seed;
        }
        if let Some(s) = &mut self.scenario {
            s.seed = seed;
        }
        self.fit.config.seed = seed;
        self.eval.seed = seed;
    }

    /// Checks everything that does not need the data itself.
    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::Config(m));
        if self.feature_ratios.is_empty() {
            return err("feature_ratios must not be empty".into());
        }
        if let Some(r) = self.feature_ratios.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
            return err(format!("feature ratio {r} is outside (0, 1]"));
        }
        if self.eval.runs == 0 {
            return err("eval.runs must be at least 1".into());
        }
        if self.methods.is_empty() {
            return err("methods must not be empty".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return err(format!("method {m} listed twice"));
            }
        }
        if let Some(s) = &self.scenario {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let DataSource::Manifest(p) = &self.data {
            if !p.is_file() {
                return err(format!("manifest {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The parts that determine the masked dataset.
    pub(crate) fn data_key(&self) -> serde_json::Value {
        serde_json::json!({
            "data": self.data,
            "normalize": self.normalize,
            "scenario": self.scenario,
        })
    }

    /// The parts that determine a fitted model (the iteration cap excluded, so fits can be extended).
    pub(crate) fn fit_key(&self) -> serde_json::Value {
        let mut fit = serde_json::to_value(&self.fit.config).expect("fit config serializes");
        fit.as_object_mut().expect("fit config is an object").remove("max_iter");
        serde_json::json!({ "data": self.data_key(), "fit": fit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"data": {"synthetic": {"n_samples": 30, "n_clusters": 3, "n_views": 2,
        "informative": 3, "noise": 5, "seed": 1}}}"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert!(cfg.fit.infer_clusters);
        assert_eq!(cfg.methods, vec![VariantKind::Full]);
        assert_eq!(cfg.eval.runs, 50);
        assert!(cfg.normalize);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        let top = MINIMAL.replacen('{', r#"{"colour": 1, "#, 1);
        assert!(ExperimentConfig::from_json(&top).is_err());
        let nested = MINIMAL.replace("}}}", r#"}}, "fit": {"lamda": 1}}"#);
        let e = ExperimentConfig::from_json(&nested).unwrap_err().to_string();
        assert!(e.contains("lamda") && e.contains("line"), "{e}");
        let evals = MINIMAL.replace("}}}", r#"}}, "eval": {"run": 3}}"#);
        assert!(ExperimentConfig::from_json(&evals).is_err());
    }

    #[test]
    fn explicit_cluster_count_disables_inference() {
        let text = MINIMAL.replace("}}}", r#"}}, "fit": {"n_clusters": 4, "tol": "inf"}}"#);
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert!(!cfg.fit.infer_clusters);
        assert_eq!(cfg.fit.config.n_clusters, 4);
        assert!(cfg.fit.config.tol.is_infinite());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.feature_ratios = vec![0.2, 1.5];
        assert!(cfg.validate().is_err());
        cfg.feature_ratios = vec![0.2];
        cfg.methods = vec![VariantKind::Full, VariantKind::Full];
        assert!(cfg.validate().is_err());
        cfg.methods = vec![VariantKind::Full];
        cfg.data = DataSource::Manifest("/nonexistent/manifest.json".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_override_reaches_every_section() {
        let text = MINIMAL.replace("}}}", r#"}}, "scenario": {"kind": "mixed_missing", "delta": 0.3, "seed": 5}}"#);
        let mut cfg = ExperimentConfig::from_json(&text).unwrap();
        cfg.override_seed(42);
        let DataSource::Synthetic(g) = &cfg.data else { unreachable!() };
        assert_eq!(g.seed, 42);
        assert_eq!(cfg.scenario.unwrap().seed, 42);
        assert_eq!(cfg.fit.config.seed, 42);
        assert_eq!(cfg.eval.seed, 42);
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.fit.config, cfg.fit.config);
        assert_eq!(back.data, cfg.data);
    }
}
