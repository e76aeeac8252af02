//! TOML run configuration, flag overrides and the configuration digest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use drugsense::cohort::{FinetuneSpec, LabelPolicy, SchemaMap, SplitSpec, Tissue};
use drugsense::gateway::BackendConfig;
use drugsense::{FeatureSet, SerializationOrder, Setting};
use drugsense_service::ServiceConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub pairs: PathBuf,
    pub smiles: Option<PathBuf>,
    pub mutations: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            pairs: "pairs.csv".into(),
            smiles: None,
            mutations: None,
            output: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub theta: f64,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            theta: LabelPolicy::DEFAULT_THETA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            fraction: SplitSpec::DEFAULT_TRAIN_FRACTION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Prompt format used by `prompts` and `predict`, and the setting recorded in reports.
    pub setting: Setting,
    pub serialization_order: SerializationOrder,
    /// Maximum in-flight backend requests during `predict`.
    pub parallelism: usize,
    /// Response cache directory; defaults to `<output>/cache`.
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            setting: Setting::ZeroShot,
            serialization_order: SerializationOrder::default(),
            parallelism: 4,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tissues: Vec<Tissue>,
    pub feature_sets: Vec<FeatureSet>,
    pub paths: Paths,
    pub schema: SchemaMap,
    pub policy: PolicySection,
    pub split: SplitSection,
    pub pipeline: PipelineSection,
    pub finetune: FinetuneSpec,
    pub backend: BackendConfig,
    pub service: ServiceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tissues: vec![Tissue::Luad],
            feature_sets: FeatureSet::ablation_variants().to_vec(),
            paths: Paths::default(),
            schema: SchemaMap::default(),
            policy: PolicySection::default(),
            split: SplitSection::default(),
            pipeline: PipelineSection::default(),
            finetune: FinetuneSpec::default(),
            backend: BackendConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

/// Values given on the command line; each replaces its config counterpart.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub theta: Option<f64>,
    pub features: Vec<FeatureSet>,
    pub tissues: Vec<Tissue>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
}

impl RunConfig {
    /// Parse a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.paths.pairs);
        join(&mut self.paths.output);
        for p in [
            &mut self.paths.smiles,
            &mut self.paths.mutations,
            &mut self.pipeline.cache_dir,
            &mut self.service.cache_dir,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.split.seed = seed;
        }
        if let Some(theta) = o.theta {
            self.policy.theta = theta;
        }
        if !o.features.is_empty() {
            self.feature_sets = o.features.clone();
        }
        if !o.tissues.is_empty() {
            self.tissues = o.tissues.clone();
        }
        if let Some(out) = &o.out {
            self.paths.output = out.clone();
        }
        if let Some(n) = o.parallelism {
            self.pipeline.parallelism = n;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tissues.is_empty() {
            return Err(CliError::invalid("`tissues` must list at least one tissue"));
        }
        if self.feature_sets.is_empty() {
            return Err(CliError::invalid("`feature_sets` must not be empty"));
        }
        for fs in &self.feature_sets {
            if let Some(f) = fs
                .iter()
                .find(|f| !self.pipeline.serialization_order.features().contains(f))
            {
                return Err(CliError::invalid(format!(
                    "feature set {} uses `{}`, which the serialization order omits",
                    fs.slug(),
                    f.key()
                )));
            }
        }
        self.policy_spec()?;
        self.split_spec()?;
        if self.pipeline.parallelism == 0 {
            return Err(CliError::invalid("pipeline.parallelism must be >= 1"));
        }
        self.finetune.validate().map_err(CliError::invalid)?;
        self.backend.validate().map_err(CliError::invalid)?;
        Ok(())
    }

    pub fn policy_spec(&self) -> Result<LabelPolicy> {
        LabelPolicy::new(self.policy.theta).map_err(CliError::invalid)
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.split.fraction, self.split.seed).map_err(CliError::invalid)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.pipeline
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.paths.output.join("cache"))
    }

    /// Service settings with the backend and serialization order of this run.
    pub fn service_config(&self) -> ServiceConfig {
        ServiceConfig {
            serialization_order: self.pipeline.serialization_order.clone(),
            backend: self.backend.clone(),
            ..self.service.clone()
        }
    }

    /// Hex SHA-256 over every setting that shapes artifact content plus the bytes of
    /// each input table. Locations, parallelism, caching and service settings are
    /// left out so the digest survives moving the project or tuning throughput.
    pub fn digest(&self) -> Result<String> {
        let mut value = serde_json::to_value(self).expect("config encodes");
        let obj = value.as_object_mut().expect("config is a table");
        obj.remove("paths");
        obj.remove("service");
        if let Some(p) = obj.get_mut("pipeline").and_then(|p| p.as_object_mut()) {
            p.remove("parallelism");
            p.remove("cache_dir");
        }

        let mut inputs = BTreeMap::new();
        inputs.insert("pairs", file_sha256(&self.paths.pairs)?);
        for (name, path) in [
            ("smiles", &self.paths.smiles),
            ("mutations", &self.paths.mutations),
        ] {
            if let Some(path) = path {
                inputs.insert(name, file_sha256(path)?);
            }
        }
        let canonical = serde_json::json!({ "config": value, "inputs": inputs });
        let bytes = serde_json::to_vec(&canonical).expect("digest input encodes");
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
