//! TOML configuration: the experiment matrix, backend, corpus, decoding,
//! and output locations.
//!
//! Defaults mirror the fixed run setup: decoding (temperature 0.2, top-p
//! 0.9, top-k 40, 250 new tokens, penalties 1.0/0.0/0.0, seed 42), five
//! self-consistency samples, protocol `verdict_first`, parser mode `full`,
//! all five strategies, concurrency 1. Override precedence is
//! CLI flag > environment variable (`PROMPTAUDIT_BACKEND_URL`) > config
//! file > default. Validation collects every violation instead of
//! stopping at the first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageMap;
use crate::error::{Error, Result};
use crate::gateway::DecodingConfig;
use crate::parser::ParserMode;
use crate::prompt::{Protocol, Strategy};
use crate::runner::RunConfiguration;

pub const BACKEND_URL_ENV: &str = "PROMPTAUDIT_BACKEND_URL";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Root of the per-CVE folder tree.
    pub path: String,
    /// Dataset identifier; defaults to the final path component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Extra extension -> language entries layered over the default map.
    pub extensions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    /// "scripted" or "live".
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script_path: Option<String>,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: "live".into(),
            base_url: None,
            script_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcurrencySection {
    pub limit: usize,
}

impl Default for ConcurrencySection {
    fn default() -> Self {
        ConcurrencySection { limit: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetSection {
    /// Stratified subset size; absent means the full corpus.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    pub seed: u64,
}

impl Default for SubsetSection {
    fn default() -> Self {
        SubsetSection {
            size: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    /// Directory of template files; absent means the builtin set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<String>,
}

/// Full audit configuration. Scalar and array fields precede the table
/// sections so the TOML round-trip is well-formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub run_id: String,
    pub models: Vec<String>,
    pub strategies: Vec<String>,
    pub protocols: Vec<String>,
    pub parser_modes: Vec<String>,
    pub sc_samples: usize,
    pub corpus: CorpusSection,
    pub backend: BackendSection,
    pub decoding: DecodingConfig,
    pub concurrency: ConcurrencySection,
    pub output: OutputSection,
    pub subset: SubsetSection,
    pub prompts: PromptsSection,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            run_id: "run".into(),
            models: Vec::new(),
            strategies: Strategy::ALL.iter().map(|s| s.name().to_string()).collect(),
            protocols: vec![Protocol::VerdictFirst.name().to_string()],
            parser_modes: vec![ParserMode::Full.name().to_string()],
            sc_samples: 5,
            corpus: CorpusSection::default(),
            backend: BackendSection::default(),
            decoding: DecodingConfig::default(),
            concurrency: ConcurrencySection::default(),
            output: OutputSection::default(),
            subset: SubsetSection::default(),
            prompts: PromptsSection::default(),
        }
    }
}

/// CLI-level overrides (highest precedence).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend_url: Option<String>,
    pub out_dir: Option<String>,
    pub run_id: Option<String>,
    pub subset_size: Option<usize>,
    pub subset_seed: Option<u64>,
    pub concurrency: Option<usize>,
}

impl AuditConfig {
    /// Layer the environment and CLI values over the file values.
    pub fn apply_overrides(&mut self, overrides: &Overrides, env_backend_url: Option<&str>) {
        if let Some(url) = env_backend_url {
            self.backend.base_url = Some(url.to_string());
        }
        if let Some(url) = &overrides.backend_url {
            self.backend.base_url = Some(url.clone());
        }
        if let Some(dir) = &overrides.out_dir {
            self.output.dir = dir.clone();
        }
        if let Some(run_id) = &overrides.run_id {
            self.run_id = run_id.clone();
        }
        if let Some(size) = overrides.subset_size {
            self.subset.size = Some(size);
        }
        if let Some(seed) = overrides.subset_seed {
            self.subset.seed = seed;
        }
        if let Some(limit) = overrides.concurrency {
            self.concurrency.limit = limit;
        }
    }

    /// Check everything, reporting the complete violation list.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();

        if self.run_id.trim().is_empty() {
            violations.push("run_id must not be empty".to_string());
        }
        if self.corpus.path.trim().is_empty() {
            violations.push("corpus.path is required".to_string());
        }
        if self.models.is_empty() {
            violations.push("models must name at least one model".to_string());
        }
        for (field, values) in [
            ("strategies", &self.strategies),
            ("protocols", &self.protocols),
            ("parser_modes", &self.parser_modes),
        ] {
            if values.is_empty() {
                violations.push(format!("{field} must name at least one value"));
            }
        }
        for s in &self.strategies {
            if let Err(Error::Config(mut inner)) = Strategy::from_name(s).map(|_| ()) {
                violations.append(&mut inner);
            }
        }
        for p in &self.protocols {
            if let Err(Error::Config(mut inner)) = Protocol::from_name(p).map(|_| ()) {
                violations.append(&mut inner);
            }
        }
        for m in &self.parser_modes {
            if let Err(Error::Config(mut inner)) = ParserMode::from_name(m).map(|_| ()) {
                violations.append(&mut inner);
            }
        }

        match self.backend.kind.as_str() {
            "scripted" => {
                if self.backend.script_path.as_deref().unwrap_or("").is_empty() {
                    violations
                        .push("backend.kind = \"scripted\" requires backend.script_path".into());
                }
                if self.backend.base_url.is_some() {
                    violations.push(
                        "backend.base_url is meaningless with backend.kind = \"scripted\"".into(),
                    );
                }
            }
            "live" => {
                if self.backend.base_url.as_deref().unwrap_or("").is_empty() {
                    violations.push(format!(
                        "backend.kind = \"live\" requires backend.base_url (or the {BACKEND_URL_ENV} environment variable / --backend flag)"
                    ));
                }
                if self.backend.script_path.is_some() {
                    violations.push(
                        "backend.script_path is meaningless with backend.kind = \"live\"".into(),
                    );
                }
            }
            other => violations.push(format!(
                "unknown backend.kind '{other}' (valid: live, scripted)"
            )),
        }

        if let Err(Error::Config(mut inner)) = self.decoding.validate() {
            violations.append(&mut inner);
        }
        if self.sc_samples == 0 {
            violations.push("sc_samples must be >= 1".into());
        }
        if self.concurrency.limit == 0 {
            violations.push("concurrency.limit must be >= 1".into());
        }
        if self.subset.size == Some(0) {
            violations.push("subset.size must be >= 1 when set".into());
        }

        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(violations))
        }
    }

    /// Dataset identifier: explicit `corpus.id` or the corpus directory name.
    pub fn dataset_id(&self) -> String {
        if let Some(id) = &self.corpus.id {
            return id.clone();
        }
        Path::new(&self.corpus.path)
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("corpus")
            .to_string()
    }

    /// Language map with the configured extension overrides applied.
    pub fn language_map(&self) -> LanguageMap {
        LanguageMap::new().with_overrides(&self.corpus.extensions)
    }

    /// Expand the Cartesian matrix: models × strategies × protocols ×
    /// parser modes (dataset dimension is the single configured corpus).
    pub fn matrix(&self) -> Result<Vec<RunConfiguration>> {
        self.validate()?;
        let dataset_id = self.dataset_id();
        let strategies: Vec<Strategy> = self
            .strategies
            .iter()
            .map(|s| Strategy::from_name(s))
            .collect::<Result<_>>()?;
        let protocols: Vec<Protocol> = self
            .protocols
            .iter()
            .map(|p| Protocol::from_name(p))
            .collect::<Result<_>>()?;
        let parser_modes: Vec<ParserMode> = self
            .parser_modes
            .iter()
            .map(|m| ParserMode::from_name(m))
            .collect::<Result<_>>()?;

        let mut out = Vec::new();
        for model in &self.models {
            for &strategy in &strategies {
                for &protocol in &protocols {
                    for &parser_mode in &parser_modes {
                        out.push(RunConfiguration {
                            dataset_id: dataset_id.clone(),
                            model_id: model.clone(),
                            strategy,
                            protocol,
                            parser_mode,
                            decoding: self.decoding,
                            sc_samples: self.sc_samples,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.dir)
    }
}

/// Parse a TOML config file, applying defaults; no semantic validation.
pub fn read_config(path: &Path) -> Result<AuditConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// Parse and fully validate a config file.
pub fn load_config(path: &Path) -> Result<AuditConfig> {
    let config = read_config(path)?;
    config.validate()?;
    Ok(config)
}
