//! Uniform `generate()` access to model backends.
//!
//! Two backends implement the same trait: a live HTTP backend speaking the
//! local model-server protocol (`POST <base_url>/api/generate`, Ollama
//! compatible) and a deterministic scripted backend for tests, keyed on
//! (model_id, prompt_digest). Decoding parameters are fixed by
//! [`DecodingConfig`]; per-vote seed decorrelation adds the vote index to
//! the base seed so repeated self-consistency sampling can differ while
//! staying reproducible.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prompt::RenderedPrompt;

/// Decoding parameters shared by every request of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub max_new_tokens: u32,
    pub repetition_penalty: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub seed: u64,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            temperature: 0.2,
            top_p: 0.9,
            top_k: 40,
            max_new_tokens: 250,
            repetition_penalty: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            seed: 42,
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.temperature < 0.0 {
            violations.push(format!(
                "decoding.temperature must be >= 0 (got {})",
                self.temperature
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            violations.push(format!(
                "decoding.top_p must be in (0, 1] (got {})",
                self.top_p
            ));
        }
        if self.top_k < 1 {
            violations.push("decoding.top_k must be >= 1".into());
        }
        if self.max_new_tokens < 1 {
            violations.push("decoding.max_new_tokens must be >= 1".into());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(violations))
        }
    }
}

/// Raw completion plus bookkeeping; `response_text` is stored verbatim,
/// whitespace included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub model_id: String,
    pub prompt_digest: String,
    pub response_text: String,
    pub latency_ms: u64,
    pub attempt: u32,
}

/// SHA-256 content hash of the full rendered prompt text, lowercase hex.
pub fn prompt_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Backend availability report.
#[derive(Debug, Clone, Serialize)]
pub struct Availability {
    pub available: bool,
    pub model_present: Option<bool>,
    pub diagnostic: String,
}

pub trait Backend: Send + Sync {
    /// Obtain the raw completion for `prompt` under `config`. `vote` is
    /// the self-consistency vote index (0 for single-completion
    /// strategies); the live backend offsets the seed by it, the scripted
    /// backend uses it to index the response list.
    fn generate(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        config: &DecodingConfig,
        vote: usize,
    ) -> Result<GenerationRecord>;

    fn healthcheck(&self, model_id: &str) -> Availability;

    fn kind(&self) -> &'static str;
}

/// Returned by the scripted backend when no response is scripted for a key.
pub const SCRIPT_FALLBACK_RESPONSE: &str = "UNKNOWN-SCRIPT";

/// One scripted entry: `responses[i]` answers the i-th vote.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub model: String,
    pub prompt_digest: String,
    pub responses: Vec<String>,
}

/// Deterministic backend: a pure function of (model_id, prompt_digest, vote).
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    entries: HashMap<(String, String), Vec<String>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        ScriptedBackend::default()
    }

    /// Load line-delimited [`ScriptEntry`] records.
    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut backend = ScriptedBackend::new();
        for (number, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(&line).map_err(|e| {
                Error::Input(format!(
                    "{}:{}: bad script record: {e}",
                    path.display(),
                    number + 1
                ))
            })?;
            backend.insert(entry);
        }
        Ok(backend)
    }

    pub fn insert(&mut self, entry: ScriptEntry) {
        self.entries
            .insert((entry.model, entry.prompt_digest), entry.responses);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Write script entries as JSONL (helper for tests and demos).
pub fn write_script(path: &Path, entries: &[ScriptEntry]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for entry in entries {
        serde_json::to_writer(&mut file, entry).map_err(|e| Error::Input(e.to_string()))?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

impl Backend for ScriptedBackend {
    fn generate(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        _config: &DecodingConfig,
        vote: usize,
    ) -> Result<GenerationRecord> {
        let digest = prompt_digest(&prompt.text);
        let response_text = self
            .entries
            .get(&(model_id.to_string(), digest.clone()))
            .and_then(|responses| responses.get(vote))
            .cloned()
            .unwrap_or_else(|| SCRIPT_FALLBACK_RESPONSE.to_string());
        Ok(GenerationRecord {
            model_id: model_id.to_string(),
            prompt_digest: digest,
            response_text,
            latency_ms: 0,
            attempt: 0,
        })
    }

    fn healthcheck(&self, _model_id: &str) -> Availability {
        Availability {
            available: true,
            model_present: Some(true),
            diagnostic: format!("scripted backend with {} entries", self.entries.len()),
        }
    }

    fn kind(&self) -> &'static str {
        "scripted"
    }
}

/// HTTP backend for a local model server.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    base_url: String,
    agent: ureq::Agent,
    max_attempts: u32,
    backoff: Duration,
}

impl LiveBackend {
    pub fn new(base_url: &str) -> Self {
        LiveBackend::with_retry(base_url, 3, Duration::from_millis(250))
    }

    pub fn with_retry(base_url: &str, max_attempts: u32, backoff: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(5))
            .timeout(Duration::from_secs(600))
            .build();
        LiveBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
            max_attempts: max_attempts.max(1),
            backoff,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn request_body(
        model_id: &str,
        prompt: &RenderedPrompt,
        config: &DecodingConfig,
        vote: usize,
    ) -> serde_json::Value {
        serde_json::json!({
            "model": model_id,
            "prompt": prompt.text,
            "stream": false,
            "options": {
                "temperature": config.temperature,
                "top_p": config.top_p,
                "top_k": config.top_k,
                "num_predict": config.max_new_tokens,
                "repeat_penalty": config.repetition_penalty,
                "frequency_penalty": config.frequency_penalty,
                "presence_penalty": config.presence_penalty,
                "seed": config.seed.wrapping_add(vote as u64),
            },
        })
    }
}

impl Backend for LiveBackend {
    fn generate(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        config: &DecodingConfig,
        vote: usize,
    ) -> Result<GenerationRecord> {
        let url = format!("{}/api/generate", self.base_url);
        let body = Self::request_body(model_id, prompt, config, vote);
        let started = Instant::now();
        let mut last_error = String::new();

        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.agent.post(&url).send_json(body.clone()) {
                Ok(response) => {
                    let value: serde_json::Value =
                        response.into_json().map_err(|e| Error::Backend {
                            model: model_id.to_string(),
                            message: format!("invalid JSON from backend: {e}"),
                        })?;
                    let Some(text) = value.get("response").and_then(|v| v.as_str()) else {
                        return Err(Error::Backend {
                            model: model_id.to_string(),
                            message: "backend reply carried no 'response' field".into(),
                        });
                    };
                    return Ok(GenerationRecord {
                        model_id: model_id.to_string(),
                        prompt_digest: prompt_digest(&prompt.text),
                        response_text: text.to_string(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt,
                    });
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::Backend {
            model: model_id.to_string(),
            message: format!(
                "{} attempts failed; last error: {last_error}",
                self.max_attempts
            ),
        })
    }

    fn healthcheck(&self, model_id: &str) -> Availability {
        let url = format!("{}/api/tags", self.base_url);
        match self.agent.get(&url).call() {
            Ok(response) => match response.into_json::<serde_json::Value>() {
                Ok(value) => {
                    let names: Vec<String> = value
                        .get("models")
                        .and_then(|m| m.as_array())
                        .map(|models| {
                            models
                                .iter()
                                .filter_map(|m| m.get("name").and_then(|n| n.as_str()))
                                .map(String::from)
                                .collect()
                        })
                        .unwrap_or_default();
                    let present = names.iter().any(|n| {
                        n == model_id || n.split(':').next() == model_id.split(':').next()
                    });
                    Availability {
                        available: true,
                        model_present: Some(present),
                        diagnostic: if present {
                            format!("backend reachable; model '{model_id}' present")
                        } else {
                            format!(
                                "backend reachable but model '{model_id}' not found (available: {})",
                                names.join(", ")
                            )
                        },
                    }
                }
                Err(e) => Availability {
                    available: true,
                    model_present: None,
                    diagnostic: format!("backend reachable but tag listing unreadable: {e}"),
                },
            },
            Err(e) => Availability {
                available: false,
                model_present: None,
                diagnostic: format!("backend unreachable at {url}: {e}"),
            },
        }
    }

    fn kind(&self) -> &'static str {
        "live"
    }
}
