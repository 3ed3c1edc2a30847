//! Completion sampling with a replayable store.
//!
//! The client speaks the de-facto chat-completions JSON shape (messages in,
//! choices out) against a configurable endpoint, and persists every sampled
//! completion to an append-only line-delimited store keyed by
//! `(prompt_hash, model_id, sample_index)`. Replay mode serves exclusively
//! from the store, which makes benchmark runs deterministic and free.
//! Live mode fills whatever indices the store is missing and persists them
//! before returning, so re-running a finished experiment never re-queries
//! the provider.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::PromptBundle;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("replay store has no completions for prompt {prompt_hash} (have {have}, want {want})")]
    ReplayMiss {
        prompt_hash: String,
        have: usize,
        want: usize,
    },
    #[error("provider returned {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("environment variable {0} is not set (expected the API key)")]
    MissingApiKey(String),
    #[error("transport failure after retries: {0}")]
    Transport(#[from] reqwest::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt store record in {file}: {message}")]
    Store { file: String, message: String },
}

/// Sampling parameters for one generation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n_samples: usize,
    pub temperature: f64,
    pub model_id: String,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
}

impl SamplingConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        // Ten samples at temperature 0.7 is the benchmark's default budget.
        SamplingConfig {
            n_samples: 10,
            temperature: 0.7,
            model_id: model_id.into(),
            max_tokens: None,
            seed: None,
        }
    }
}

/// One stored completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub prompt_hash: String,
    pub model_id: String,
    pub sample_index: usize,
    pub text: String,
    #[serde(default)]
    pub provider_meta: BTreeMap<String, String>,
}

/// Content digest keying the replay store: independent of request metadata,
/// stable under trailing-whitespace differences.
pub fn prompt_hash(user_text: &str, model_id: &str) -> String {
    let normalized: String = user_text
        .lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n");
    let mut hasher = Sha256::new();
    hasher.update(normalized.trim_end().as_bytes());
    hasher.update(b"\x00");
    hasher.update(model_id.as_bytes());
    hex::encode(hasher.finalize())
}

/// Append-only completion store: one JSONL file per model.
pub struct ReplayStore {
    dir: PathBuf,
    append_lock: Mutex<()>,
}

impl ReplayStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ClientError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ReplayStore {
            dir,
            append_lock: Mutex::new(()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn file_for(&self, model_id: &str) -> PathBuf {
        let safe: String = model_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        self.dir.join(format!("{safe}.jsonl"))
    }

    /// Append one record. A single `write_all` of the full line keeps
    /// concurrent appends intact on POSIX append-mode files.
    pub fn append(&self, record: &CompletionRecord) -> Result<(), ClientError> {
        let _guard = self.append_lock.lock().expect("store lock");
        let mut line = serde_json::to_string(record).expect("serializable record");
        line.push('\n');
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.file_for(&record.model_id))?;
        file.write_all(line.as_bytes())?;
        Ok(())
    }

    /// All records for a prompt, ordered by sample index, first write wins
    /// per index.
    pub fn lookup(
        &self,
        prompt_hash: &str,
        model_id: &str,
    ) -> Result<Vec<CompletionRecord>, ClientError> {
        let path = self.file_for(model_id);
        let file = match std::fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut records: Vec<CompletionRecord> = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CompletionRecord =
                serde_json::from_str(&line).map_err(|e| ClientError::Store {
                    file: path.display().to_string(),
                    message: format!("line {}: {e}", lineno + 1),
                })?;
            if record.prompt_hash == prompt_hash
                && record.model_id == model_id
                && !records.iter().any(|r| r.sample_index == record.sample_index)
            {
                records.push(record);
            }
        }
        records.sort_by_key(|r| r.sample_index);
        Ok(records)
    }
}

/// Live-endpoint configuration.
#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub requests_per_minute: Option<u32>,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl LiveConfig {
    pub fn new(endpoint: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        LiveConfig {
            endpoint: endpoint.into(),
            api_key_env: api_key_env.into(),
            requests_per_minute: None,
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

enum Provider {
    Replay,
    Live {
        config: LiveConfig,
        api_key: String,
        http: reqwest::blocking::Client,
        last_request: Mutex<Option<Instant>>,
    },
}

/// Samples completions for prompts, through the store.
pub struct CompletionClient {
    store: ReplayStore,
    provider: Provider,
}

impl CompletionClient {
    /// Deterministic replay: the store is the only source.
    pub fn replay(store: ReplayStore) -> Self {
        CompletionClient {
            store,
            provider: Provider::Replay,
        }
    }

    /// Live sampling; fails immediately when the key variable is unset.
    pub fn live(store: ReplayStore, config: LiveConfig) -> Result<Self, ClientError> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| ClientError::MissingApiKey(config.api_key_env.clone()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()?;
        Ok(CompletionClient {
            store,
            provider: Provider::Live {
                config,
                api_key,
                http,
                last_request: Mutex::new(None),
            },
        })
    }

    pub fn store(&self) -> &ReplayStore {
        &self.store
    }

    /// Return exactly `cfg.n_samples` completions for the prompt, in sample
    /// index order. Live mode persists new samples before returning.
    pub fn sample(
        &self,
        prompt: &PromptBundle,
        cfg: &SamplingConfig,
    ) -> Result<Vec<CompletionRecord>, ClientError> {
        let hash = prompt_hash(&prompt.user_text, &cfg.model_id);
        let mut have = self.store.lookup(&hash, &cfg.model_id)?;
        have.retain(|r| r.sample_index < cfg.n_samples);
        if have.len() >= cfg.n_samples {
            have.truncate(cfg.n_samples);
            return Ok(have);
        }
        match &self.provider {
            Provider::Replay => Err(ClientError::ReplayMiss {
                prompt_hash: hash,
                have: have.len(),
                want: cfg.n_samples,
            }),
            Provider::Live { .. } => {
                let mut next_index = have.iter().map(|r| r.sample_index + 1).max().unwrap_or(0);
                while have.len() < cfg.n_samples {
                    let missing = cfg.n_samples - have.len();
                    let (texts, meta) = self.request_completions(prompt, cfg, missing)?;
                    if texts.is_empty() {
                        return Err(ClientError::Provider {
                            status: 200,
                            body: "provider returned no choices".into(),
                        });
                    }
                    for text in texts {
                        let record = CompletionRecord {
                            prompt_hash: hash.clone(),
                            model_id: cfg.model_id.clone(),
                            sample_index: next_index,
                            text,
                            provider_meta: meta.clone(),
                        };
                        next_index += 1;
                        self.store.append(&record)?;
                        have.push(record);
                        if have.len() == cfg.n_samples {
                            break;
                        }
                    }
                }
                Ok(have)
            }
        }
    }

    fn request_completions(
        &self,
        prompt: &PromptBundle,
        cfg: &SamplingConfig,
        n: usize,
    ) -> Result<(Vec<String>, BTreeMap<String, String>), ClientError> {
        let Provider::Live {
            config,
            api_key,
            http,
            last_request,
        } = &self.provider
        else {
            unreachable!("request_completions is live-only");
        };

        let mut messages = Vec::new();
        if let Some(system) = &prompt.system_text {
            messages.push(serde_json::json!({"role": "system", "content": system}));
        }
        messages.push(serde_json::json!({"role": "user", "content": prompt.user_text}));
        let mut body = serde_json::json!({
            "model": cfg.model_id,
            "messages": messages,
            "n": n,
            "temperature": cfg.temperature,
        });
        if let Some(max_tokens) = cfg.max_tokens {
            body["max_tokens"] = max_tokens.into();
        }
        if let Some(seed) = cfg.seed {
            body["seed"] = seed.into();
        }

        let mut backoff = config.initial_backoff;
        let mut last_error: Option<ClientError> = None;
        for attempt in 0..config.max_attempts {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            self.rate_gate(config, last_request);
            let response = match http
                .post(&config.endpoint)
                .bearer_auth(api_key)
                .json(&body)
                .send()
            {
                Ok(r) => r,
                Err(e) => {
                    last_error = Some(ClientError::Transport(e));
                    continue;
                }
            };
            let status = response.status().as_u16();
            let text = response.text().unwrap_or_default();
            if status == 429 || status >= 500 {
                last_error = Some(ClientError::Provider { status, body: text });
                continue;
            }
            if status >= 400 {
                return Err(ClientError::Provider { status, body: text });
            }
            return parse_chat_response(&text).ok_or(ClientError::Provider {
                status,
                body: text,
            });
        }
        Err(last_error.unwrap_or(ClientError::Provider {
            status: 0,
            body: "no attempts made".into(),
        }))
    }

    fn rate_gate(&self, config: &LiveConfig, last_request: &Mutex<Option<Instant>>) {
        let Some(rpm) = config.requests_per_minute else {
            return;
        };
        let min_gap = Duration::from_secs_f64(60.0 / rpm.max(1) as f64);
        let mut last = last_request.lock().expect("rate lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < min_gap {
                std::thread::sleep(min_gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

fn parse_chat_response(text: &str) -> Option<(Vec<String>, BTreeMap<String, String>)> {
    let doc: serde_json::Value = serde_json::from_str(text).ok()?;
    let choices = doc.get("choices")?.as_array()?;
    let mut texts = Vec::new();
    let mut finish = None;
    for choice in choices {
        let content = choice.get("message")?.get("content")?.as_str()?;
        texts.push(content.to_string());
        if finish.is_none() {
            finish = choice
                .get("finish_reason")
                .and_then(|f| f.as_str())
                .map(String::from);
        }
    }
    let mut meta = BTreeMap::new();
    if let Some(model) = doc.get("model").and_then(|m| m.as_str()) {
        meta.insert("response_model".into(), model.to_string());
    }
    if let Some(id) = doc.get("id").and_then(|i| i.as_str()) {
        meta.insert("response_id".into(), id.to_string());
    }
    if let Some(reason) = finish {
        meta.insert("finish_reason".into(), reason);
    }
    Some((texts, meta))
}
