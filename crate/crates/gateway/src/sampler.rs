use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use abscon_core::notation::{extract_code_block, parse, Notation};

use crate::pool::{CandidatePool, NamedCandidate};
use crate::prompt::{ChatMessage, PromptBundle};
use crate::{io_error, GatewayError};

pub const LLM_TOKEN_VAR: &str = "ABSCON_LLM_TOKEN";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub endpoint: String,
    pub model: String,
    pub n_candidates: usize,
    pub temperature: f64,
    pub greedy_temperature: f64,
    /// Also request the designated low-temperature candidate.
    pub include_greedy: bool,
    #[serde(with = "secs")]
    pub request_timeout: Duration,
    pub max_retries: u32,
    #[serde(with = "secs")]
    pub retry_backoff: Duration,
    /// Requests in flight at once.
    pub parallelism: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            n_candidates: 10,
            temperature: 0.7,
            greedy_temperature: 0.01,
            include_greedy: true,
            request_timeout: Duration::from_secs(120),
            max_retries: 3,
            retry_backoff: Duration::from_millis(500),
            parallelism: 4,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.to_string()));
        if self.n_candidates == 0 {
            return bad("n_candidates must be at least 1");
        }
        if !(self.temperature >= 0.0 && self.greedy_temperature >= 0.0) {
            return bad("temperatures must be non-negative");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        Ok(())
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// One completion per call.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, String>;
}

/// Chat-completions over HTTP with a bearer token from the environment.
pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    token: Option<String>,
}

impl HttpChatBackend {
    pub fn new(cfg: &SamplingConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.request_timeout)
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(HttpChatBackend {
            client,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            token: std::env::var(LLM_TOKEN_VAR).ok().filter(|t| !t.is_empty()),
        })
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, String> {
        let body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": temperature,
            "n": 1,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("{} returned {status}", self.endpoint));
        }
        let value: serde_json::Value = resp.json().map_err(|e| e.to_string())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

fn complete_with_retries(
    backend: &dyn ChatBackend,
    messages: &[ChatMessage],
    temperature: f64,
    cfg: &SamplingConfig,
) -> Result<String, String> {
    let mut last = String::new();
    for attempt in 0..=cfg.max_retries {
        if attempt > 0 {
            std::thread::sleep(cfg.retry_backoff * 2u32.saturating_pow(attempt - 1));
        }
        match backend.complete(messages, temperature) {
            Ok(text) => return Ok(text),
            Err(e) => {
                log::warn!("completion attempt {} failed: {e}", attempt + 1);
                last = e;
            }
        }
    }
    Err(last)
}

struct Job {
    name: String,
    temperature: f64,
}

enum Outcome {
    Raw(String),
    Failed(String),
}

/// Samples candidates into `run_dir` with an HTTP backend.
pub fn sample_candidates(
    bundle: &PromptBundle,
    cfg: &SamplingConfig,
    notation: Notation,
    run_dir: &Path,
) -> Result<CandidatePool, GatewayError> {
    cfg.validate()?;
    let backend = HttpChatBackend::new(cfg)?;
    sample_with(&backend, bundle, cfg, notation, run_dir)
}

/// Requests each candidate independently, persisting every raw response to
/// `run_dir/raw/<name>.txt` before parsing it and every parsable candidate to
/// `run_dir/candidates/<name>.<ext>`. Cached raw responses are replayed
/// instead of requested, so a populated run directory needs no network.
pub fn sample_with(
    backend: &dyn ChatBackend,
    bundle: &PromptBundle,
    cfg: &SamplingConfig,
    notation: Notation,
    run_dir: &Path,
) -> Result<CandidatePool, GatewayError> {
    cfg.validate()?;
    bundle.validate()?;
    let raw_dir = run_dir.join("raw");
    let cand_dir = run_dir.join("candidates");
    for d in [&raw_dir, &cand_dir] {
        fs::create_dir_all(d).map_err(io_error(d))?;
    }
    let mut jobs: Vec<Job> = Vec::new();
    if cfg.include_greedy {
        jobs.push(Job {
            name: "greedy".into(),
            temperature: cfg.greedy_temperature,
        });
    }
    jobs.extend((0..cfg.n_candidates).map(|i| Job {
        name: format!("{i:03}"),
        temperature: cfg.temperature,
    }));

    let messages = bundle.messages();
    let next = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<Option<Outcome>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let io_failure: Mutex<Option<GatewayError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..cfg.parallelism.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let path = raw_dir.join(format!("{}.txt", job.name));
                let outcome = if path.exists() {
                    match fs::read_to_string(&path) {
                        Ok(text) => Outcome::Raw(text),
                        Err(e) => {
                            *io_failure.lock().unwrap() = Some(io_error(&path)(e));
                            break;
                        }
                    }
                } else {
                    match complete_with_retries(backend, &messages, job.temperature, cfg) {
                        Ok(text) => {
                            if let Err(e) = fs::write(&path, &text) {
                                *io_failure.lock().unwrap() = Some(io_error(&path)(e));
                                break;
                            }
                            Outcome::Raw(text)
                        }
                        Err(e) => Outcome::Failed(e),
                    }
                };
                outcomes.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    if let Some(e) = io_failure.into_inner().unwrap() {
        return Err(e);
    }

    let mut pool = CandidatePool {
        candidates: Vec::new(),
        greedy: None,
        warnings: Vec::new(),
    };
    let mut last_failure = None;
    let mut any_response = false;
    for (job, outcome) in jobs.iter().zip(outcomes.into_inner().unwrap()) {
        let text = match outcome.expect("every job ran") {
            Outcome::Raw(text) => text,
            Outcome::Failed(e) => {
                pool.warnings.push(format!("{}: request failed: {e}", job.name));
                last_failure = Some(e);
                continue;
            }
        };
        any_response = true;
        let code = extract_code_block(&text);
        let parsed = match parse(&code, notation) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("candidate {} is unparsable: {e}", job.name);
                pool.warnings.push(format!("{}: {e}", job.name));
                continue;
            }
        };
        let name = format!("{}.{}", job.name, notation.extension());
        let path = cand_dir.join(&name);
        fs::write(&path, &code).map_err(io_error(&path))?;
        let candidate = NamedCandidate { name, notation, parsed };
        if job.name == "greedy" {
            pool.greedy = Some(candidate);
        } else {
            pool.candidates.push(candidate);
        }
    }
    if !any_response {
        return Err(GatewayError::Endpoint(last_failure.unwrap_or_default()));
    }
    if pool.candidates.is_empty() {
        return Err(GatewayError::EmptyPool(cand_dir.display().to_string()));
    }
    Ok(pool)
}
