//! Response collection from OpenAI-compatible chat-completions endpoints.
//!
//! Every request is keyed by a digest of model, messages and sampling
//! parameters. Replies are stored verbatim under the run directory, so a
//! finished run can be replayed without network access and feeds exactly the
//! same text to the detectors.

mod cache;
mod config;
mod transport;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use langconf_core::corpus::{
    build_fewshot, ChatRole, ChatTurn, FewShotExample, FewShotPrompt, FewShotStyle, PromptRecord,
    ResponseRecord,
};
use langconf_core::decoding::{write_trace, SamplingConfig, TraceStep};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use cache::{cache_key, CachedGeneration, ResponseCache};
pub use config::EndpointConfig;
pub use transport::{HttpReply, HttpTransport, Transport, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid endpoint config: {0}")]
    Config(String),
    #[error("environment variable {0} is not set")]
    MissingToken(String),
    #[error("authentication failed (HTTP {status}): {body}")]
    Auth { status: u16, body: String },
    #[error("still rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("server error HTTP {status} after {attempts} attempts: {body}")]
    Server { status: u16, attempts: u32, body: String },
    #[error("request rejected with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("unexpected response payload: {0}")]
    Schema(String),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
    #[error("no prompts to generate for")]
    EmptyBatch,
}

impl ClientError {
    /// Short machine-readable tag used in run manifests.
    pub fn kind(&self) -> &'static str {
        match self {
            ClientError::Config(_) => "config",
            ClientError::MissingToken(_) | ClientError::Auth { .. } => "auth",
            ClientError::RateLimited { .. } => "rate_limited",
            ClientError::Server { .. } => "server",
            ClientError::Rejected { .. } => "rejected",
            ClientError::Transport { .. } => "transport",
            ClientError::Schema(_) => "schema",
            ClientError::Cache(_) => "cache",
            ClientError::EmptyBatch => "empty",
        }
    }
}

/// Chat messages for a prompt, optionally wrapped in a few-shot prompt
/// already built around the prompt text.
pub fn messages_for(prompt: &PromptRecord, fewshot: Option<&FewShotPrompt>) -> Vec<ChatTurn> {
    let user = |content: &str| ChatTurn {
        role: ChatRole::User,
        content: content.to_string(),
    };
    match fewshot {
        None => vec![user(&prompt.text)],
        Some(FewShotPrompt::Text(s)) => vec![user(s)],
        Some(FewShotPrompt::Turns(t)) => t.clone(),
    }
}

/// Result of one logical request.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub key: String,
    pub response: ResponseRecord,
    pub trace: Option<Vec<TraceStep>>,
    pub cache_hit: bool,
    /// HTTP attempts made; zero on a cache hit.
    pub attempts: u32,
}

impl Generated {
    pub fn retries(&self) -> u32 {
        self.attempts.saturating_sub(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Ok,
    Failed,
}

/// One line of `manifest.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub prompt_id: String,
    pub key: String,
    pub status: EntryStatus,
    pub cache_hit: bool,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    /// Successful responses, in prompt order.
    pub responses: Vec<ResponseRecord>,
    /// One entry per prompt, in prompt order.
    pub manifest: Vec<ManifestEntry>,
}

impl BatchOutcome {
    pub fn failures(&self) -> usize {
        self.manifest
            .iter()
            .filter(|e| e.status == EntryStatus::Failed)
            .count()
    }

    pub fn cache_hits(&self) -> usize {
        self.manifest.iter().filter(|e| e.cache_hit).count()
    }

    pub fn any_failure_of(&self, kind: &str) -> bool {
        self.manifest
            .iter()
            .any(|e| e.error_kind.as_deref() == Some(kind))
    }
}

pub struct Client<'t> {
    config: EndpointConfig,
    transport: &'t dyn Transport,
    run_dir: Option<PathBuf>,
    cache: Option<ResponseCache>,
}

impl<'t> Client<'t> {
    /// Without a run directory nothing is cached and no manifest is written.
    pub fn new(
        config: EndpointConfig,
        transport: &'t dyn Transport,
        run_dir: Option<&Path>,
    ) -> Result<Self, ClientError> {
        config.validate()?;
        Ok(Client {
            cache: run_dir.map(ResponseCache::new),
            run_dir: run_dir.map(Path::to_path_buf),
            config,
            transport,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn trace_path(&self, key: &str) -> Option<PathBuf> {
        self.run_dir
            .as_ref()
            .map(|d| d.join("traces").join(format!("{key}.jsonl")))
    }

    pub fn generate(
        &self,
        prompt: &PromptRecord,
        sampling: &SamplingConfig,
        fewshot: Option<&FewShotPrompt>,
    ) -> Result<Generated, ClientError> {
        sampling
            .validate()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        let messages = messages_for(prompt, fewshot);
        let key = cache_key(
            &self.config.model,
            &messages,
            sampling,
            self.config.logprobs_top_n,
        );
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            self.ensure_trace_file(&key, hit.trace.as_deref())?;
            return Ok(Generated {
                key,
                response: hit.response,
                trace: hit.trace,
                cache_hit: true,
                attempts: 0,
            });
        }

        let body = self.request_body(&messages, sampling).to_string();
        let (reply, attempts) = self.send_with_retry(&body)?;
        let (text, trace) = parse_reply(&reply, self.config.logprobs_top_n.is_some())?;
        let trace_path = match (&trace, self.trace_path(&key)) {
            (Some(_), Some(p)) => Some(p.display().to_string()),
            _ => None,
        };
        let response = ResponseRecord {
            id: None,
            prompt_id: prompt.id.clone(),
            model: self.config.model.clone(),
            text,
            sampling: Some(sampling.clone()),
            trace_path,
        };
        if let Some(cache) = &self.cache {
            cache.put(&CachedGeneration {
                key: key.clone(),
                response: response.clone(),
                trace: trace.clone(),
                created_at: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            })?;
            self.ensure_trace_file(&key, trace.as_deref())?;
        }
        Ok(Generated {
            key,
            response,
            trace,
            cache_hit: false,
            attempts,
        })
    }

    fn ensure_trace_file(&self, key: &str, trace: Option<&[TraceStep]>) -> Result<(), ClientError> {
        let (Some(trace), Some(path)) = (trace, self.trace_path(key)) else {
            return Ok(());
        };
        if path.exists() {
            return Ok(());
        }
        std::fs::create_dir_all(path.parent().expect("trace path has a parent"))?;
        write_trace(&path, trace).map_err(|e| ClientError::Cache(std::io::Error::other(e.to_string())))
    }

    fn request_body(&self, messages: &[ChatTurn], s: &SamplingConfig) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": s.temperature,
            "top_p": s.top_p,
            "max_tokens": s.max_tokens,
            "seed": s.seed,
        });
        if let Some(n) = self.config.logprobs_top_n {
            body["logprobs"] = json!(true);
            body["top_logprobs"] = json!(n);
        }
        body
    }

    /// Retries 429, 5xx and connection failures with exponential backoff.
    fn send_with_retry(&self, body: &str) -> Result<(String, u32), ClientError> {
        let token = self.config.api_key()?;
        let url = self.config.endpoint_url();
        let mut last = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let factor = 1u64 << (attempt - 1).min(16);
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms.saturating_mul(factor)));
            }
            let attempts = attempt + 1;
            match self
                .transport
                .post_json(&url, token.as_deref(), body, self.config.timeout())
            {
                Ok(r) if (200..300).contains(&r.status) => return Ok((r.body, attempts)),
                Ok(r) if r.status == 401 || r.status == 403 => {
                    return Err(ClientError::Auth {
                        status: r.status,
                        body: r.body,
                    })
                }
                Ok(r) if r.status == 429 => last = Some(ClientError::RateLimited { attempts }),
                Ok(r) if r.status >= 500 => {
                    last = Some(ClientError::Server {
                        status: r.status,
                        attempts,
                        body: r.body,
                    })
                }
                Ok(r) => {
                    return Err(ClientError::Rejected {
                        status: r.status,
                        body: r.body,
                    })
                }
                Err(e) => {
                    last = Some(ClientError::Transport {
                        attempts,
                        message: e.0,
                    })
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Generates for every prompt with at most `parallelism` requests in
    /// flight. One failing prompt does not stop the others; it shows up in
    /// the manifest instead. With a run directory the manifest is also
    /// written to `manifest.jsonl` there.
    pub fn batch_generate(
        &self,
        prompts: &[PromptRecord],
        sampling: &SamplingConfig,
        fewshot: Option<(&[FewShotExample], FewShotStyle)>,
    ) -> Result<BatchOutcome, ClientError> {
        if prompts.is_empty() {
            return Err(ClientError::EmptyBatch);
        }
        let slots: Mutex<Vec<Option<Result<Generated, ClientError>>>> =
            Mutex::new((0..prompts.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.config.parallelism.min(prompts.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(p) = prompts.get(i) else { break };
                    let fs = fewshot.map(|(ex, style)| build_fewshot(ex, &p.text, style, None));
                    let r = self.generate(p, sampling, fs.as_ref());
                    slots.lock().expect("result slots poisoned")[i] = Some(r);
                });
            }
        });

        let mut responses = Vec::with_capacity(prompts.len());
        let mut manifest = Vec::with_capacity(prompts.len());
        let slots = slots.into_inner().expect("result slots poisoned");
        for (index, (p, slot)) in prompts.iter().zip(slots).enumerate() {
            let entry = match slot.expect("every slot filled") {
                Ok(g) => {
                    let e = ManifestEntry {
                        index,
                        prompt_id: p.id.clone(),
                        key: g.key,
                        status: EntryStatus::Ok,
                        cache_hit: g.cache_hit,
                        attempts: g.attempts,
                        error_kind: None,
                        error: None,
                    };
                    responses.push(g.response);
                    e
                }
                Err(err) => ManifestEntry {
                    index,
                    prompt_id: p.id.clone(),
                    key: String::new(),
                    status: EntryStatus::Failed,
                    cache_hit: false,
                    attempts: 0,
                    error_kind: Some(err.kind().to_string()),
                    error: Some(err.to_string()),
                },
            };
            manifest.push(entry);
        }
        if let Some(dir) = &self.run_dir {
            std::fs::create_dir_all(dir)?;
            langconf_core::write_jsonl(dir.join("manifest.jsonl"), &manifest)
                .map_err(|e| ClientError::Cache(std::io::Error::other(e.to_string())))?;
        }
        Ok(BatchOutcome {
            responses,
            manifest,
        })
    }
}

/// Pulls the reply text (and, when asked for, the per-token alternatives)
/// out of a chat-completions payload.
pub fn parse_reply(
    body: &str,
    want_logprobs: bool,
) -> Result<(String, Option<Vec<TraceStep>>), ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::Schema(e.to_string()))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| ClientError::Schema("missing choices[0]".into()))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ClientError::Schema("missing choices[0].message.content".into()))?
        .to_string();
    if !want_logprobs {
        return Ok((text, None));
    }
    // Endpoints that ignore the logprobs request simply yield no trace.
    let Some(tokens) = choice.pointer("/logprobs/content").and_then(Value::as_array) else {
        return Ok((text, None));
    };
    let mut trace = Vec::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        let bad = || ClientError::Schema(format!("malformed logprobs entry {i}"));
        let token = t.get("token").and_then(Value::as_str).ok_or_else(bad)?;
        let lp = t.get("logprob").and_then(Value::as_f64).ok_or_else(bad)?;
        let mut candidates = Vec::new();
        for alt in t.get("top_logprobs").and_then(Value::as_array).into_iter().flatten() {
            let tok = alt.get("token").and_then(Value::as_str).ok_or_else(bad)?;
            let l = alt.get("logprob").and_then(Value::as_f64).ok_or_else(bad)?;
            candidates.push((tok.to_string(), l.exp()));
        }
        let sampled = match candidates.iter().position(|(c, _)| c == token) {
            Some(j) => j,
            None => {
                candidates.push((token.to_string(), lp.exp()));
                candidates.len() - 1
            }
        };
        // rounded logprobs can overshoot 1 slightly
        let total: f64 = candidates.iter().map(|c| c.1).sum();
        if total > 1.0 {
            candidates.iter_mut().for_each(|c| c.1 /= total);
        }
        trace.push(TraceStep {
            candidates,
            sampled,
            truncated: true,
        });
    }
    Ok((text, Some(trace)))
}
