//! Chat-completions client with a content-addressed response cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::encodings::{approx_tokens, Message, TokenUsage};
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "SATLAB_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model_name: String,
    pub endpoint: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// First retry delay; later delays double.
    pub backoff: Duration,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model_name: String::new(),
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            temperature: 0.3,
            top_p: 1.0,
            max_tokens: 8000,
            timeout: Duration::from_secs(300),
            max_retries: 5,
            max_in_flight: 4,
            backoff: Duration::from_millis(500),
            cache_dir: Some(PathBuf::from("cache")),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model_name.is_empty() {
            return Err(Error::Config("model_name is required".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.top_p) {
            return Err(Error::Config(format!("top_p must lie in [0, 1], got {}", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be >= 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Relative cache
    /// directories resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut c = ModelConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let value = value.trim().trim_matches('"');
            let bad = |what: &str| Error::Config(format!("line {}: bad {what} '{value}'", i + 1));
            match key.trim() {
                "model_name" | "model" => c.model_name = value.to_string(),
                "endpoint" => c.endpoint = value.to_string(),
                "temperature" => c.temperature = value.parse().map_err(|_| bad("temperature"))?,
                "top_p" => c.top_p = value.parse().map_err(|_| bad("top_p"))?,
                "max_tokens" => c.max_tokens = value.parse().map_err(|_| bad("max_tokens"))?,
                "timeout_secs" => {
                    c.timeout = Duration::from_secs_f64(value.parse().map_err(|_| bad("timeout_secs"))?)
                }
                "max_retries" => c.max_retries = value.parse().map_err(|_| bad("max_retries"))?,
                "max_in_flight" => c.max_in_flight = value.parse().map_err(|_| bad("max_in_flight"))?,
                "backoff_ms" => c.backoff = Duration::from_millis(value.parse().map_err(|_| bad("backoff_ms"))?),
                "cache_dir" => {
                    c.cache_dir = match value {
                        "" | "none" => None,
                        dir => Some(match base {
                            Some(b) if Path::new(dir).is_relative() => b.join(dir),
                            _ => PathBuf::from(dir),
                        }),
                    }
                }
                "api_key" => {
                    return Err(Error::Config(format!(
                        "line {}: credentials are read from {API_KEY_ENV}, not config files",
                        i + 1
                    )))
                }
                other => return Err(Error::Config(format!("line {}: unknown key '{other}'", i + 1))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    pub fn request_body(&self, messages: &[Message]) -> Value {
        json!({
            "model": self.model_name,
            "messages": messages,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
        })
    }
}

/// SHA-256 over the model, messages and sampling parameters.
pub fn request_hash(config: &ModelConfig, messages: &[Message]) -> String {
    let body = config.request_body(messages);
    hex::encode(Sha256::digest(body.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub request_hash: String,
    pub model: String,
    pub messages: Vec<Message>,
    pub response_text: String,
    #[serde(default)]
    pub reasoning_text: Option<String>,
    pub usage: TokenUsage,
    pub latency_ms: u64,
    pub timestamp_ms: u64,
}

/// One JSON file per record under `<dir>/<h[0:2]>/<h[2:4]>/<h>.json`.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(&hash[0..2]).join(&hash[2..4]).join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> Result<Option<CompletionRecord>> {
        let path = self.path_for(hash);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Writes to a temporary sibling, then renames into place.
    pub fn put(&self, record: &CompletionRecord) -> Result<()> {
        let path = self.path_for(&record.request_hash);
        let parent = path.parent().expect("cache paths have parents");
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let tmp = parent.join(format!(
            ".{}.{}.{}.tmp",
            record.request_hash,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(&tmp, serde_json::to_string_pretty(record)?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

struct Gate {
    permits: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            permits: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *p == 0 {
            p = self.freed.wait(p).unwrap_or_else(|e| e.into_inner());
        }
        *p -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

pub struct LlmClient {
    config: ModelConfig,
    agent: ureq::Agent,
    cache: Option<ResponseCache>,
    api_key: Option<String>,
    gate: Gate,
    attempts: AtomicU64,
}

enum Failure {
    Retry(String),
    Fatal(Error),
}

impl LlmClient {
    /// Reads the API key from the environment.
    pub fn new(config: ModelConfig) -> Result<Self> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: ModelConfig, api_key: Option<String>) -> Result<Self> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Ok(LlmClient {
            cache: config.cache_dir.clone().map(ResponseCache::new),
            gate: Gate::new(config.max_in_flight),
            agent,
            api_key,
            config,
            attempts: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// HTTP attempts made so far, including retries.
    pub fn network_attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    /// Serves from cache when possible, otherwise posts with retries and
    /// caches the successful response.
    pub fn complete(&self, messages: &[Message]) -> Result<CompletionRecord> {
        let hash = request_hash(&self.config, messages);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&hash)? {
                log::debug!("cache hit {hash}");
                return Ok(hit);
            }
        }
        let body = self.config.request_body(messages);
        let mut attempt = 0u32;
        let (value, latency) = loop {
            attempt += 1;
            match self.post(&body) {
                Ok(ok) => break ok,
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) if attempt > self.config.max_retries => {
                    return Err(Error::Transport {
                        attempts: attempt,
                        message: msg,
                    })
                }
                Err(Failure::Retry(msg)) => {
                    let delay = self.config.backoff * 2u32.saturating_pow(attempt - 1);
                    let jitter = delay.mul_f64(rand::thread_rng().gen_range(0.0..0.5));
                    log::warn!("attempt {attempt} failed ({msg}); retrying in {:?}", delay + jitter);
                    std::thread::sleep(delay + jitter);
                }
            }
        };
        let record = self.record(hash, messages, &value, latency)?;
        if let Some(cache) = &self.cache {
            cache.put(&record)?;
        }
        Ok(record)
    }

    fn post(&self, body: &Value) -> std::result::Result<(Value, Duration), Failure> {
        let _permit = self.gate.acquire();
        self.attempts.fetch_add(1, Ordering::Relaxed);
        let mut req = self.agent.post(&self.config.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let start = Instant::now();
        match req.send_string(&body.to_string()) {
            Ok(resp) => {
                let text = resp.into_string().map_err(|e| Failure::Retry(e.to_string()))?;
                let value = serde_json::from_str(&text).map_err(|e| Failure::Fatal(Error::Json(e)))?;
                Ok((value, start.elapsed()))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                if code == 429 || code >= 500 {
                    Err(Failure::Retry(format!("HTTP {code}")))
                } else {
                    Err(Failure::Fatal(Error::Request { status: code, body }))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(Failure::Retry(t.to_string())),
        }
    }

    fn record(&self, hash: String, messages: &[Message], value: &Value, latency: Duration) -> Result<CompletionRecord> {
        let message = &value["choices"][0]["message"];
        let response_text = message["content"]
            .as_str()
            .ok_or_else(|| Error::Missing("choices[0].message.content in response".into()))?
            .to_string();
        let reasoning_text = ["reasoning_content", "reasoning"]
            .iter()
            .find_map(|k| message[*k].as_str())
            .map(String::from);
        let u = &value["usage"];
        let reported = |a: &str, b: &str| u[a].as_u64().or_else(|| u[b].as_u64());
        let usage = match (reported("prompt_tokens", "input_tokens"), reported("completion_tokens", "output_tokens")) {
            (Some(input_tokens), Some(output_tokens)) => TokenUsage {
                input_tokens,
                output_tokens,
                approximate: false,
            },
            _ => {
                let input: String = messages.iter().map(|m| m.content.as_str()).collect();
                let output = format!("{}{response_text}", reasoning_text.as_deref().unwrap_or(""));
                TokenUsage {
                    input_tokens: approx_tokens(&input),
                    output_tokens: approx_tokens(&output),
                    approximate: true,
                }
            }
        };
        let timestamp_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        Ok(CompletionRecord {
            request_hash: hash,
            model: self.config.model_name.clone(),
            messages: messages.to_vec(),
            response_text,
            reasoning_text,
            usage,
            latency_ms: latency.as_millis() as u64,
            timestamp_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::Role;

    fn cfg() -> ModelConfig {
        ModelConfig {
            model_name: "m".into(),
            ..ModelConfig::default()
        }
    }

    #[test]
    fn body_carries_sampling_parameters() {
        let body = cfg().request_body(&[Message::new(Role::User, "hi")]);
        assert_eq!(body["temperature"], json!(0.3));
        assert_eq!(body["top_p"], json!(1.0));
        assert_eq!(body["max_tokens"], json!(8000));
        assert_eq!(body["messages"][0]["role"], "user");
    }

    #[test]
    fn hash_depends_on_every_field() {
        let msgs = [Message::new(Role::User, "hi")];
        let h = request_hash(&cfg(), &msgs);
        assert_eq!(h.len(), 64);
        assert_eq!(h, request_hash(&cfg(), &msgs));
        let hotter = ModelConfig { temperature: 0.7, ..cfg() };
        assert_ne!(h, request_hash(&hotter, &msgs));
        assert_ne!(h, request_hash(&cfg(), &[Message::new(Role::User, "hi!")]));
        let slower = ModelConfig { timeout: Duration::from_secs(1), ..cfg() };
        assert_eq!(h, request_hash(&slower, &msgs));
    }

    #[test]
    fn config_file_parsing() {
        let c = ModelConfig::parse(
            "# hosted model\nmodel = gpt-x\nendpoint = http://h/v1/chat/completions\ntemperature = 0.3\nmax_tokens = 16000\ncache_dir = c\n",
            Some(Path::new("/base")),
        )
        .unwrap();
        assert_eq!(c.model_name, "gpt-x");
        assert_eq!(c.max_tokens, 16000);
        assert_eq!(c.cache_dir, Some(PathBuf::from("/base/c")));
        assert!(ModelConfig::parse("model = m\napi_key = sk", None).is_err());
        assert!(ModelConfig::parse("model = m\ntemperature = -1", None).is_err());
        assert!(ModelConfig::parse("model = m\nmax_tokens = 0", None).is_err());
        assert!(ModelConfig::parse("model = m\nflavour = 2", None).is_err());
        assert!(ModelConfig::parse("temperature = 0.1", None).is_err());
    }

    #[test]
    fn cache_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let rec = CompletionRecord {
            request_hash: "ab".repeat(32),
            model: "m".into(),
            messages: vec![Message::new(Role::System, "s"), Message::new(Role::User, "u")],
            response_text: "output: {}".into(),
            reasoning_text: Some("thinking".into()),
            usage: TokenUsage { input_tokens: 3, output_tokens: 4, approximate: false },
            latency_ms: 12,
            timestamp_ms: 1,
        };
        cache.put(&rec).unwrap();
        let path = cache.path_for(&rec.request_hash);
        assert!(path.ends_with(format!("ab/ab/{}.json", rec.request_hash)));
        let back = cache.get(&rec.request_hash).unwrap().unwrap();
        assert_eq!(back, rec);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), fs::read_to_string(&path).unwrap());
        assert!(cache.get(&"cd".repeat(32)).unwrap().is_none());
        let leftovers: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
