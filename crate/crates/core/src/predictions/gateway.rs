use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Live,
    Record,
    #[default]
    Replay,
}

impl std::fmt::Display for QueryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QueryMode::Live => "live",
            QueryMode::Record => "record",
            QueryMode::Replay => "replay",
        })
    }
}

impl std::str::FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(QueryMode::Live),
            "record" => Ok(QueryMode::Record),
            "replay" => Ok(QueryMode::Replay),
            other => Err(Error::Config(format!("unknown query mode '{other}'"))),
        }
    }
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_timeout_secs() -> u64 {
    120
}

/// One chat-completion endpoint. `id` names the model in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub id: String,
    #[serde(default)]
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

pub fn chat_request_body(endpoint: &EndpointConfig, prompt: &str) -> Value {
    let mut body = json!({
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt}],
    });
    if let Some(t) = endpoint.temperature {
        body["temperature"] = json!(t);
    }
    if let Some(m) = endpoint.max_tokens {
        body["max_tokens"] = json!(m);
    }
    body
}

/// Wire access, injectable so tests can observe or forbid network use.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value, timeout: Duration) -> Result<Value>;
}

#[derive(Debug, Default)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value, timeout: Duration) -> Result<Value> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(token) = bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Error::Transport {
            retriable: true,
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Error::Transport {
            retriable: true,
            message: format!("reading body: {e}"),
        })?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| Error::Transport {
                retriable: false,
                message: format!("malformed JSON from {url}: {e}"),
            }),
            401 | 403 => Err(Error::Auth(format!("{url} returned {status}"))),
            408 | 429 | 500..=599 => Err(Error::Transport {
                retriable: true,
                message: format!("{url} returned {status}: {text}"),
            }),
            _ => Err(Error::Transport {
                retriable: false,
                message: format!("{url} returned {status}: {text}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub key: String,
    pub model: String,
    pub prompt_sha: String,
    pub response: String,
}

fn sha_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// JSON-lines store of recorded responses keyed by a hash of (model, prompt).
/// Reads are concurrent; appends go through one writer.
#[derive(Debug)]
pub struct ReplayStore {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, ReplayEntry>>,
    writer: Mutex<Option<File>>,
}

impl ReplayStore {
    pub fn key(model: &str, prompt: &str) -> String {
        sha_hex(&format!("{model}\n{prompt}"))
    }

    pub fn in_memory() -> Self {
        ReplayStore {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Loads the store at `path`; a missing file is an empty store.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            for (lineno, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: ReplayEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: lineno + 1,
                    column: e.column(),
                    message: format!("replay store {}: {e}", path.display()),
                })?;
                entries.insert(entry.key.clone(), entry);
            }
        }
        Ok(ReplayStore {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("replay lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &str, prompt: &str) -> Option<String> {
        let key = Self::key(model, prompt);
        self.entries.read().expect("replay lock").get(&key).map(|e| e.response.clone())
    }

    pub fn insert(&self, model: &str, prompt: &str, response: &str) -> Result<()> {
        let entry = ReplayEntry {
            key: Self::key(model, prompt),
            model: model.to_string(),
            prompt_sha: sha_hex(prompt),
            response: response.to_string(),
        };
        let mut writer = self.writer.lock().expect("replay writer lock");
        if let Some(path) = &self.path {
            if writer.is_none() {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                let f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?;
                *writer = Some(f);
            }
            let f = writer.as_mut().expect("writer opened");
            writeln!(f, "{}", serde_json::to_string(&entry)?).map_err(|e| Error::io(path, e))?;
        }
        self.entries.write().expect("replay lock").insert(entry.key.clone(), entry);
        Ok(())
    }
}

/// Sends prompts to one endpoint under the configured mode.
pub struct Gateway {
    endpoint: EndpointConfig,
    mode: QueryMode,
    store: Arc<ReplayStore>,
    transport: Arc<dyn Transport>,
}

impl Gateway {
    pub fn new(endpoint: EndpointConfig, mode: QueryMode, store: Arc<ReplayStore>, transport: Arc<dyn Transport>) -> Self {
        Gateway {
            endpoint,
            mode,
            store,
            transport,
        }
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        &self.endpoint
    }

    pub fn query(&self, prompt: &str) -> Result<String> {
        match self.mode {
            QueryMode::Replay => self.store.get(&self.endpoint.id, prompt).ok_or_else(|| Error::CacheMiss {
                key: ReplayStore::key(&self.endpoint.id, prompt),
            }),
            QueryMode::Live => self.send_with_retries(prompt),
            QueryMode::Record => {
                let text = self.send_with_retries(prompt)?;
                self.store.insert(&self.endpoint.id, prompt, &text)?;
                Ok(text)
            }
        }
    }

    fn send_with_retries(&self, prompt: &str) -> Result<String> {
        let token = match &self.endpoint.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| Error::Auth(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let url = format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'));
        let body = chat_request_body(&self.endpoint, prompt);
        let timeout = Duration::from_secs(self.endpoint.timeout_secs);
        let mut attempt = 0u32;
        loop {
            let outcome = self
                .transport
                .post_json(&url, token.as_deref(), &body, timeout)
                .and_then(|v| assistant_text(&v));
            match outcome {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retriable() && attempt < self.endpoint.max_retries => {
                    thread::sleep(Duration::from_millis(self.endpoint.backoff_ms.saturating_mul(1 << attempt.min(16))));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

fn assistant_text(v: &Value) -> Result<String> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Transport {
            retriable: false,
            message: "response has no choices[0].message.content".into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        calls: AtomicUsize,
        script: Vec<Result<Value>>,
    }

    impl Transport for Scripted {
        fn post_json(&self, _url: &str, _bearer: Option<&str>, _body: &Value, _t: Duration) -> Result<Value> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst);
            match &self.script[i.min(self.script.len() - 1)] {
                Ok(v) => Ok(v.clone()),
                Err(Error::Transport { retriable, message }) => Err(Error::Transport {
                    retriable: *retriable,
                    message: message.clone(),
                }),
                Err(Error::Auth(m)) => Err(Error::Auth(m.clone())),
                Err(_) => unreachable!(),
            }
        }
    }

    fn reply(text: &str) -> Value {
        json!({"choices": [{"message": {"role": "assistant", "content": text}}]})
    }

    fn endpoint() -> EndpointConfig {
        EndpointConfig {
            id: "mock".into(),
            base_url: "http://127.0.0.1:9".into(),
            model: "mock-1".into(),
            api_key_env: None,
            temperature: None,
            max_tokens: None,
            max_retries: 2,
            backoff_ms: 1,
            timeout_secs: 1,
        }
    }

    #[test]
    fn replay_never_touches_transport() {
        let store = Arc::new(ReplayStore::in_memory());
        store.insert("mock", "hello", "stored text\n").unwrap();
        let t = Arc::new(Scripted {
            calls: AtomicUsize::new(0),
            script: vec![Ok(reply("network"))],
        });
        let g = Gateway::new(endpoint(), QueryMode::Replay, store, t.clone());
        assert_eq!(g.query("hello").unwrap(), "stored text\n");
        match g.query("other") {
            Err(Error::CacheMiss { key }) => assert_eq!(key, ReplayStore::key("mock", "other")),
            other => panic!("{other:?}"),
        }
        assert_eq!(t.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn record_then_replay_roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.jsonl");
        let t = Arc::new(Scripted {
            calls: AtomicUsize::new(0),
            script: vec![Ok(reply("Precision: [0.1, 0.2]"))],
        });
        let store = Arc::new(ReplayStore::open(&path).unwrap());
        let g = Gateway::new(endpoint(), QueryMode::Record, store, t);
        let live = g.query("prompt").unwrap();
        let reopened = Arc::new(ReplayStore::open(&path).unwrap());
        let r = Gateway::new(endpoint(), QueryMode::Replay, reopened, Arc::new(UreqTransport));
        assert_eq!(r.query("prompt").unwrap(), live);
    }

    #[test]
    fn retriable_errors_are_retried_then_surfaced() {
        let flaky = Arc::new(Scripted {
            calls: AtomicUsize::new(0),
            script: vec![
                Err(Error::Transport {
                    retriable: true,
                    message: "503".into(),
                }),
                Ok(reply("ok")),
            ],
        });
        let g = Gateway::new(endpoint(), QueryMode::Live, Arc::new(ReplayStore::in_memory()), flaky.clone());
        assert_eq!(g.query("p").unwrap(), "ok");
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 2);

        let down = Arc::new(Scripted {
            calls: AtomicUsize::new(0),
            script: vec![Err(Error::Transport {
                retriable: true,
                message: "503".into(),
            })],
        });
        let g = Gateway::new(endpoint(), QueryMode::Live, Arc::new(ReplayStore::in_memory()), down.clone());
        assert!(matches!(g.query("p"), Err(Error::Transport { retriable: true, .. })));
        assert_eq!(down.calls.load(Ordering::SeqCst), 3);

        let auth = Arc::new(Scripted {
            calls: AtomicUsize::new(0),
            script: vec![Err(Error::Auth("401".into()))],
        });
        let g = Gateway::new(endpoint(), QueryMode::Live, Arc::new(ReplayStore::in_memory()), auth.clone());
        assert!(matches!(g.query("p"), Err(Error::Auth(_))));
        assert_eq!(auth.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn request_body_passes_temperature_only_when_set() {
        let mut e = endpoint();
        assert!(chat_request_body(&e, "x").get("temperature").is_none());
        e.temperature = Some(0.0);
        assert_eq!(chat_request_body(&e, "x")["temperature"], json!(0.0));
    }
}
