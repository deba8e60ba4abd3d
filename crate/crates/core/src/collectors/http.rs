//! HTTP plumbing shared by the collectors: a swappable transport, the
//! on-disk fixture store and the live/record/replay switch.
//!
//! # Fixture layout
//!
//! One JSON file per request at `<root>/<service>/<hash>.json`, where
//! `<hash>` is the lowercase hex SHA-256 of
//!
//! ```text
//! METHOD "\n" PATH_AND_QUERY "\n" BODY
//! ```
//!
//! `PATH_AND_QUERY` is relative to the service base URL and `BODY` is empty
//! for bodiless requests. Headers (including credentials) never take part in
//! the hash, so fixtures recorded against one base URL replay against any
//! other.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CollectError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Live,
    /// Live calls whose responses are also written to the fixture store.
    Record,
    /// Responses come only from the fixture store; the network is never used.
    Replay,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown mode {other:?} (expected live, record or replay)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Record => "record",
            Mode::Replay => "replay",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Lowercased header names.
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name).map(String::as_str)
    }

    fn is_rate_limited(&self) -> bool {
        self.status == 429 || (self.status == 403 && self.header("x-ratelimit-remaining") == Some("0"))
    }

    fn rate_limit_reset(&self) -> Option<DateTime<Utc>> {
        if let Some(epoch) = self.header("x-ratelimit-reset").and_then(|v| v.parse::<i64>().ok()) {
            return Utc.timestamp_opt(epoch, 0).single();
        }
        self.header("retry-after")
            .and_then(|v| v.parse::<i64>().ok())
            .map(|secs| Utc::now() + chrono::Duration::seconds(secs))
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// Blocking reqwest client.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("oss-recon/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
        };
        for (name, value) in &request.headers {
            builder = builder.header(name, value);
        }
        if let Some(body) = &request.body {
            builder = builder
                .header("content-type", "application/json")
                .body(body.clone());
        }
        let response = builder.send().map_err(|e| TransportError(e.to_string()))?;
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = response.text().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse {
            status,
            headers,
            body,
        })
    }
}

/// Refuses every request. Installed in replay mode.
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        Err(TransportError(format!(
            "network access is disabled (attempted {} {})",
            request.method.as_str(),
            request.url
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub service: String,
    pub method: Method,
    pub path: String,
    pub request_body: Option<String>,
    pub status: u16,
    /// Verbatim response body.
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct FixtureStore {
    root: PathBuf,
}

impl FixtureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn request_hash(method: Method, path: &str, body: Option<&str>) -> String {
        let mut hasher = Sha256::new();
        hasher.update(method.as_str().as_bytes());
        hasher.update(b"\n");
        hasher.update(path.as_bytes());
        hasher.update(b"\n");
        hasher.update(body.unwrap_or("").as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn fixture_path(&self, service: &str, method: Method, path: &str, body: Option<&str>) -> PathBuf {
        self.root
            .join(service)
            .join(format!("{}.json", Self::request_hash(method, path, body)))
    }

    pub fn load(
        &self,
        service: &str,
        method: Method,
        path: &str,
        body: Option<&str>,
    ) -> Result<Fixture, CollectError> {
        let file = self.fixture_path(service, method, path, body);
        let text = match std::fs::read_to_string(&file) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CollectError::FixtureNotFound {
                    service: service.to_string(),
                    request: format!("{} {path}", method.as_str()),
                    file,
                })
            }
            Err(e) => return Err(CollectError::Io(e.to_string())),
        };
        serde_json::from_str(&text)
            .map_err(|e| CollectError::Decode(format!("fixture {}: {e}", file.display())))
    }

    pub fn save(&self, fixture: &Fixture) -> Result<PathBuf, CollectError> {
        let file = self.fixture_path(
            &fixture.service,
            fixture.method,
            &fixture.path,
            fixture.request_body.as_deref(),
        );
        let io = |e: std::io::Error| CollectError::Io(format!("{}: {e}", file.display()));
        if let Some(dir) = file.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut text = serde_json::to_string_pretty(fixture).expect("fixture serializes");
        text.push('\n');
        std::fs::write(&file, text).map_err(io)?;
        Ok(file)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubles after every further failure.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

/// Requests against one service, honouring the collection mode.
#[derive(Clone)]
pub struct ServiceClient {
    service: &'static str,
    base_url: String,
    mode: Mode,
    transport: Arc<dyn Transport>,
    store: FixtureStore,
    headers: Vec<(String, String)>,
    retry: RetryPolicy,
}

impl fmt::Debug for ServiceClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServiceClient")
            .field("service", &self.service)
            .field("base_url", &self.base_url)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl ServiceClient {
    pub fn new(
        service: &'static str,
        base_url: &str,
        mode: Mode,
        transport: Arc<dyn Transport>,
        store: FixtureStore,
        retry: RetryPolicy,
    ) -> Self {
        ServiceClient {
            service,
            base_url: base_url.trim_end_matches('/').to_string(),
            mode,
            transport,
            store,
            headers: Vec::new(),
            retry,
        }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn service(&self) -> &'static str {
        self.service
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn get(&self, path: &str) -> Result<HttpResponse, CollectError> {
        self.execute(Method::Get, path, None)
    }

    pub fn post_json(&self, path: &str, body: &str) -> Result<HttpResponse, CollectError> {
        self.execute(Method::Post, path, Some(body))
    }

    fn execute(&self, method: Method, path: &str, body: Option<&str>) -> Result<HttpResponse, CollectError> {
        if self.mode == Mode::Replay {
            let fixture = self.store.load(self.service, method, path, body)?;
            return Ok(HttpResponse {
                status: fixture.status,
                headers: BTreeMap::new(),
                body: fixture.body,
            });
        }

        let request = HttpRequest {
            method,
            url: format!("{}{path}", self.base_url),
            headers: self.headers.clone(),
            body: body.map(str::to_string),
        };
        let attempts = self.retry.attempts.max(1);
        let mut delay = self.retry.base_delay;
        let mut attempt = 1;
        let response = loop {
            let outcome = self.transport.send(&request);
            let retryable = match &outcome {
                Ok(r) => r.is_rate_limited() || r.status >= 500,
                Err(_) => true,
            };
            if !retryable || attempt >= attempts {
                break outcome;
            }
            log::warn!(
                "{} {} {}: attempt {attempt} failed, retrying in {delay:?}",
                self.service,
                method.as_str(),
                path
            );
            std::thread::sleep(delay);
            delay *= 2;
            attempt += 1;
        };

        let response = response.map_err(|e| CollectError::Unavailable {
            service: self.service.to_string(),
            detail: e.0,
        })?;
        if response.is_rate_limited() {
            return Err(CollectError::RateLimited {
                service: self.service.to_string(),
                reset: response.rate_limit_reset(),
            });
        }
        if response.status >= 500 {
            return Err(CollectError::Unavailable {
                service: self.service.to_string(),
                detail: format!("HTTP {}", response.status),
            });
        }
        if self.mode == Mode::Record {
            self.store.save(&Fixture {
                service: self.service.to_string(),
                method,
                path: path.to_string(),
                request_body: body.map(str::to_string),
                status: response.status,
                body: response.body.clone(),
            })?;
        }
        Ok(response)
    }
}
