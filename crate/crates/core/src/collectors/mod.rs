//! External attribute collectors: hosting-service metadata, Q&A support
//! statistics and dependency advisories.
//!
//! Each collector family talks to one service through a [`ServiceClient`],
//! which in replay mode answers only from recorded fixtures.

pub mod github;
pub mod http;
pub mod manifest;
pub mod osv;
pub mod stackexchange;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{FixtureStore, Mode, RetryPolicy, ServiceClient, Transport};

pub const TOKEN_ENV: &str = "OSS_RECON_TOKEN";
pub const DEFAULT_GITHUB_API: &str = "https://api.github.com";
pub const DEFAULT_STACKEXCHANGE_API: &str = "https://api.stackexchange.com";
pub const DEFAULT_OSV_API: &str = "https://api.osv.dev";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CollectError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{service} rate limited{}", .reset.map(|r| format!(" until {}", r.to_rfc3339())).unwrap_or_default())]
    RateLimited {
        service: String,
        reset: Option<DateTime<Utc>>,
    },
    #[error("fixture not found for {service} {request} (expected {})", .file.display())]
    FixtureNotFound {
        service: String,
        request: String,
        file: PathBuf,
    },
    #[error("{service} service unavailable: {detail}")]
    Unavailable { service: String, detail: String },
    #[error("{service} returned HTTP {status} for {path}")]
    Status {
        service: String,
        status: u16,
        path: String,
    },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMetadata {
    pub name: String,
    pub description: String,
    pub topics: Vec<String>,
    pub api_url: String,
    /// Language name to byte count.
    pub languages: BTreeMap<String, u64>,
    /// `None` when the hosting service did not report it.
    pub community_health_pct: Option<u8>,
    pub open_issues: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityInterest {
    pub stars: u64,
    pub forks: u64,
    pub watchers: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportStats {
    pub tag: String,
    pub question_count: u64,
    pub answered_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
    Unknown,
}

impl Severity {
    /// Accepts advisory-database spellings such as `MODERATE` and `High`.
    pub fn from_label(label: &str) -> Severity {
        match label.trim().to_ascii_lowercase().as_str() {
            "low" => Severity::Low,
            "moderate" | "medium" => Severity::Medium,
            "high" => Severity::High,
            "critical" => Severity::Critical,
            _ => Severity::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
            Severity::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnerabilityFinding {
    pub advisory_id: String,
    pub affected_package: String,
    pub severity: Severity,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicenseInfo {
    pub spdx_id: String,
    pub permissions: Vec<String>,
    pub conditions: Vec<String>,
    pub limitations: Vec<String>,
}

impl LicenseInfo {
    pub const NOASSERTION: &'static str = "NOASSERTION";

    pub fn no_assertion() -> Self {
        LicenseInfo {
            spdx_id: Self::NOASSERTION.to_string(),
            permissions: Vec::new(),
            conditions: Vec::new(),
            limitations: Vec::new(),
        }
    }
}

impl Default for LicenseInfo {
    fn default() -> Self {
        LicenseInfo::no_assertion()
    }
}

/// Output of a collector that degrades field by field.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partial<T> {
    pub value: T,
    /// Report field paths that could not be populated.
    pub unavailable: Vec<String>,
    pub warnings: Vec<String>,
}

impl<T> Partial<T> {
    pub fn complete(value: T) -> Self {
        Partial {
            value,
            unavailable: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollectorSettings {
    pub mode: Mode,
    pub fixtures_dir: PathBuf,
    pub github_api: String,
    pub stackexchange_api: String,
    pub osv_api: String,
    pub token: Option<String>,
    pub retry: RetryPolicy,
    pub request_timeout: Duration,
}

impl Default for CollectorSettings {
    fn default() -> Self {
        CollectorSettings {
            mode: Mode::Live,
            fixtures_dir: PathBuf::from("fixtures"),
            github_api: DEFAULT_GITHUB_API.to_string(),
            stackexchange_api: DEFAULT_STACKEXCHANGE_API.to_string(),
            osv_api: DEFAULT_OSV_API.to_string(),
            token: None,
            retry: RetryPolicy::default(),
            request_timeout: Duration::from_secs(30),
        }
    }
}

impl CollectorSettings {
    pub fn token_from_env(mut self) -> Self {
        self.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        self
    }
}

/// The three collector families, ready to run.
#[derive(Debug, Clone)]
pub struct Collectors {
    pub github: github::GithubClient,
    pub stackexchange: stackexchange::StackExchangeClient,
    pub osv: osv::OsvClient,
}

impl Collectors {
    /// Live and record modes use a real HTTP client; replay mode installs a
    /// transport that refuses every request.
    pub fn new(settings: &CollectorSettings) -> Result<Self, CollectError> {
        let transport: Arc<dyn Transport> = match settings.mode {
            Mode::Replay => Arc::new(http::OfflineTransport),
            Mode::Live | Mode::Record => Arc::new(
                http::ReqwestTransport::new(settings.request_timeout).map_err(|e| {
                    CollectError::Unavailable {
                        service: "http".into(),
                        detail: e.0,
                    }
                })?,
            ),
        };
        Ok(Self::with_transport(settings, transport))
    }

    pub fn with_transport(settings: &CollectorSettings, transport: Arc<dyn Transport>) -> Self {
        let store = FixtureStore::new(&settings.fixtures_dir);
        let client = |service, base: &str| {
            ServiceClient::new(
                service,
                base,
                settings.mode,
                transport.clone(),
                store.clone(),
                settings.retry,
            )
        };
        Collectors {
            github: github::GithubClient::new(
                client("github", &settings.github_api),
                settings.token.as_deref(),
            ),
            stackexchange: stackexchange::StackExchangeClient::new(client(
                "stackexchange",
                &settings.stackexchange_api,
            )),
            osv: osv::OsvClient::new(client("osv", &settings.osv_api)),
        }
    }
}

pub(crate) fn decode<T: serde::de::DeserializeOwned>(
    service: &str,
    path: &str,
    body: &str,
) -> Result<T, CollectError> {
    serde_json::from_str(body).map_err(|e| CollectError::Decode(format!("{service} {path}: {e}")))
}
