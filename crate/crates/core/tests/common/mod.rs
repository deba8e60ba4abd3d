#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tempfile::TempDir;

/// 2021-01-01T00:00:00Z
pub const BASE_EPOCH: i64 = 1_609_459_200;
pub const DAY: i64 = 86_400;

/// A throwaway git repository with fully pinned identities and dates, so
/// commit hashes are reproducible.
pub struct FixtureRepo {
    pub dir: TempDir,
}

impl FixtureRepo {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let repo = FixtureRepo { dir };
        repo.git(&["init", "-q", "-b", "main"]);
        repo
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn source(&self) -> String {
        self.path().to_str().unwrap().to_string()
    }

    fn command(&self, day: f64) -> Command {
        let stamp = format!("@{} +0000", BASE_EPOCH + (day * DAY as f64) as i64);
        let mut cmd = Command::new("git");
        cmd.arg("-C")
            .arg(self.path())
            .env("GIT_CONFIG_GLOBAL", "/dev/null")
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("GIT_AUTHOR_NAME", "Fixture Author")
            .env("GIT_AUTHOR_EMAIL", "author@example.org")
            .env("GIT_COMMITTER_NAME", "Fixture Author")
            .env("GIT_COMMITTER_EMAIL", "author@example.org")
            .env("GIT_AUTHOR_DATE", &stamp)
            .env("GIT_COMMITTER_DATE", &stamp);
        cmd
    }

    pub fn git_at(&self, day: f64, args: &[&str]) -> String {
        let out = self.command(day).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "git {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap().trim().to_string()
    }

    pub fn git(&self, args: &[&str]) -> String {
        self.git_at(0.0, args)
    }

    pub fn write(&self, file: &str, content: &str) {
        let path = self.path().join(file);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).unwrap();
        }
        std::fs::write(path, content).unwrap();
    }

    /// Commit at `day` days after the base date. Appends one line to
    /// `changes.txt` so every commit has a nonempty diff.
    pub fn commit(&self, message: &str, day: f64) -> String {
        let log = self.path().join("changes.txt");
        let mut text = std::fs::read_to_string(&log).unwrap_or_default();
        text.push_str(message.lines().next().unwrap_or(""));
        text.push('\n');
        std::fs::write(&log, text).unwrap();
        self.git_at(day, &["add", "-A"]);
        self.git_at(day, &["commit", "-q", "--no-gpg-sign", "-m", message]);
        self.git(&["rev-parse", "HEAD"])
    }

    /// Commit `content` as `file` only, leaving `changes.txt` alone.
    pub fn commit_file(&self, message: &str, day: f64, file: &str, content: &str) -> String {
        self.write(file, content);
        self.git_at(day, &["add", file]);
        self.git_at(day, &["commit", "-q", "--no-gpg-sign", "-m", message]);
        self.git(&["rev-parse", "HEAD"])
    }

    pub fn tag(&self, name: &str) {
        self.git(&["tag", name]);
    }

    pub fn annotated_tag(&self, name: &str, day: f64) {
        self.git_at(day, &["tag", "-a", "-m", name, name]);
    }
}

pub const MANIFEST: &str = r#"[package]
name = "examplelib"
version = "0.3.0"

[dependencies]
examplelib-core = "1.2.0"
safecrate = "0.4.1"
oldparser = "2.0.0"
"#;

/// The standard end-to-end fixture: 12 commits and three tags at days
/// 0, 10 and 40.
///
/// | window  | commits | C | A | P | U |
/// |---------|---------|---|---|---|---|
/// | v0.1.0  | 3       | 1 | 1 | 0 | 1 |
/// | v0.2.0  | 4       | 2 | 1 | 1 | 0 |
/// | v0.3.0  | 3       | 1 | 2 | 0 | 0 |
/// | (tail)  | 2       | 0 | 0 | 1 | 1 |
pub fn standard_repo() -> FixtureRepo {
    let repo = FixtureRepo::new();
    repo.write("Cargo.toml", MANIFEST);
    repo.commit("Initial project layout", -3.0);
    repo.commit("add parser support for headers", -2.0);
    repo.commit("fix crash on empty input", 0.0);
    repo.tag("v0.1.0");
    repo.commit("fix off-by-one error in lexer", 2.0);
    repo.commit("fix bug in tokenizer", 4.0);
    repo.commit("refactor lexer state machine", 6.0);
    repo.commit("add streaming api", 10.0);
    repo.tag("v0.2.0");
    repo.commit("refactor error handling", 20.0);
    repo.commit("introduce plugin system", 30.0);
    repo.commit("implement new config loader", 40.0);
    repo.tag("v0.3.0");
    repo.commit("update changelog", 45.0);
    repo.commit("clean up docs", 50.0);
    repo
}

/// 23 releases of three commits each. Corrective leads adaptive on even
/// releases and trails it on odd ones up to release 21; release 22 repeats
/// release 21. Perfective stays at zero, so only the adaptive/corrective
/// pair ever crosses: 21 times.
pub fn alternating_repo() -> FixtureRepo {
    let repo = FixtureRepo::new();
    let mut day = 0.0;
    for release in 0..23 {
        let corrective_leads = release.min(21) % 2 == 0;
        let (fixes, adds) = if corrective_leads { (2, 1) } else { (1, 2) };
        for k in 0..fixes {
            repo.commit(&format!("fix crash {release}.{k}"), day);
            day += 0.5;
        }
        for k in 0..adds {
            repo.commit(&format!("add option {release}.{k}"), day);
            day += 0.5;
        }
        repo.tag(&format!("r{release:02}"));
    }
    repo
}

pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
    pub delay: Duration,
}

impl Reply {
    pub fn json(status: u16, body: impl Into<String>) -> Self {
        Reply {
            status,
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: body.into(),
            delay: Duration::ZERO,
        }
    }
}

/// Minimal HTTP server on an ephemeral port, answering every request with
/// `handler(method, path_and_query, body)`.
pub struct TestServer {
    pub url: String,
    server: Arc<tiny_http::Server>,
    hits: Arc<AtomicUsize>,
    worker: Option<JoinHandle<()>>,
}

impl TestServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&str, &str, &str) -> Reply + Send + Sync + 'static,
    {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let worker = {
            let server = server.clone();
            let hits = hits.clone();
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    hits.fetch_add(1, Ordering::SeqCst);
                    let mut body = String::new();
                    let _ = request.as_reader().read_to_string(&mut body);
                    let method = request.method().as_str().to_string();
                    let reply = handler(&method, request.url(), &body);
                    std::thread::sleep(reply.delay);
                    let mut response =
                        tiny_http::Response::from_string(reply.body).with_status_code(reply.status);
                    for (k, v) in reply.headers {
                        response.add_header(tiny_http::Header::from_bytes(k.as_bytes(), v.as_bytes()).unwrap());
                    }
                    let _ = request.respond(response);
                }
            })
        };
        TestServer {
            url,
            server,
            hits,
            worker: Some(worker),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        // A worker still sleeping on a delayed reply is left to finish on
        // its own.
        self.server.unblock();
        drop(self.worker.take());
    }
}



/// Fake GitHub, Stack Exchange and OSV APIs for `example-org/examplelib`.
pub fn fake_services(method: &str, path: &str, body: &str) -> Reply {
    match (method, path) {
        ("GET", "/repos/example-org/examplelib") => Reply::json(
            200,
            r#"{"name":"examplelib","full_name":"example-org/examplelib",
                "description":"An example parsing library",
                "topics":["parser","example"],
                "url":"https://api.github.com/repos/example-org/examplelib",
                "stargazers_count":500,"watchers_count":500,"forks_count":80,
                "subscribers_count":42,"open_issues_count":7,
                "license":{"key":"mit","name":"MIT License","spdx_id":"MIT"}}"#,
        ),
        ("GET", "/repos/example-org/examplelib/languages") => {
            Reply::json(200, r#"{"Rust":9000,"Shell":1000}"#)
        }
        ("GET", "/repos/example-org/examplelib/community/profile") => {
            Reply::json(200, r#"{"health_percentage":85,"files":{}}"#)
        }
        ("GET", "/licenses/mit") => Reply::json(
            200,
            r#"{"key":"mit","spdx_id":"MIT",
                "permissions":["commercial-use","modifications","distribution","private-use"],
                "conditions":["include-copyright"],
                "limitations":["liability","warranty"]}"#,
        ),
        ("GET", "/repos/example-org/unlicensed") => Reply::json(
            200,
            r#"{"name":"unlicensed","description":null,
                "url":"https://api.github.com/repos/example-org/unlicensed",
                "stargazers_count":1,"forks_count":0,"subscribers_count":1,
                "open_issues_count":0,"license":null}"#,
        ),
        ("GET", "/repos/example-org/unlicensed/languages") => Reply::json(200, "{}"),
        ("GET", "/repos/example-org/unlicensed/community/profile") => {
            Reply::json(200, r#"{"health_percentage":null}"#)
        }
        ("GET", p) if p.starts_with("/2.3/search/advanced") => {
            let total = match (p.contains("tagged=examplelib"), p.contains("answers=1")) {
                (true, false) => 10,
                (true, true) => 7,
                _ => 0,
            };
            Reply::json(200, format!(r#"{{"total":{total}}}"#))
        }
        ("POST", "/v1/query") => {
            let query: serde_json::Value = serde_json::from_str(body).unwrap();
            let name = query["package"]["name"].as_str().unwrap_or("");
            let version = query["version"].as_str().unwrap_or("");
            match (name, version) {
                ("examplelib-core", "1.2.0") => Reply::json(
                    200,
                    r#"{"vulns":[{"id":"EXAMPLE-2024-0001","summary":"Stack overflow on deeply nested input",
                        "database_specific":{"severity":"HIGH"}}]}"#,
                ),
                ("oldparser", "2.0.0") => Reply::json(
                    200,
                    r#"{"vulns":[{"id":"EXAMPLE-2023-0042","details":"Quadratic blowup in header parsing\nMore text.",
                        "database_specific":{"severity":"MODERATE"}}]}"#,
                ),
                _ => Reply::json(200, "{}"),
            }
        }
        _ => Reply::json(404, r#"{"message":"Not Found"}"#),
    }
}

pub fn tempdir_path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

pub const SLUG: &str = "example-org/examplelib";

/// Run configuration for the fixture services. `api` is the fake server's
/// base URL; replay runs never contact it.
pub fn run_config(
    source: &str,
    out: &Path,
    fixtures: &Path,
    cache: &Path,
    mode: oss_recon::collectors::http::Mode,
    api: &str,
) -> oss_recon::pipeline::RunConfig {
    let mut config = oss_recon::pipeline::RunConfig::new(source, out);
    config.repo_slug = Some(SLUG.to_string());
    config.cache_dir = cache.to_path_buf();
    config.collectors = oss_recon::collectors::CollectorSettings {
        mode,
        fixtures_dir: fixtures.to_path_buf(),
        github_api: api.to_string(),
        stackexchange_api: api.to_string(),
        osv_api: api.to_string(),
        retry: oss_recon::collectors::http::RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(5),
        },
        request_timeout: Duration::from_secs(5),
        ..oss_recon::collectors::CollectorSettings::default()
    };
    config
}

/// Record fixtures for `repo` from the fake services into `fixtures`.
pub fn record_fixtures(repo: &FixtureRepo, fixtures: &Path) {
    let server = TestServer::start(fake_services);
    let scratch = tempfile::tempdir().unwrap();
    let config = run_config(
        &repo.source(),
        &scratch.path().join("out"),
        fixtures,
        &scratch.path().join("cache"),
        oss_recon::collectors::http::Mode::Record,
        &server.url,
    );
    let outcome = oss_recon::pipeline::assess(&config).unwrap();
    assert!(outcome.report.unavailable.is_empty(), "{:?}", outcome.report.unavailable);
}
