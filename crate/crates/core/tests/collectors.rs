mod common;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use common::{fake_services, Reply, TestServer, MANIFEST};
use oss_recon::collectors::http::{HttpRequest, HttpResponse, Mode, RetryPolicy, Transport, TransportError};
use oss_recon::collectors::{CollectError, CollectorSettings, Collectors, Severity};

fn settings(server: &TestServer, mode: Mode, fixtures: &std::path::Path) -> CollectorSettings {
    CollectorSettings {
        mode,
        fixtures_dir: fixtures.to_path_buf(),
        github_api: server.url.clone(),
        stackexchange_api: server.url.clone(),
        osv_api: server.url.clone(),
        retry: RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(5),
        },
        request_timeout: Duration::from_secs(5),
        ..CollectorSettings::default()
    }
}

fn manifest_dir() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("Cargo.toml");
    std::fs::write(&path, MANIFEST).unwrap();
    (dir, path)
}

/// Every request fails the test run.
struct Forbidden(AtomicUsize);

impl Transport for Forbidden {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(TransportError(format!("unexpected live request to {}", request.url)))
    }
}

#[test]
fn live_metadata_support_and_license() {
    let server = TestServer::start(fake_services);
    let fixtures = tempfile::tempdir().unwrap();
    let collectors = Collectors::new(&settings(&server, Mode::Live, fixtures.path())).unwrap();

    let snapshot = collectors.github.fetch_repo_metadata("example-org", "examplelib").unwrap();
    assert!(snapshot.unavailable.is_empty(), "{:?}", snapshot.unavailable);
    let snap = snapshot.value;
    assert_eq!(snap.community.stars, 500);
    assert_eq!(snap.community.forks, 80);
    assert_eq!(snap.community.watchers, 42);
    assert_eq!(snap.metadata.name, "examplelib");
    assert_eq!(snap.metadata.description, "An example parsing library");
    assert_eq!(snap.metadata.topics, ["parser", "example"]);
    assert_eq!(snap.metadata.languages.get("Rust"), Some(&9000));
    assert_eq!(snap.metadata.community_health_pct, Some(85));
    assert_eq!(snap.license.spdx_id, "MIT");
    assert_eq!(snap.license.conditions, ["include-copyright"]);
    assert_eq!(snap.license.limitations, ["liability", "warranty"]);

    let support = collectors.stackexchange.fetch_support_stats("examplelib").unwrap().value;
    assert_eq!((support.question_count, support.answered_count), (10, 7));
    assert!(support.answered_count <= support.question_count);

    let unknown = collectors.stackexchange.fetch_support_stats("no-such-tag").unwrap().value;
    assert_eq!((unknown.question_count, unknown.answered_count), (0, 0));

    // no fixtures written outside record mode
    assert!(std::fs::read_dir(fixtures.path()).unwrap().next().is_none());
}

#[test]
fn repository_without_license_is_noassertion() {
    let server = TestServer::start(fake_services);
    let fixtures = tempfile::tempdir().unwrap();
    let collectors = Collectors::new(&settings(&server, Mode::Live, fixtures.path())).unwrap();
    let snapshot = collectors.github.fetch_repo_metadata("example-org", "unlicensed").unwrap();
    let snap = snapshot.value;
    assert_eq!(snap.license.spdx_id, "NOASSERTION");
    assert!(snap.license.permissions.is_empty());
    assert!(snap.license.conditions.is_empty());
    assert!(snap.license.limitations.is_empty());
    assert_eq!(snap.metadata.community_health_pct, None);
    assert_eq!(snap.metadata.description, "");
}

#[test]
fn missing_repository_is_not_found() {
    let server = TestServer::start(fake_services);
    let fixtures = tempfile::tempdir().unwrap();
    let collectors = Collectors::new(&settings(&server, Mode::Live, fixtures.path())).unwrap();
    assert!(matches!(
        collectors.github.fetch_repo_metadata("example-org", "missing"),
        Err(CollectError::NotFound(_))
    ));
}

#[test]
fn rate_limit_carries_reset_after_retries() {
    let server = TestServer::start(|_, _, _| {
        let mut reply = Reply::json(403, r#"{"message":"API rate limit exceeded"}"#);
        reply.headers.push(("x-ratelimit-remaining".into(), "0".into()));
        reply.headers.push(("x-ratelimit-reset".into(), "1700000000".into()));
        reply
    });
    let fixtures = tempfile::tempdir().unwrap();
    let collectors = Collectors::new(&settings(&server, Mode::Live, fixtures.path())).unwrap();
    let err = collectors.github.fetch_repo_metadata("example-org", "examplelib").unwrap_err();
    match err {
        CollectError::RateLimited { reset, .. } => assert_eq!(reset.map(|r| r.timestamp()), Some(1_700_000_000)),
        other => panic!("expected rate limit, got {other:?}"),
    }
    assert_eq!(server.hits(), 3);
}

#[test]
fn server_errors_exhaust_retries() {
    let server = TestServer::start(|_, _, _| Reply::json(503, "{}"));
    let fixtures = tempfile::tempdir().unwrap();
    let collectors = Collectors::new(&settings(&server, Mode::Live, fixtures.path())).unwrap();
    assert!(matches!(
        collectors.stackexchange.fetch_support_stats("examplelib"),
        Err(CollectError::Unavailable { .. })
    ));
    assert_eq!(server.hits(), 3);
}

#[test]
fn vulnerability_scan_finds_two_advisories() {
    let server = TestServer::start(fake_services);
    let fixtures = tempfile::tempdir().unwrap();
    let collectors = Collectors::new(&settings(&server, Mode::Live, fixtures.path())).unwrap();
    let (_dir, manifest) = manifest_dir();
    let scan = collectors.osv.scan_vulnerabilities(&[manifest]).unwrap();
    let findings = scan.value;
    assert_eq!(findings.len(), 2);
    assert_eq!(findings[0].affected_package, "examplelib-core");
    assert_eq!(findings[0].advisory_id, "EXAMPLE-2024-0001");
    assert_eq!(findings[0].severity, Severity::High);
    assert_eq!(findings[1].affected_package, "oldparser");
    assert_eq!(findings[1].severity, Severity::Medium);
    assert_eq!(findings[1].summary, "Quadratic blowup in header parsing");
    assert_eq!(server.hits(), 3);
}

#[test]
fn vulnerability_scan_edge_cases() {
    let server = TestServer::start(fake_services);
    let fixtures = tempfile::tempdir().unwrap();
    let collectors = Collectors::new(&settings(&server, Mode::Live, fixtures.path())).unwrap();

    let empty = tempfile::tempdir().unwrap();
    let no_deps = empty.path().join("Cargo.toml");
    std::fs::write(&no_deps, "[package]\nname = \"x\"\nversion = \"0.1.0\"\n").unwrap();
    let scan = collectors.osv.scan_vulnerabilities(&[no_deps]).unwrap();
    assert!(scan.value.is_empty());
    assert!(scan.warnings.is_empty());
    assert_eq!(server.hits(), 0);

    let broken = empty.path().join("package.json");
    std::fs::write(&broken, "{ not json").unwrap();
    let (_dir, manifest) = manifest_dir();
    let scan = collectors.osv.scan_vulnerabilities(&[broken, manifest]).unwrap();
    assert_eq!(scan.value.len(), 2);
    assert_eq!(scan.warnings.len(), 1, "{:?}", scan.warnings);
    assert!(scan.warnings[0].contains("package.json"));

    let down = TestServer::start(|_, _, _| Reply::json(500, "{}"));
    let collectors = Collectors::new(&settings(&down, Mode::Live, fixtures.path())).unwrap();
    let (_dir, manifest) = manifest_dir();
    assert!(matches!(
        collectors.osv.scan_vulnerabilities(&[manifest]),
        Err(CollectError::Unavailable { .. })
    ));
}

#[test]
fn record_then_replay_is_faithful_and_offline() {
    let server = TestServer::start(fake_services);
    let fixtures = tempfile::tempdir().unwrap();
    let (_dir, manifest) = manifest_dir();

    let recorder = Collectors::new(&settings(&server, Mode::Record, fixtures.path())).unwrap();
    let live_meta = recorder.github.fetch_repo_metadata("example-org", "examplelib").unwrap();
    let live_support = recorder.stackexchange.fetch_support_stats("examplelib").unwrap();
    let live_vulns = recorder.osv.scan_vulnerabilities(std::slice::from_ref(&manifest)).unwrap();
    let recorded_hits = server.hits();
    assert!(recorded_hits > 0);

    let forbidden = Arc::new(Forbidden(AtomicUsize::new(0)));
    let replay_settings = settings(&server, Mode::Replay, fixtures.path());
    let replayer = Collectors::with_transport(&replay_settings, forbidden.clone());
    assert_eq!(replayer.github.fetch_repo_metadata("example-org", "examplelib").unwrap(), live_meta);
    assert_eq!(replayer.stackexchange.fetch_support_stats("examplelib").unwrap(), live_support);
    assert_eq!(replayer.osv.scan_vulnerabilities(&[manifest]).unwrap(), live_vulns);
    assert_eq!(forbidden.0.load(Ordering::SeqCst), 0);
    assert_eq!(server.hits(), recorded_hits);

    // The default replay transport refuses the network too.
    let offline = Collectors::new(&replay_settings).unwrap();
    assert_eq!(offline.github.fetch_repo_metadata("example-org", "examplelib").unwrap(), live_meta);
    assert_eq!(server.hits(), recorded_hits);
}

#[test]
fn replay_without_fixture_names_the_request() {
    let fixtures = tempfile::tempdir().unwrap();
    let settings = CollectorSettings {
        mode: Mode::Replay,
        fixtures_dir: fixtures.path().to_path_buf(),
        ..CollectorSettings::default()
    };
    let collectors = Collectors::new(&settings).unwrap();
    match collectors.stackexchange.fetch_support_stats("examplelib") {
        Err(CollectError::FixtureNotFound { service, request, file }) => {
            assert_eq!(service, "stackexchange");
            assert!(request.contains("tagged=examplelib"), "{request}");
            assert!(file.starts_with(fixtures.path()));
        }
        other => panic!("expected missing fixture, got {other:?}"),
    }
}
