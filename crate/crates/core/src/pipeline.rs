//! End-to-end orchestration: mining, classification, maturity, collectors
//! and report output, plus batch runs over many repositories.
//!
//! Failure policy: anything that prevents mining the repository is fatal,
//! while collector failures only mark the affected report fields as
//! unavailable.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{profile_release, CommitClassifier, KeywordTable, SkipMerges};
use crate::collectors::github::{parse_slug, slug_from_remote, RepoSnapshot};
use crate::collectors::stackexchange::default_tag;
use crate::collectors::{manifest, CollectorSettings, Collectors, Mode, Partial, SupportStats, Transport};
use crate::fixed::Fixed2;
use crate::maturity::{all_crossovers, maturity_score, ActivityProfile};
use crate::miner::{self, MineError, OpenOptions};
use crate::report::{self, AssessmentReport, ClassificationTotals, ReleaseActivity, ReportParts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Format {
    Json,
    Html,
}

impl Format {
    pub fn file_name(self) -> &'static str {
        match self {
            Format::Json => "report.json",
            Format::Html => "report.html",
        }
    }
}

/// A nonempty set of output formats, parsed from e.g. `"json,html"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formats(BTreeSet<Format>);

impl Formats {
    pub fn all() -> Self {
        Formats([Format::Json, Format::Html].into_iter().collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = Format> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, format: Format) -> bool {
        self.0.contains(&format)
    }
}

impl FromStr for Formats {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            set.insert(match part.to_ascii_lowercase().as_str() {
                "json" => Format::Json,
                "html" => Format::Html,
                other => return Err(format!("unknown format {other:?} (expected json or html)")),
            });
        }
        if set.is_empty() {
            return Err("at least one output format is required".into());
        }
        Ok(Formats(set))
    }
}

impl fmt::Display for Formats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .iter()
            .map(|x| match x {
                Format::Json => "json",
                Format::Html => "html",
            })
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: String,
    pub output_dir: PathBuf,
    pub tag_filter: Option<String>,
    pub keyword_table: Option<PathBuf>,
    pub support_tag: Option<String>,
    /// `owner/repo` on the hosting service; derived from the remote URL when
    /// absent.
    pub repo_slug: Option<String>,
    pub formats: Formats,
    pub timeout_seconds: u64,
    /// Root under which remote repositories are cloned.
    pub cache_dir: PathBuf,
    pub no_cache: bool,
    pub skip_merges: bool,
    /// Dependency manifests to scan; empty means the supported manifests at
    /// the repository root.
    pub manifests: Vec<PathBuf>,
    /// Instant used as "now" for the repository age and `generated_at`.
    /// Replay runs default to the newest commit so that reruns are
    /// byte-identical.
    pub reference_time: Option<DateTime<Utc>>,
    pub collectors: CollectorSettings,
}

impl RunConfig {
    pub fn new(source: impl Into<String>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            source: source.into(),
            output_dir: output_dir.into(),
            tag_filter: None,
            keyword_table: None,
            support_tag: None,
            repo_slug: None,
            formats: Formats::all(),
            timeout_seconds: 600,
            cache_dir: std::env::temp_dir().join("oss-recon-cache"),
            no_cache: false,
            skip_merges: false,
            manifests: Vec::new(),
            reference_time: None,
            collectors: CollectorSettings::default(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.collectors.mode
    }

    fn validate(&self) -> Result<Validated, AssessError> {
        if self.timeout_seconds == 0 {
            return Err(AssessError::Config("timeout must be a positive number of seconds".into()));
        }
        if self.source.trim().is_empty() {
            return Err(AssessError::Config("repository source is empty".into()));
        }
        if let Some(filter) = &self.tag_filter {
            regex::Regex::new(filter)
                .map_err(|e| AssessError::Config(format!("invalid tag filter: {e}")))?;
        }
        if self.support_tag.as_deref().is_some_and(|t| t.trim().is_empty()) {
            return Err(AssessError::Config("support tag is empty".into()));
        }
        let slug = match &self.repo_slug {
            Some(s) => Some(
                parse_slug(s).ok_or_else(|| AssessError::Config(format!("invalid repository slug {s:?}")))?,
            ),
            None => None,
        };
        let table = match &self.keyword_table {
            Some(path) => KeywordTable::from_file(path).map_err(|e| AssessError::Config(e.to_string()))?,
            None => KeywordTable::default(),
        };
        Ok(Validated { table, slug })
    }
}

struct Validated {
    table: KeywordTable,
    slug: Option<(String, String)>,
}

#[derive(Debug, Error)]
pub enum AssessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unusable repository: {0}")]
    Repository(#[from] MineError),
    #[error("assessment exceeded the {0} s timeout")]
    Timeout(u64),
    #[error("report assembly failed: {0}")]
    Report(#[from] report::ReportError),
    #[error("failed to write output: {0}")]
    Output(String),
    #[error("assessment cancelled")]
    Cancelled,
}

impl AssessError {
    /// 1 = unusable repository, 2 = configuration error, 3 = timeout.
    pub fn exit_code(&self) -> i32 {
        match self {
            AssessError::Config(_) => 2,
            AssessError::Timeout(_) => 3,
            AssessError::Repository(_)
            | AssessError::Report(_)
            | AssessError::Output(_)
            | AssessError::Cancelled => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssessOutcome {
    pub report: AssessmentReport,
    pub written: Vec<PathBuf>,
}

/// Run one assessment and write the selected report formats.
pub fn assess(config: &RunConfig) -> Result<AssessOutcome, AssessError> {
    assess_inner(config, None)
}

/// [`assess`] with the collectors' HTTP transport replaced.
pub fn assess_with_transport(
    config: &RunConfig,
    transport: Arc<dyn Transport>,
) -> Result<AssessOutcome, AssessError> {
    assess_inner(config, Some(transport))
}

fn assess_inner(config: &RunConfig, transport: Option<Arc<dyn Transport>>) -> Result<AssessOutcome, AssessError> {
    let validated = config.validate()?;
    let collectors = match transport {
        Some(t) => Collectors::with_transport(&config.collectors, t),
        None => Collectors::new(&config.collectors).map_err(|e| AssessError::Config(e.to_string()))?,
    };

    let cancel = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();
    {
        let config = config.clone();
        let cancel = cancel.clone();
        std::thread::Builder::new()
            .name("assess".into())
            .spawn(move || {
                let result = build_report(&config, validated, &collectors, &cancel);
                let _ = tx.send(result);
            })
            .map_err(|e| AssessError::Output(format!("failed to start worker: {e}")))?;
    }

    let report = match rx.recv_timeout(Duration::from_secs(config.timeout_seconds)) {
        Ok(result) => result?,
        Err(mpsc::RecvTimeoutError::Timeout) => {
            cancel.store(true, Ordering::SeqCst);
            return Err(AssessError::Timeout(config.timeout_seconds));
        }
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            return Err(AssessError::Output("assessment worker panicked".into()))
        }
    };

    let written = write_outputs(&report, &config.output_dir, &config.formats)?;
    Ok(AssessOutcome { report, written })
}

fn check_cancel(cancel: &AtomicBool) -> Result<(), AssessError> {
    if cancel.load(Ordering::SeqCst) {
        Err(AssessError::Cancelled)
    } else {
        Ok(())
    }
}

fn build_report(
    config: &RunConfig,
    validated: Validated,
    collectors: &Collectors,
    cancel: &AtomicBool,
) -> Result<AssessmentReport, AssessError> {
    let handle = miner::open_repository(
        &config.source,
        &config.cache_dir,
        OpenOptions {
            no_cache: config.no_cache,
        },
    )?;
    check_cancel(cancel)?;
    let history = miner::enumerate_releases(&handle, config.tag_filter.as_deref())?;
    check_cancel(cancel)?;

    let table = validated.table;
    let classifier: Box<dyn CommitClassifier> = if config.skip_merges {
        Box::new(SkipMerges(table))
    } else {
        Box::new(table)
    };
    let profiles: Vec<ActivityProfile> = history
        .windows
        .iter()
        .map(|w| profile_release(w, classifier.as_ref()))
        .collect();
    let mut totals = ClassificationTotals::default();
    for commit in history.all_commits() {
        let mut p = ActivityProfile::empty(0);
        p.record(classifier.classify(commit).label);
        totals.corrective += p.corrective;
        totals.adaptive += p.adaptive;
        totals.perfective += p.perfective;
        totals.unclassified += p.unclassified;
    }

    let now = config.reference_time.unwrap_or_else(|| match config.mode() {
        Mode::Replay => history
            .all_commits()
            .map(|c| c.author_timestamp)
            .max()
            .unwrap_or_else(|| Utc.timestamp_opt(0, 0).unwrap()),
        Mode::Live | Mode::Record => Utc::now(),
    });
    let mining = miner::mining_summary(&handle, &history, now)?;
    let maturity = maturity_score(&profiles);
    let crossovers = all_crossovers(&profiles);
    check_cancel(cancel)?;

    let slug = validated.slug.or_else(|| {
        slug_from_remote(&config.source).or_else(|| handle.remote_url().and_then(slug_from_remote))
    });
    let repo_name = slug.as_ref().map_or_else(|| handle.name(), |(_, r)| r.clone());
    let (support_tag, support_tag_defaulted) = match &config.support_tag {
        Some(t) => (t.trim().to_string(), false),
        None => (default_tag(&repo_name), true),
    };
    let manifests = if config.manifests.is_empty() {
        manifest::discover(handle.path())
    } else {
        config.manifests.clone()
    };

    let (meta, support, vulns) = std::thread::scope(|scope| {
        let meta = scope.spawn(|| collect_metadata(collectors, slug.as_ref(), &repo_name));
        let support = scope.spawn(|| collect_support(collectors, &support_tag));
        let vulns = scope.spawn(|| match collectors.osv.scan_vulnerabilities(&manifests) {
            Ok(found) => found,
            Err(e) => degraded(Vec::new(), &["vulnerabilities"], format!("vulnerability scan unavailable: {e}")),
        });
        (
            meta.join().expect("metadata collector panicked"),
            support.join().expect("support collector panicked"),
            vulns.join().expect("vulnerability collector panicked"),
        )
    });
    check_cancel(cancel)?;

    let mut unavailable = Vec::new();
    unavailable.extend(meta.unavailable);
    unavailable.extend(support.unavailable);
    unavailable.extend(vulns.unavailable);

    Ok(report::assemble(ReportParts {
        generated_at: now,
        source: config.source.clone(),
        repo_metadata: meta.value.metadata,
        community: meta.value.community,
        license: meta.value.license,
        support: support.value,
        support_tag_defaulted,
        vulnerabilities: vulns.value,
        mining,
        releases: history.windows.iter().map(ReleaseActivity::from).collect(),
        profiles,
        classification_totals: totals,
        crossovers,
        maturity,
        unavailable,
        warnings: vec![history.warnings, meta.warnings, support.warnings, vulns.warnings],
    })?)
}

fn degraded<T>(value: T, fields: &[&str], warning: String) -> Partial<T> {
    log::warn!("{warning}");
    Partial {
        value,
        unavailable: fields.iter().map(|f| f.to_string()).collect(),
        warnings: vec![warning],
    }
}

fn collect_metadata(
    collectors: &Collectors,
    slug: Option<&(String, String)>,
    repo_name: &str,
) -> Partial<RepoSnapshot> {
    let fallback = || {
        let mut snapshot = RepoSnapshot::default();
        snapshot.metadata.name = repo_name.to_string();
        snapshot
    };
    let fields = ["repo_metadata", "community", "license"];
    match slug {
        None => degraded(
            fallback(),
            &fields,
            "hosting-service repository unknown (pass --repo-slug owner/repo); metadata unavailable".into(),
        ),
        Some((owner, repo)) => match collectors.github.fetch_repo_metadata(owner, repo) {
            Ok(found) => found,
            Err(e) => degraded(fallback(), &fields, format!("repository metadata unavailable: {e}")),
        },
    }
}

fn collect_support(collectors: &Collectors, tag: &str) -> Partial<SupportStats> {
    match collectors.stackexchange.fetch_support_stats(tag) {
        Ok(found) => found,
        Err(e) => degraded(
            SupportStats {
                tag: tag.to_string(),
                ..SupportStats::default()
            },
            &["support"],
            format!("support statistics unavailable: {e}"),
        ),
    }
}

/// Write each format to a temporary sibling and rename it into place. If any
/// write fails, files already written by this call are removed.
pub fn write_outputs(report: &AssessmentReport, dir: &Path, formats: &Formats) -> Result<Vec<PathBuf>, AssessError> {
    let io = |what: &Path, e: std::io::Error| AssessError::Output(format!("{}: {e}", what.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for format in formats.iter() {
        let bytes = match format {
            Format::Json => report::to_json(report),
            Format::Html => report::to_html(report),
        };
        let target = dir.join(format.file_name());
        let staging = dir.join(format!(".{}.partial", format.file_name()));
        let result = std::fs::write(&staging, &bytes).and_then(|_| std::fs::rename(&staging, &target));
        if let Err(e) = result {
            let _ = std::fs::remove_file(&staging);
            for path in &written {
                let _ = std::fs::remove_file(path);
            }
            return Err(io(&target, e));
        }
        written.push(target);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRow {
    pub source: String,
    pub status: BatchStatus,
    pub report_dir: PathBuf,
    pub release_count: Option<usize>,
    pub total_crossovers: Option<usize>,
    pub maturity_ratio: Option<Fixed2>,
    pub exit_code: i32,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
}

impl BatchSummary {
    pub fn succeeded(&self) -> usize {
        self.rows.iter().filter(|r| r.status == BatchStatus::Ok).count()
    }

    pub fn failed(&self) -> usize {
        self.rows.len() - self.succeeded()
    }

    /// Fixed-width text table for terminals.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.source.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$}  {:>6}  {:>8}  {:>10}  {}\n", "source", "status", "releases", "crossovers", "maturity");
        for r in &self.rows {
            let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
            let status = match r.status {
                BatchStatus::Ok => "ok",
                BatchStatus::Failed => "failed",
            };
            out.push_str(&format!(
                "{:<width$}  {:>6}  {:>8}  {:>10}  {}\n",
                r.source,
                status,
                opt(r.release_count.map(|v| v.to_string())),
                opt(r.total_crossovers.map(|v| v.to_string())),
                opt(r.maturity_ratio.map(|v| v.to_string())),
            ));
        }
        out
    }
}

/// One list entry: a repository source optionally followed by its
/// `owner/repo` slug. Blank lines and `#` comments are skipped.
pub fn read_batch_list(path: &Path) -> Result<Vec<(String, Option<String>)>, AssessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AssessError::Config(format!("cannot read batch list {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.split_whitespace();
            let source = parts.next().unwrap_or_default().to_string();
            (source, parts.next().map(str::to_string))
        })
        .collect())
}

/// Assess every repository in `list_file`, each into its own directory under
/// the template's output directory, with at most `parallel` running at once.
/// Writes `summary.json` next to the per-repository directories. A failing
/// repository is recorded in the summary and does not stop the batch.
pub fn batch(list_file: &Path, template: &RunConfig, parallel: usize) -> Result<BatchSummary, AssessError> {
    let entries = read_batch_list(list_file)?;
    template.validate()?;

    let mut used = HashSet::new();
    let jobs: Vec<(String, RunConfig)> = entries
        .into_iter()
        .map(|(source, slug)| {
            let base = miner::sanitize_identifier(&source);
            let mut dir_name = base.clone();
            let mut n = 2;
            while !used.insert(dir_name.clone()) {
                dir_name = format!("{base}-{n}");
                n += 1;
            }
            let mut config = template.clone();
            config.source = source.clone();
            config.output_dir = template.output_dir.join(dir_name);
            config.repo_slug = slug;
            config.support_tag = None;
            config.manifests = Vec::new();
            (source, config)
        })
        .collect();

    let results: Mutex<Vec<Option<BatchRow>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..parallel.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((source, config)) = jobs.get(i) else { break };
                log::info!("assessing {source}");
                let row = match assess(config) {
                    Ok(outcome) => BatchRow {
                        source: source.clone(),
                        status: BatchStatus::Ok,
                        report_dir: config.output_dir.clone(),
                        release_count: Some(outcome.report.mining.release_count),
                        total_crossovers: Some(outcome.report.maturity.total_crossovers),
                        maturity_ratio: Some(outcome.report.maturity.maturity_ratio),
                        exit_code: 0,
                        error: None,
                    },
                    Err(e) => {
                        log::warn!("{source}: {e}");
                        BatchRow {
                            source: source.clone(),
                            status: BatchStatus::Failed,
                            report_dir: config.output_dir.clone(),
                            release_count: None,
                            total_crossovers: None,
                            maturity_ratio: None,
                            exit_code: e.exit_code(),
                            error: Some(e.to_string()),
                        }
                    }
                };
                results.lock().expect("results lock")[i] = Some(row);
            });
        }
    });

    let summary = BatchSummary {
        rows: results
            .into_inner()
            .expect("results lock")
            .into_iter()
            .map(|r| r.expect("every job produces a row"))
            .collect(),
    };
    std::fs::create_dir_all(&template.output_dir)
        .map_err(|e| AssessError::Output(format!("{}: {e}", template.output_dir.display())))?;
    let path = template.output_dir.join("summary.json");
    let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(|e| AssessError::Output(format!("{}: {e}", path.display())))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_parse() {
        assert_eq!("json,html".parse::<Formats>().unwrap(), Formats::all());
        assert_eq!(" html ".parse::<Formats>().unwrap().to_string(), "html");
        assert!("".parse::<Formats>().is_err());
        assert!(",".parse::<Formats>().is_err());
        assert!("pdf".parse::<Formats>().is_err());
    }

    #[test]
    fn invalid_configs_exit_2() {
        let mut config = RunConfig::new(".", "out");
        config.timeout_seconds = 0;
        assert_eq!(config.validate().err().unwrap().exit_code(), 2);

        let mut config = RunConfig::new(".", "out");
        config.tag_filter = Some("(".into());
        assert_eq!(config.validate().err().unwrap().exit_code(), 2);

        let mut config = RunConfig::new(".", "out");
        config.repo_slug = Some("nope".into());
        assert_eq!(config.validate().err().unwrap().exit_code(), 2);

        let mut config = RunConfig::new(".", "out");
        config.keyword_table = Some(PathBuf::from("/definitely/missing.txt"));
        assert_eq!(config.validate().err().unwrap().exit_code(), 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(AssessError::Timeout(5).exit_code(), 3);
        assert_eq!(AssessError::Repository(MineError::NotARepository("x".into())).exit_code(), 1);
    }

    #[test]
    fn batch_list_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("list.txt");
        std::fs::write(&path, "# repos\n\n/srv/a\nhttps://github.com/x/y  x/y\n").unwrap();
        assert_eq!(
            read_batch_list(&path).unwrap(),
            vec![
                ("/srv/a".to_string(), None),
                ("https://github.com/x/y".to_string(), Some("x/y".to_string()))
            ]
        );
        assert_eq!(read_batch_list(&dir.path().join("missing")).unwrap_err().exit_code(), 2);
    }
}
