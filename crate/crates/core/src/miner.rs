//! Git history mining.
//!
//! Talks to the `git` executable rather than linking libgit2, so the same
//! repository format and credential helpers as the user's git apply.
//!
//! Every selected tag becomes one [`ReleaseWindow`]. A window holds the
//! commits reachable from its tag but from none of the earlier tags, so a
//! commit is attributed to exactly one window even when tags live on
//! diverging branches. Commits reachable from `HEAD` but from no tag form the
//! unreleased tail.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use chrono::{DateTime, TimeZone, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed::Fixed2;

const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Error)]
pub enum MineError {
    #[error("source does not exist: {0}")]
    SourceNotFound(PathBuf),
    #[error("not a git repository: {0}")]
    NotARepository(PathBuf),
    #[error("remote is unreachable: {url}: {detail}")]
    Unreachable { url: String, detail: String },
    #[error("clone of {url} failed: {detail}")]
    CloneFailed { url: String, detail: String },
    #[error("repository at {0} is a shallow clone; full history is required")]
    ShallowRepository(PathBuf),
    #[error("invalid tag filter: {0}")]
    InvalidTagFilter(#[from] regex::Error),
    #[error("git {args} failed: {stderr}")]
    Git { args: String, stderr: String },
    #[error("failed to run git: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected git output: {0}")]
    Parse(String),
}

pub type Result<T, E = MineError> = std::result::Result<T, E>;

/// One mined commit with line-level diff statistics.
///
/// Merge commits are diffed against their first parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub hash: String,
    pub author_timestamp: DateTime<Utc>,
    pub message: String,
    pub additions: u64,
    pub deletions: u64,
    pub is_merge: bool,
}

impl Commit {
    pub fn subject(&self) -> &str {
        self.message.lines().next().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseWindow {
    pub ordinal: usize,
    pub tag_name: String,
    pub tag_timestamp: DateTime<Utc>,
    pub commits: Vec<Commit>,
}

impl ReleaseWindow {
    pub fn additions(&self) -> u64 {
        self.commits.iter().map(|c| c.additions).sum()
    }

    pub fn deletions(&self) -> u64 {
        self.commits.iter().map(|c| c.deletions).sum()
    }
}

/// Result of [`enumerate_releases`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReleaseHistory {
    /// Released windows in ascending tag order.
    pub windows: Vec<ReleaseWindow>,
    /// Commits after the last selected tag. Never part of maturity analysis.
    pub unreleased: Vec<Commit>,
    /// Set when no tag matched; every commit is then unreleased.
    pub no_releases: bool,
    pub warnings: Vec<String>,
}

impl ReleaseHistory {
    pub fn all_commits(&self) -> impl Iterator<Item = &Commit> {
        self.windows
            .iter()
            .flat_map(|w| w.commits.iter())
            .chain(self.unreleased.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningSummary {
    pub repo_age_days: Fixed2,
    pub first_commit: Option<DateTime<Utc>>,
    pub last_updated: Option<DateTime<Utc>>,
    pub release_count: usize,
    pub avg_days_between_releases: Fixed2,
    pub total_commits: usize,
    pub unreleased_commits: usize,
    pub total_additions: u64,
    pub total_deletions: u64,
}

/// A local working copy ready for mining.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoHandle {
    path: PathBuf,
    remote_url: Option<String>,
}

impl RepoHandle {
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// The URL the repository was cloned from, or its `origin` remote.
    pub fn remote_url(&self) -> Option<&str> {
        self.remote_url.as_deref()
    }

    /// Last path component without a `.git` suffix.
    pub fn name(&self) -> String {
        let from = self
            .remote_url
            .as_deref()
            .map(|u| u.trim_end_matches('/').rsplit(['/', ':']).next().unwrap_or(u).to_string())
            .or_else(|| {
                self.path
                    .canonicalize()
                    .ok()
                    .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            })
            .unwrap_or_default();
        from.trim_end_matches(".git").to_string()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OpenOptions {
    /// Discard any cached clone and clone again.
    pub no_cache: bool,
}

/// True for `scheme://...` URLs and scp-style `user@host:path` remotes.
pub fn is_remote_source(source: &str) -> bool {
    if source.contains("://") {
        return true;
    }
    match (source.find('@'), source.find(':')) {
        (Some(at), Some(colon)) => at < colon && !source[..colon].contains('/'),
        _ => false,
    }
}

/// Cache directory name for a remote: scheme and `.git` suffix dropped, every
/// run of non-alphanumeric characters collapsed to `-`.
pub fn sanitize_identifier(source: &str) -> String {
    let trimmed = source
        .split_once("://")
        .map_or(source, |(_, rest)| rest)
        .trim_end_matches('/')
        .trim_end_matches(".git");
    let mut out = String::with_capacity(trimmed.len());
    for ch in trimmed.chars() {
        if ch.is_ascii_alphanumeric() || ch == '.' || ch == '_' {
            out.push(ch);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_matches(['-', '.']).to_string();
    if out.is_empty() {
        "repo".to_string()
    } else {
        out
    }
}

pub fn open_repository(source: &str, workdir: &Path, options: OpenOptions) -> Result<RepoHandle> {
    if is_remote_source(source) {
        let target = workdir.join(sanitize_identifier(source));
        if target.exists() && (options.no_cache || !is_git_dir(&target)) {
            std::fs::remove_dir_all(&target)?;
        }
        if !target.exists() {
            clone(source, &target)?;
        } else {
            refresh(&target);
        }
        ensure_full_history(&target)?;
        return Ok(RepoHandle {
            path: target,
            remote_url: Some(source.to_string()),
        });
    }

    let path = PathBuf::from(source);
    if !path.exists() {
        return Err(MineError::SourceNotFound(path));
    }
    if !is_git_dir(&path) {
        return Err(MineError::NotARepository(path));
    }
    ensure_full_history(&path)?;
    let remote_url = git(&path, &["config", "--get", "remote.origin.url"])
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    Ok(RepoHandle { path, remote_url })
}

fn is_git_dir(path: &Path) -> bool {
    // `--show-prefix` is empty only at the top of a work tree, so a plain
    // subdirectory of some enclosing repository is rejected.
    match git(path, &["rev-parse", "--is-bare-repository", "--show-prefix"]) {
        Ok(out) => {
            let mut lines = out.lines();
            let bare = lines.next() == Some("true");
            bare || lines.next().unwrap_or("").is_empty()
        }
        Err(_) => false,
    }
}

fn ensure_full_history(path: &Path) -> Result<()> {
    let shallow = git(path, &["rev-parse", "--is-shallow-repository"])?;
    if shallow.trim() == "true" {
        return Err(MineError::ShallowRepository(path.to_path_buf()));
    }
    Ok(())
}

fn clone(url: &str, target: &Path) -> Result<()> {
    let probe = git_command(None)
        .args(["ls-remote", "--quiet", "--heads", url])
        .stdin(Stdio::null())
        .output()?;
    if !probe.status.success() {
        return Err(MineError::Unreachable {
            url: url.to_string(),
            detail: stderr_text(&probe.stderr),
        });
    }
    if let Some(parent) = target.parent() {
        std::fs::create_dir_all(parent)?;
    }
    log::info!("cloning {url} into {}", target.display());
    let out = git_command(None)
        .arg("clone")
        .arg("--quiet")
        .arg("--no-tags")
        .arg(url)
        .arg(target)
        .stdin(Stdio::null())
        .output()?;
    if !out.status.success() {
        let _ = std::fs::remove_dir_all(target);
        return Err(MineError::CloneFailed {
            url: url.to_string(),
            detail: stderr_text(&out.stderr),
        });
    }
    // Tags not reachable from the default branch are still releases.
    git(target, &["fetch", "--quiet", "--tags", "origin"]).map_err(|e| MineError::CloneFailed {
        url: url.to_string(),
        detail: e.to_string(),
    })?;
    Ok(())
}

/// Bring a cached clone up to date. Failure (e.g. offline) keeps the cached
/// copy as it is.
fn refresh(target: &Path) {
    log::debug!("reusing cached clone at {}", target.display());
    let updated = git(target, &["fetch", "--quiet", "--prune", "--tags", "--force", "origin"])
        .and_then(|_| git(target, &["reset", "--quiet", "--hard", "origin/HEAD"]));
    if let Err(e) = updated {
        log::warn!("could not refresh cached clone {}: {e}", target.display());
    }
}

struct Tag {
    name: String,
    commit: String,
    timestamp: DateTime<Utc>,
}

/// Split the history into release windows, one per tag matching `tag_filter`
/// (every tag when `None`).
///
/// Tags are ordered by the committer timestamp of the tagged commit, ties
/// broken by tag name.
pub fn enumerate_releases(handle: &RepoHandle, tag_filter: Option<&str>) -> Result<ReleaseHistory> {
    let filter = tag_filter.map(Regex::new).transpose()?;
    let mut warnings = Vec::new();
    let tags = list_tags(handle.path(), filter.as_ref(), &mut warnings)?;

    let mut windows = Vec::with_capacity(tags.len());
    for (ordinal, tag) in tags.iter().enumerate() {
        let mut revs = vec![tag.commit.clone()];
        revs.extend(tags[..ordinal].iter().map(|t| format!("^{}", t.commit)));
        windows.push(ReleaseWindow {
            ordinal,
            tag_name: tag.name.clone(),
            tag_timestamp: tag.timestamp,
            commits: log_commits(handle.path(), &revs)?,
        });
    }

    let unreleased = match head_commit(handle.path())? {
        Some(head) => {
            let mut revs = vec![head];
            revs.extend(tags.iter().map(|t| format!("^{}", t.commit)));
            log_commits(handle.path(), &revs)?
        }
        None => Vec::new(),
    };

    let no_releases = windows.is_empty();
    if no_releases {
        warnings.push(match tag_filter {
            Some(f) => format!("no tags match filter {f:?}; all commits are unreleased"),
            None => "repository has no tags; all commits are unreleased".to_string(),
        });
    }
    Ok(ReleaseHistory {
        windows,
        unreleased,
        no_releases,
        warnings,
    })
}

/// Git-derived activeness figures. `now` anchors the repository age.
pub fn mining_summary(
    handle: &RepoHandle,
    history: &ReleaseHistory,
    now: DateTime<Utc>,
) -> Result<MiningSummary> {
    let first_commit = history.all_commits().map(|c| c.author_timestamp).min();
    let last_updated = history.all_commits().map(|c| c.author_timestamp).max();
    let repo_age_days = first_commit.map_or(Fixed2::ZERO, |first| {
        let secs = (now - first).num_seconds().max(0) as u64;
        Fixed2::from_ratio(secs, SECONDS_PER_DAY)
    });

    let release_count = history.windows.len();
    let avg_days_between_releases = match (history.windows.first(), history.windows.last()) {
        (Some(first), Some(last)) if release_count >= 2 => {
            let span = (last.tag_timestamp - first.tag_timestamp).num_seconds().max(0) as u64;
            Fixed2::from_ratio(span, (release_count as u64 - 1) * SECONDS_PER_DAY)
        }
        _ => Fixed2::ZERO,
    };

    let mut revs: Vec<String> = history
        .windows
        .iter()
        .map(|w| w.tag_name.clone())
        .map(|name| format!("refs/tags/{name}"))
        .collect();
    if let Some(head) = head_commit(handle.path())? {
        revs.push(head);
    }
    let total_commits = if revs.is_empty() {
        0
    } else {
        let out = git_stdin(handle.path(), &["rev-list", "--count", "--stdin"], &revs)?;
        out.trim()
            .parse()
            .map_err(|_| MineError::Parse(format!("rev-list count {out:?}")))?
    };

    Ok(MiningSummary {
        repo_age_days,
        first_commit,
        last_updated,
        release_count,
        avg_days_between_releases,
        total_commits,
        unreleased_commits: history.unreleased.len(),
        total_additions: history.all_commits().map(|c| c.additions).sum(),
        total_deletions: history.all_commits().map(|c| c.deletions).sum(),
    })
}

fn list_tags(path: &Path, filter: Option<&Regex>, warnings: &mut Vec<String>) -> Result<Vec<Tag>> {
    let refs = git(
        path,
        &[
            "for-each-ref",
            "refs/tags",
            "--format=%(refname:strip=2)%00%(objecttype)%00%(objectname)%00%(*objecttype)%00%(*objectname)",
        ],
    )?;

    let mut named: Vec<(String, String)> = Vec::new();
    for line in refs.lines().filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split('\0').collect();
        let [name, kind, object, peeled_kind, peeled] = fields[..] else {
            return Err(MineError::Parse(format!("for-each-ref line {line:?}")));
        };
        if filter.is_some_and(|f| !f.is_match(name)) {
            continue;
        }
        let commit = match (kind, peeled_kind) {
            ("commit", _) => object.to_string(),
            ("tag", "commit") => peeled.to_string(),
            ("tag", _) => match git(path, &["rev-parse", "--verify", "-q", &format!("{object}^{{commit}}")]) {
                Ok(sha) => sha.trim().to_string(),
                Err(_) => {
                    warnings.push(format!("tag {name} does not point at a commit; skipped"));
                    continue;
                }
            },
            _ => {
                warnings.push(format!("tag {name} does not point at a commit; skipped"));
                continue;
            }
        };
        named.push((name.to_string(), commit));
    }
    if named.is_empty() {
        return Ok(Vec::new());
    }

    let mut unique: Vec<String> = named.iter().map(|(_, c)| c.clone()).collect();
    unique.sort();
    unique.dedup();
    let stamps = git_stdin(
        path,
        &["log", "--no-walk=unsorted", "--stdin", "--format=%H %ct"],
        &unique,
    )?;
    let mut timestamps = HashMap::new();
    for line in stamps.lines().filter(|l| !l.is_empty()) {
        let (sha, secs) = line
            .split_once(' ')
            .ok_or_else(|| MineError::Parse(format!("timestamp line {line:?}")))?;
        timestamps.insert(sha.to_string(), parse_epoch(secs)?);
    }

    let mut tags = named
        .into_iter()
        .map(|(name, commit)| {
            let timestamp = *timestamps
                .get(&commit)
                .ok_or_else(|| MineError::Parse(format!("no timestamp for {commit}")))?;
            Ok(Tag {
                name,
                commit,
                timestamp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    tags.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.name.cmp(&b.name)));
    Ok(tags)
}

fn head_commit(path: &Path) -> Result<Option<String>> {
    match git(path, &["rev-parse", "--verify", "-q", "HEAD^{commit}"]) {
        Ok(sha) => Ok(Some(sha.trim().to_string())),
        Err(MineError::Git { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

const RECORD_SEP: char = '\x1e';
const FIELD_SEP: char = '\x1f';

fn log_commits(path: &Path, revs: &[String]) -> Result<Vec<Commit>> {
    let out = git_stdin(
        path,
        &[
            "-c",
            "log.showSignature=false",
            "log",
            "--stdin",
            "--topo-order",
            "--reverse",
            "--numstat",
            "--no-renames",
            "--no-color",
            "--no-ext-diff",
            "--diff-merges=first-parent",
            "--format=%x1e%H%x1f%P%x1f%at%x1f%B%x1f",
        ],
        revs,
    )?;
    parse_log(&out)
}

fn parse_log(out: &str) -> Result<Vec<Commit>> {
    out.split(RECORD_SEP)
        .filter(|r| !r.trim().is_empty())
        .map(parse_record)
        .collect()
}

fn parse_record(record: &str) -> Result<Commit> {
    let mut fields = record.splitn(5, FIELD_SEP);
    let (Some(hash), Some(parents), Some(at), Some(body), Some(stats)) = (
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
    ) else {
        return Err(MineError::Parse(format!("log record {record:?}")));
    };

    let mut additions = 0u64;
    let mut deletions = 0u64;
    for line in stats.lines().filter(|l| !l.is_empty()) {
        let mut cols = line.splitn(3, '\t');
        // Binary files report "-" for both columns.
        additions += cols.next().and_then(|v| v.parse::<u64>().ok()).unwrap_or(0);
        deletions += cols.next().and_then(|v| v.parse::<u64>().ok()).unwrap_or(0);
    }

    Ok(Commit {
        hash: hash.trim().to_string(),
        author_timestamp: parse_epoch(at)?,
        message: body.trim_end().to_string(),
        additions,
        deletions,
        is_merge: parents.split_whitespace().count() > 1,
    })
}

fn parse_epoch(secs: &str) -> Result<DateTime<Utc>> {
    let secs: i64 = secs
        .trim()
        .parse()
        .map_err(|_| MineError::Parse(format!("timestamp {secs:?}")))?;
    Utc.timestamp_opt(secs, 0)
        .single()
        .ok_or_else(|| MineError::Parse(format!("timestamp {secs} out of range")))
}

fn git_command(dir: Option<&Path>) -> Command {
    let mut cmd = Command::new("git");
    if let Some(dir) = dir {
        cmd.arg("-C").arg(dir);
    }
    cmd.env("LC_ALL", "C")
        .env("GIT_TERMINAL_PROMPT", "0")
        .env("GIT_ASKPASS", "")
        .env_remove("GIT_DIR")
        .env_remove("GIT_WORK_TREE");
    cmd
}

fn git(dir: &Path, args: &[&str]) -> Result<String> {
    let out = git_command(Some(dir))
        .args(args)
        .stdin(Stdio::null())
        .output()?;
    finish(args, out)
}

fn git_stdin(dir: &Path, args: &[&str], lines: &[String]) -> Result<String> {
    let mut child = git_command(Some(dir))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut input = lines.join("\n");
    input.push('\n');
    let mut stdin = child.stdin.take().expect("stdin is piped");
    // Writing from a helper thread avoids a pipe deadlock on large outputs.
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let out = child.wait_with_output()?;
    writer
        .join()
        .map_err(|_| MineError::Parse("stdin writer panicked".into()))??;
    finish(args, out)
}

fn finish(args: &[&str], out: std::process::Output) -> Result<String> {
    if !out.status.success() {
        return Err(MineError::Git {
            args: args.join(" "),
            stderr: stderr_text(&out.stderr),
        });
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn stderr_text(stderr: &[u8]) -> String {
    String::from_utf8_lossy(stderr).trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remote_detection() {
        assert!(is_remote_source("https://github.com/pallets/flask"));
        assert!(is_remote_source("file:///tmp/repo"));
        assert!(is_remote_source("git@github.com:pallets/flask.git"));
        assert!(!is_remote_source("/tmp/repo"));
        assert!(!is_remote_source("./some/dir"));
        assert!(!is_remote_source("dir/with@at:colon"));
    }

    #[test]
    fn sanitized_identifiers() {
        assert_eq!(
            sanitize_identifier("https://github.com/pallets/flask.git"),
            "github.com-pallets-flask"
        );
        assert_eq!(
            sanitize_identifier("git@github.com:pallets/flask.git"),
            "git-github.com-pallets-flask"
        );
        assert_eq!(sanitize_identifier("file:///tmp/x/"), "tmp-x");
        assert_eq!(sanitize_identifier("://"), "repo");
    }

    #[test]
    fn parses_log_records_with_numstat() {
        let out = "\x1eaaa\x1f\x1f100\x1ffix crash\n\nbody line\n\x1f\n\n3\t1\tsrc/a.rs\n-\t-\tlogo.png\n\
                   \x1ebbb\x1faaa ccc\x1f200\x1fMerge branch 'x'\n\x1f\n\n10\t0\tb.rs\n";
        let commits = parse_log(out).unwrap();
        assert_eq!(commits.len(), 2);
        assert_eq!(commits[0].hash, "aaa");
        assert_eq!(commits[0].subject(), "fix crash");
        assert_eq!(commits[0].message, "fix crash\n\nbody line");
        assert_eq!((commits[0].additions, commits[0].deletions), (3, 1));
        assert!(!commits[0].is_merge);
        assert_eq!(commits[0].author_timestamp.timestamp(), 100);
        assert!(commits[1].is_merge);
        assert_eq!((commits[1].additions, commits[1].deletions), (10, 0));
    }

    #[test]
    fn rejects_truncated_record() {
        assert!(matches!(parse_log("\x1eaaa\x1f\x1f100"), Err(MineError::Parse(_))));
    }

    #[test]
    fn missing_source_is_distinct_from_non_repository() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope");
        assert!(matches!(
            open_repository(missing.to_str().unwrap(), dir.path(), OpenOptions::default()),
            Err(MineError::SourceNotFound(_))
        ));
        let plain = dir.path().join("plain");
        std::fs::create_dir(&plain).unwrap();
        assert!(matches!(
            open_repository(plain.to_str().unwrap(), dir.path(), OpenOptions::default()),
            Err(MineError::NotARepository(_))
        ));
    }

    #[test]
    fn handle_name_strips_git_suffix() {
        let handle = RepoHandle {
            path: PathBuf::from("/cache/x"),
            remote_url: Some("https://github.com/pallets/flask.git".into()),
        };
        assert_eq!(handle.name(), "flask");
    }
}
