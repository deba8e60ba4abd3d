//! Direct-dependency extraction from package manifests.
//!
//! Supported formats:
//!
//! | file               | ecosystem | entries read                                   |
//! |--------------------|-----------|------------------------------------------------|
//! | `Cargo.toml`       | crates.io | `[dependencies]`, `[target.*.dependencies]`    |
//! | `requirements.txt` | PyPI      | every requirement line                         |
//! | `package.json`     | npm       | the `dependencies` object                      |
//!
//! A requirement is resolved to the lowest version it admits ("^1.2" becomes
//! `1.2.0`, ">=2.31" becomes `2.31`). Requirements without a lower bound
//! (`*`, git or path sources, bare names) are skipped and reported.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ecosystem {
    CratesIo,
    PyPI,
    Npm,
}

impl Ecosystem {
    /// Ecosystem name as used by OSV.
    pub fn osv_name(self) -> &'static str {
        match self {
            Ecosystem::CratesIo => "crates.io",
            Ecosystem::PyPI => "PyPI",
            Ecosystem::Npm => "npm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dependency {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedManifest {
    pub dependencies: Vec<Dependency>,
    /// Names of dependencies without a resolvable version.
    pub skipped: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{}: unrecognized manifest format", .0.display())]
    Unrecognized(PathBuf),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {detail}", .path.display())]
    Malformed { path: PathBuf, detail: String },
}

pub fn ecosystem_for(path: &Path) -> Option<Ecosystem> {
    match path.file_name()?.to_str()? {
        "Cargo.toml" => Some(Ecosystem::CratesIo),
        "requirements.txt" => Some(Ecosystem::PyPI),
        "package.json" => Some(Ecosystem::Npm),
        _ => None,
    }
}

/// Supported manifests at the top level of `root`, in a fixed order.
pub fn discover(root: &Path) -> Vec<PathBuf> {
    ["Cargo.toml", "requirements.txt", "package.json"]
        .iter()
        .map(|name| root.join(name))
        .filter(|p| p.is_file())
        .collect()
}

pub fn parse_manifest(path: &Path) -> Result<ParsedManifest, ManifestError> {
    let ecosystem = ecosystem_for(path).ok_or_else(|| ManifestError::Unrecognized(path.to_path_buf()))?;
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |detail: String| ManifestError::Malformed {
        path: path.to_path_buf(),
        detail,
    };
    let entries = match ecosystem {
        Ecosystem::CratesIo => cargo_entries(&text).map_err(malformed)?,
        Ecosystem::PyPI => requirements_entries(&text),
        Ecosystem::Npm => npm_entries(&text).map_err(malformed)?,
    };

    let mut parsed = ParsedManifest::default();
    for (name, version) in entries {
        match version {
            Some(version) => parsed.dependencies.push(Dependency {
                ecosystem,
                name,
                version,
            }),
            None => parsed.skipped.push(name),
        }
    }
    Ok(parsed)
}

type Entry = (String, Option<String>);

fn cargo_entries(text: &str) -> Result<Vec<Entry>, String> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    let mut tables = Vec::new();
    if let Some(deps) = doc.get("dependencies").and_then(|d| d.as_table()) {
        tables.push(deps);
    }
    if let Some(targets) = doc.get("target").and_then(|t| t.as_table()) {
        for target in targets.values() {
            if let Some(deps) = target.get("dependencies").and_then(|d| d.as_table()) {
                tables.push(deps);
            }
        }
    }

    let mut out = Vec::new();
    for deps in tables {
        for (key, spec) in deps {
            let (name, requirement) = match spec {
                toml::Value::String(req) => (key.clone(), Some(req.as_str())),
                toml::Value::Table(t) => (
                    t.get("package")
                        .and_then(|p| p.as_str())
                        .unwrap_or(key)
                        .to_string(),
                    t.get("version").and_then(|v| v.as_str()),
                ),
                _ => (key.clone(), None),
            };
            out.push((name, requirement.and_then(semver_floor)));
        }
    }
    Ok(out)
}

fn requirements_entries(text: &str) -> Vec<Entry> {
    let mut out = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let line = line.split(';').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('-') || line.contains("://") {
            continue;
        }
        let name_end = line
            .find(|c: char| !(c.is_ascii_alphanumeric() || "-_.".contains(c)))
            .unwrap_or(line.len());
        let name = normalize_pypi(&line[..name_end]);
        if name.is_empty() {
            continue;
        }
        let mut rest = line[name_end..].trim_start();
        if rest.starts_with('[') {
            rest = rest.split_once(']').map_or("", |(_, r)| r.trim_start());
        }
        out.push((name, pep440_floor(rest)));
    }
    out
}

/// PEP 503 normalized project name.
fn normalize_pypi(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        if "-_.".contains(ch) {
            if !out.ends_with('-') {
                out.push('-');
            }
        } else {
            out.push(ch.to_ascii_lowercase());
        }
    }
    out
}

fn pep440_floor(spec: &str) -> Option<String> {
    spec.split(',').find_map(|clause| {
        let clause = clause.trim();
        let version = ["===", "==", "~=", ">="]
            .iter()
            .find_map(|op| clause.strip_prefix(op))?
            .trim();
        let version = version.trim_end_matches(".*");
        (!version.is_empty() && version.starts_with(|c: char| c.is_ascii_digit()))
            .then(|| version.to_string())
    })
}

#[derive(Deserialize)]
struct PackageJson {
    #[serde(default)]
    dependencies: std::collections::BTreeMap<String, serde_json::Value>,
}

fn npm_entries(text: &str) -> Result<Vec<Entry>, String> {
    let pkg: PackageJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(pkg
        .dependencies
        .into_iter()
        .map(|(name, spec)| {
            let version = spec.as_str().and_then(semver_floor);
            (name, version)
        })
        .collect())
}

/// Lowest version admitted by a Cargo or npm requirement string, padded to
/// three components.
fn semver_floor(requirement: &str) -> Option<String> {
    let first = requirement
        .split(|c: char| c == ',' || c == '|' || c.is_whitespace())
        .find(|s| !s.is_empty())?;
    if first.starts_with('<') {
        return None;
    }
    let version = first.trim_start_matches(['^', '~', '=', '>', 'v']);
    if !version.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    let (core, suffix) = match version.find(['-', '+']) {
        Some(i) => version.split_at(i),
        None => (version, ""),
    };
    let mut parts: Vec<&str> = core
        .split('.')
        .take_while(|p| !matches!(*p, "x" | "X" | "*"))
        .collect();
    if parts.iter().any(|p| p.is_empty() || !p.chars().all(|c| c.is_ascii_digit())) {
        return None;
    }
    while parts.len() < 3 {
        parts.push("0");
    }
    Some(format!("{}{suffix}", parts.join(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semver_floors() {
        assert_eq!(semver_floor("1.2.3").as_deref(), Some("1.2.3"));
        assert_eq!(semver_floor("^1.2").as_deref(), Some("1.2.0"));
        assert_eq!(semver_floor("~4.17.1").as_deref(), Some("4.17.1"));
        assert_eq!(semver_floor(">=1.0.0 <2").as_deref(), Some("1.0.0"));
        assert_eq!(semver_floor("1.x").as_deref(), Some("1.0.0"));
        assert_eq!(semver_floor("=0.9.0-beta.1").as_deref(), Some("0.9.0-beta.1"));
        assert_eq!(semver_floor("*"), None);
        assert_eq!(semver_floor("latest"), None);
        assert_eq!(semver_floor("<2"), None);
        assert_eq!(semver_floor("git+https://x/y.git"), None);
    }

    #[test]
    fn pep440_floors() {
        assert_eq!(pep440_floor("==2.31.0").as_deref(), Some("2.31.0"));
        assert_eq!(pep440_floor(">=1.4,<2").as_deref(), Some("1.4"));
        assert_eq!(pep440_floor("<2,>=1.1").as_deref(), Some("1.1"));
        assert_eq!(pep440_floor("~=3.0").as_deref(), Some("3.0"));
        assert_eq!(pep440_floor("==1.2.*").as_deref(), Some("1.2"));
        assert_eq!(pep440_floor(""), None);
        assert_eq!(pep440_floor("!=1.0"), None);
    }

    #[test]
    fn requirements_lines() {
        let text = "# deps\nrequests==2.31.0\nJinja2>=3.0 ; python_version>'3.7'\n\
                    uvicorn[standard]==0.23.0  # server\n-r other.txt\nsix\n\
                    git+https://github.com/x/y.git\nzope.interface==6.0\n";
        let entries = requirements_entries(text);
        assert_eq!(
            entries,
            vec![
                ("requests".to_string(), Some("2.31.0".to_string())),
                ("jinja2".to_string(), Some("3.0".to_string())),
                ("uvicorn".to_string(), Some("0.23.0".to_string())),
                ("six".to_string(), None),
                ("zope-interface".to_string(), Some("6.0".to_string())),
            ]
        );
    }

    #[test]
    fn cargo_tables() {
        let text = r#"
[package]
name = "x"

[dependencies]
serde = "1.0.100"
tokio = { version = "1.2", features = ["full"] }
local = { path = "../local" }
renamed = { package = "real-name", version = "0.3" }

[target.'cfg(unix)'.dependencies]
libc = "0.2.150"

[dev-dependencies]
proptest = "1"
"#;
        let mut entries = cargo_entries(text).unwrap();
        entries.sort();
        assert_eq!(
            entries,
            vec![
                ("libc".to_string(), Some("0.2.150".to_string())),
                ("local".to_string(), None),
                ("real-name".to_string(), Some("0.3.0".to_string())),
                ("serde".to_string(), Some("1.0.100".to_string())),
                ("tokio".to_string(), Some("1.2.0".to_string())),
            ]
        );
        assert!(cargo_entries("[dependencies\n").is_err());
    }

    #[test]
    fn npm_dependencies() {
        let text = r#"{"name":"x","dependencies":{"lodash":"^4.17.20","local":"file:../l","any":"*"},
                       "devDependencies":{"jest":"29.0.0"}}"#;
        let entries = npm_entries(text).unwrap();
        assert_eq!(
            entries,
            vec![
                ("any".to_string(), None),
                ("local".to_string(), None),
                ("lodash".to_string(), Some("4.17.20".to_string())),
            ]
        );
        assert!(npm_entries("{").is_err());
        assert!(npm_entries("{}").unwrap().is_empty());
    }

    #[test]
    fn unrecognized_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pom.xml");
        std::fs::write(&path, "<project/>").unwrap();
        assert!(matches!(parse_manifest(&path), Err(ManifestError::Unrecognized(_))));
    }
}
