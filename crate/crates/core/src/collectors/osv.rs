//! Direct-dependency vulnerability lookup against an OSV-compatible
//! `POST /v1/query` endpoint.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::http::ServiceClient;
use super::manifest::{self, Dependency};
use super::{decode, CollectError, Partial, Severity, VulnerabilityFinding};

const QUERY_PATH: &str = "/v1/query";

#[derive(Debug, Clone)]
pub struct OsvClient {
    client: ServiceClient,
}

#[derive(Serialize)]
struct Query<'a> {
    package: QueryPackage<'a>,
    version: &'a str,
}

#[derive(Serialize)]
struct QueryPackage<'a> {
    name: &'a str,
    ecosystem: &'a str,
}

#[derive(Deserialize)]
struct QueryResponse {
    #[serde(default)]
    vulns: Vec<Vuln>,
}

#[derive(Deserialize)]
struct Vuln {
    id: String,
    summary: Option<String>,
    details: Option<String>,
    database_specific: Option<serde_json::Value>,
}

impl Vuln {
    fn severity(&self) -> Severity {
        self.database_specific
            .as_ref()
            .and_then(|d| d.get("severity"))
            .and_then(|s| s.as_str())
            .map_or(Severity::Unknown, Severity::from_label)
    }

    fn summary(&self) -> String {
        self.summary
            .clone()
            .filter(|s| !s.trim().is_empty())
            .or_else(|| self.details.as_deref().and_then(|d| d.lines().next()).map(str::to_string))
            .unwrap_or_default()
    }
}

impl OsvClient {
    pub fn new(client: ServiceClient) -> Self {
        OsvClient { client }
    }

    pub fn query(&self, dependency: &Dependency) -> Result<Vec<VulnerabilityFinding>, CollectError> {
        let body = serde_json::to_string(&Query {
            package: QueryPackage {
                name: &dependency.name,
                ecosystem: dependency.ecosystem.osv_name(),
            },
            version: &dependency.version,
        })
        .expect("query serializes");
        let response = self.client.post_json(QUERY_PATH, &body)?;
        if !response.is_success() {
            return Err(CollectError::Status {
                service: self.client.service().to_string(),
                status: response.status,
                path: QUERY_PATH.to_string(),
            });
        }
        let parsed: QueryResponse = decode(self.client.service(), QUERY_PATH, &response.body)?;
        Ok(parsed
            .vulns
            .into_iter()
            .filter(|v| !v.id.is_empty())
            .map(|v| VulnerabilityFinding {
                severity: v.severity(),
                summary: v.summary(),
                advisory_id: v.id,
                affected_package: dependency.name.clone(),
            })
            .collect())
    }

    /// Query every direct dependency declared in `manifest_paths`.
    ///
    /// Unreadable or unrecognized manifests become warnings; a failing
    /// advisory service aborts the scan. Findings are deduplicated by
    /// `(advisory_id, affected_package)` and sorted by package then id.
    pub fn scan_vulnerabilities(
        &self,
        manifest_paths: &[PathBuf],
    ) -> Result<Partial<Vec<VulnerabilityFinding>>, CollectError> {
        let mut warnings = Vec::new();
        let mut dependencies = BTreeSet::new();
        for path in manifest_paths {
            match manifest::parse_manifest(path) {
                Ok(parsed) => {
                    if !parsed.skipped.is_empty() {
                        warnings.push(format!(
                            "{}: no pinned version for {}; not scanned",
                            path.display(),
                            parsed.skipped.join(", ")
                        ));
                    }
                    dependencies.extend(parsed.dependencies);
                }
                Err(e) => warnings.push(format!("manifest skipped: {e}")),
            }
        }

        let mut findings = BTreeMap::new();
        for dependency in &dependencies {
            for finding in self.query(dependency)? {
                findings
                    .entry((finding.affected_package.clone(), finding.advisory_id.clone()))
                    .or_insert(finding);
            }
        }
        Ok(Partial {
            value: findings.into_values().collect(),
            unavailable: Vec::new(),
            warnings,
        })
    }
}
