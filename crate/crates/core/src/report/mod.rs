//! The assessment report: assembly, JSON serialization and HTML rendering.
//!
//! Field-by-field schema: `docs/schema.md` at the repository root.

mod html;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collectors::{CommunityInterest, LicenseInfo, RepoMetadata, SupportStats, VulnerabilityFinding};
use crate::maturity::{ActivityProfile, CrossoverEvent, MaturityScore};
use crate::miner::{MiningSummary, ReleaseWindow};

pub use html::to_html;

pub const SCHEMA_VERSION: &str = "1";

/// Commit activity of one release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseActivity {
    pub ordinal: usize,
    pub tag_name: String,
    pub tag_timestamp: DateTime<Utc>,
    pub commits: usize,
    pub additions: u64,
    pub deletions: u64,
}

impl From<&ReleaseWindow> for ReleaseActivity {
    fn from(window: &ReleaseWindow) -> Self {
        ReleaseActivity {
            ordinal: window.ordinal,
            tag_name: window.tag_name.clone(),
            tag_timestamp: window.tag_timestamp,
            commits: window.commits.len(),
            additions: window.additions(),
            deletions: window.deletions(),
        }
    }
}

/// Label counts over every mined commit, unreleased ones included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationTotals {
    pub corrective: u64,
    pub adaptive: u64,
    pub perfective: u64,
    pub unclassified: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub schema_version: String,
    pub generated_at: DateTime<Utc>,
    pub source: String,
    pub repo_metadata: RepoMetadata,
    pub community: CommunityInterest,
    pub license: LicenseInfo,
    pub support: SupportStats,
    /// True when the Q&A tag was derived from the repository name.
    pub support_tag_defaulted: bool,
    pub vulnerabilities: Vec<VulnerabilityFinding>,
    pub mining: MiningSummary,
    pub releases: Vec<ReleaseActivity>,
    pub profiles: Vec<ActivityProfile>,
    pub classification_totals: ClassificationTotals,
    pub crossovers: Vec<CrossoverEvent>,
    pub maturity: MaturityScore,
    /// Field paths that could not be collected and hold placeholder values.
    pub unavailable: Vec<String>,
    pub warnings: Vec<String>,
}

/// Everything [`assemble`] pools into a report.
#[derive(Debug, Clone)]
pub struct ReportParts {
    pub generated_at: DateTime<Utc>,
    pub source: String,
    pub repo_metadata: RepoMetadata,
    pub community: CommunityInterest,
    pub license: LicenseInfo,
    pub support: SupportStats,
    pub support_tag_defaulted: bool,
    pub vulnerabilities: Vec<VulnerabilityFinding>,
    pub mining: MiningSummary,
    pub releases: Vec<ReleaseActivity>,
    pub profiles: Vec<ActivityProfile>,
    pub classification_totals: ClassificationTotals,
    pub crossovers: Vec<CrossoverEvent>,
    pub maturity: MaturityScore,
    pub unavailable: Vec<String>,
    /// Warnings from each stage, in pipeline order.
    pub warnings: Vec<Vec<String>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("inconsistent report parts: {left} = {left_value} but {right} = {right_value}")]
    Mismatch {
        left: &'static str,
        left_value: usize,
        right: &'static str,
        right_value: usize,
    },
    #[error("profile at position {position} has ordinal {ordinal}")]
    OrdinalGap { position: usize, ordinal: usize },
    #[error("unsupported schema version {0:?}")]
    SchemaVersion(String),
    #[error("invalid report JSON: {0}")]
    Json(String),
}

fn check_equal(
    left: &'static str,
    left_value: usize,
    right: &'static str,
    right_value: usize,
) -> Result<(), ReportError> {
    if left_value == right_value {
        Ok(())
    } else {
        Err(ReportError::Mismatch {
            left,
            left_value,
            right,
            right_value,
        })
    }
}

pub fn assemble(parts: ReportParts) -> Result<AssessmentReport, ReportError> {
    let releases = parts.mining.release_count;
    check_equal("profiles.len", parts.profiles.len(), "mining.release_count", releases)?;
    check_equal("releases.len", parts.releases.len(), "mining.release_count", releases)?;
    check_equal("maturity.release_count", parts.maturity.release_count, "mining.release_count", releases)?;
    check_equal(
        "crossovers.len",
        parts.crossovers.len(),
        "maturity.total_crossovers",
        parts.maturity.total_crossovers,
    )?;
    for (position, profile) in parts.profiles.iter().enumerate() {
        if profile.ordinal != position {
            return Err(ReportError::OrdinalGap {
                position,
                ordinal: profile.ordinal,
            });
        }
    }

    let mut unavailable = parts.unavailable;
    unavailable.sort();
    unavailable.dedup();
    Ok(AssessmentReport {
        schema_version: SCHEMA_VERSION.to_string(),
        generated_at: parts.generated_at,
        source: parts.source,
        repo_metadata: parts.repo_metadata,
        community: parts.community,
        license: parts.license,
        support: parts.support,
        support_tag_defaulted: parts.support_tag_defaulted,
        vulnerabilities: parts.vulnerabilities,
        mining: parts.mining,
        releases: parts.releases,
        profiles: parts.profiles,
        classification_totals: parts.classification_totals,
        crossovers: parts.crossovers,
        maturity: parts.maturity,
        unavailable,
        warnings: parts.warnings.into_iter().flatten().collect(),
    })
}

/// Pretty-printed JSON with a trailing newline. Field order follows the
/// struct declarations and maps are sorted, so equal reports give equal
/// bytes.
pub fn to_json(report: &AssessmentReport) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

pub fn from_json(bytes: &[u8]) -> Result<AssessmentReport, ReportError> {
    let report: AssessmentReport =
        serde_json::from_slice(bytes).map_err(|e| ReportError::Json(e.to_string()))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(ReportError::SchemaVersion(report.schema_version));
    }
    Ok(report)
}
