//! Maintenance-activity labelling of commits.
//!
//! The shipped model is a keyword table: each label owns a list of lowercase
//! stems, a stem hits when some message token starts with it, the label with
//! the most distinct hits wins and ties fall to the table's priority order.
//! Anything implementing [`CommitClassifier`] can stand in for it.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maturity::ActivityProfile;
use crate::miner::{Commit, ReleaseWindow};

const DEFAULT_TABLE: &str = include_str!("../data/default_keywords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityLabel {
    Corrective,
    Adaptive,
    Perfective,
    Unclassified,
}

impl ActivityLabel {
    pub const ACTIVITIES: [ActivityLabel; 3] = [
        ActivityLabel::Corrective,
        ActivityLabel::Adaptive,
        ActivityLabel::Perfective,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityLabel::Corrective => "corrective",
            ActivityLabel::Adaptive => "adaptive",
            ActivityLabel::Perfective => "perfective",
            ActivityLabel::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityLabel {
    type Err = KeywordTableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrective" => Ok(ActivityLabel::Corrective),
            "adaptive" => Ok(ActivityLabel::Adaptive),
            "perfective" => Ok(ActivityLabel::Perfective),
            other => Err(KeywordTableError::UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum KeywordTableError {
    #[error("unknown activity label {0:?}")]
    UnknownLabel(String),
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: entry outside of any section")]
    OutsideSection { line: usize },
    #[error("line {line}: stem {stem:?} must be lowercase letters and digits")]
    InvalidStem { line: usize, stem: String },
    #[error("stem {stem:?} listed under both {first} and {second}")]
    DuplicateStem {
        stem: String,
        first: ActivityLabel,
        second: ActivityLabel,
    },
    #[error("priority must list corrective, adaptive and perfective exactly once, got {0:?}")]
    BadPriority(Vec<String>),
    #[error("label {0} has no stems")]
    EmptyLabel(ActivityLabel),
    #[error("failed to read keyword table {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Per-label keyword stems plus a strict priority order over the three
/// activities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordTable {
    stems: [Vec<String>; 3],
    priority: [ActivityLabel; 3],
}

fn slot(label: ActivityLabel) -> usize {
    match label {
        ActivityLabel::Corrective => 0,
        ActivityLabel::Adaptive => 1,
        ActivityLabel::Perfective => 2,
        ActivityLabel::Unclassified => unreachable!("unclassified has no stems"),
    }
}

impl Default for KeywordTable {
    fn default() -> Self {
        DEFAULT_TABLE
            .parse()
            .expect("bundled keyword table is valid")
    }
}

impl KeywordTable {
    pub fn new(
        corrective: Vec<String>,
        adaptive: Vec<String>,
        perfective: Vec<String>,
        priority: [ActivityLabel; 3],
    ) -> Result<Self, KeywordTableError> {
        let table = KeywordTable {
            stems: [corrective, adaptive, perfective],
            priority,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<Self, KeywordTableError> {
        let text = std::fs::read_to_string(path).map_err(|source| KeywordTableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    pub fn stems(&self, label: ActivityLabel) -> &[String] {
        match label {
            ActivityLabel::Unclassified => &[],
            l => &self.stems[slot(l)],
        }
    }

    pub fn priority(&self) -> [ActivityLabel; 3] {
        self.priority
    }

    fn validate(&self) -> Result<(), KeywordTableError> {
        let mut seen: Vec<(&str, ActivityLabel)> = Vec::new();
        for label in ActivityLabel::ACTIVITIES {
            let stems = self.stems(label);
            if stems.is_empty() {
                return Err(KeywordTableError::EmptyLabel(label));
            }
            for stem in stems {
                if !is_valid_stem(stem) {
                    return Err(KeywordTableError::InvalidStem {
                        line: 0,
                        stem: stem.clone(),
                    });
                }
                if let Some((_, first)) = seen.iter().find(|(s, _)| *s == stem) {
                    return Err(KeywordTableError::DuplicateStem {
                        stem: stem.clone(),
                        first: *first,
                        second: label,
                    });
                }
                seen.push((stem, label));
            }
        }
        let mut order = self.priority;
        order.sort();
        if order != ActivityLabel::ACTIVITIES {
            return Err(KeywordTableError::BadPriority(
                self.priority.iter().map(|l| l.to_string()).collect(),
            ));
        }
        Ok(())
    }

    /// Label for a raw commit message and the stems of the winning label
    /// that matched, in table order.
    pub fn classify_message(&self, message: &str) -> (ActivityLabel, Vec<String>) {
        let folded = message.to_uppercase().to_lowercase();
        let tokens: Vec<&str> = folded
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();

        let mut best: Option<(usize, ActivityLabel, Vec<String>)> = None;
        for label in self.priority {
            let hits: Vec<String> = self
                .stems(label)
                .iter()
                .filter(|stem| tokens.iter().any(|t| t.starts_with(stem.as_str())))
                .cloned()
                .collect();
            // Strictly greater: earlier (higher-priority) labels keep ties.
            if !hits.is_empty() && best.as_ref().is_none_or(|(score, _, _)| hits.len() > *score) {
                best = Some((hits.len(), label, hits));
            }
        }
        match best {
            Some((_, label, hits)) => (label, hits),
            None => (ActivityLabel::Unclassified, Vec::new()),
        }
    }
}

fn is_valid_stem(stem: &str) -> bool {
    !stem.is_empty() && stem.chars().all(|c| c.is_alphanumeric() && !c.is_uppercase())
}

impl FromStr for KeywordTable {
    type Err = KeywordTableError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        enum Section {
            None,
            Label(ActivityLabel),
            Priority,
        }

        let mut stems: [Vec<String>; 3] = Default::default();
        let mut priority: Option<Vec<String>> = None;
        let mut section = Section::None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                section = match name {
                    "priority" => {
                        priority.get_or_insert_with(Vec::new);
                        Section::Priority
                    }
                    _ => match name.parse::<ActivityLabel>() {
                        Ok(label) => Section::Label(label),
                        Err(_) => {
                            return Err(KeywordTableError::UnknownSection {
                                line: line_no,
                                name: name.to_string(),
                            })
                        }
                    },
                };
                continue;
            }
            match section {
                Section::None => return Err(KeywordTableError::OutsideSection { line: line_no }),
                Section::Priority => priority.get_or_insert_with(Vec::new).push(line.to_string()),
                Section::Label(label) => {
                    if !is_valid_stem(line) {
                        return Err(KeywordTableError::InvalidStem {
                            line: line_no,
                            stem: line.to_string(),
                        });
                    }
                    stems[slot(label)].push(line.to_string());
                }
            }
        }

        let priority = match priority {
            None => ActivityLabel::ACTIVITIES,
            Some(names) => {
                let labels: Vec<ActivityLabel> = names
                    .iter()
                    .map(|n| n.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| KeywordTableError::BadPriority(names.clone()))?;
                <[ActivityLabel; 3]>::try_from(labels)
                    .map_err(|_| KeywordTableError::BadPriority(names.clone()))?
            }
        };
        let [corrective, adaptive, perfective] = stems;
        KeywordTable::new(corrective, adaptive, perfective, priority)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedCommit {
    pub commit: Commit,
    pub label: ActivityLabel,
    pub matched_keywords: Vec<String>,
}

/// Anything that assigns exactly one label per commit.
///
/// Implementations must be pure: the same commit always gets the same label,
/// and `matched_keywords` is empty exactly when the label is
/// [`ActivityLabel::Unclassified`].
pub trait CommitClassifier: Send + Sync {
    fn classify(&self, commit: &Commit) -> ClassifiedCommit;
}

impl CommitClassifier for KeywordTable {
    fn classify(&self, commit: &Commit) -> ClassifiedCommit {
        let (label, matched_keywords) = self.classify_message(&commit.message);
        ClassifiedCommit {
            commit: commit.clone(),
            label,
            matched_keywords,
        }
    }
}

impl<C: CommitClassifier + ?Sized> CommitClassifier for &C {
    fn classify(&self, commit: &Commit) -> ClassifiedCommit {
        (**self).classify(commit)
    }
}

/// Leaves merge commits unclassified and delegates everything else.
#[derive(Debug, Clone)]
pub struct SkipMerges<C>(pub C);

impl<C: CommitClassifier> CommitClassifier for SkipMerges<C> {
    fn classify(&self, commit: &Commit) -> ClassifiedCommit {
        if commit.is_merge {
            ClassifiedCommit {
                commit: commit.clone(),
                label: ActivityLabel::Unclassified,
                matched_keywords: Vec::new(),
            }
        } else {
            self.0.classify(commit)
        }
    }
}

pub fn classify(commit: &Commit, table: &KeywordTable) -> ClassifiedCommit {
    table.classify(commit)
}

/// Per-label counts of the commits in one release window.
pub fn profile_release<C: CommitClassifier + ?Sized>(
    window: &ReleaseWindow,
    classifier: &C,
) -> ActivityProfile {
    let mut profile = ActivityProfile::empty(window.ordinal);
    for commit in &window.commits {
        profile.record(classifier.classify(commit).label);
    }
    profile
}
