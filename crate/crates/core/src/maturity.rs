//! Crossovers between maintenance-activity series and commit maturity.
//!
//! For a pair of series `X`, `Y` over releases, a crossover happens at
//! release `i` when `X - Y` is strictly positive at `i - 1` and strictly
//! negative at `i`, or the other way round. Ties at either end never count.
//! Commit maturity is the number of crossovers over all three pairs; the
//! reported ratio divides it by the number of releases.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifier::ActivityLabel;
use crate::fixed::Fixed2;

/// Label counts for one release. `unclassified` is carried for reporting and
/// never takes part in crossover detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub ordinal: usize,
    pub corrective: u64,
    pub adaptive: u64,
    pub perfective: u64,
    pub unclassified: u64,
}

impl ActivityProfile {
    pub fn empty(ordinal: usize) -> Self {
        ActivityProfile {
            ordinal,
            corrective: 0,
            adaptive: 0,
            perfective: 0,
            unclassified: 0,
        }
    }

    pub fn new(ordinal: usize, corrective: u64, adaptive: u64, perfective: u64) -> Self {
        ActivityProfile {
            corrective,
            adaptive,
            perfective,
            ..ActivityProfile::empty(ordinal)
        }
    }

    pub fn record(&mut self, label: ActivityLabel) {
        match label {
            ActivityLabel::Corrective => self.corrective += 1,
            ActivityLabel::Adaptive => self.adaptive += 1,
            ActivityLabel::Perfective => self.perfective += 1,
            ActivityLabel::Unclassified => self.unclassified += 1,
        }
    }

    pub fn count(&self, label: ActivityLabel) -> u64 {
        match label {
            ActivityLabel::Corrective => self.corrective,
            ActivityLabel::Adaptive => self.adaptive,
            ActivityLabel::Perfective => self.perfective,
            ActivityLabel::Unclassified => self.unclassified,
        }
    }

    pub fn total(&self) -> u64 {
        self.corrective + self.adaptive + self.perfective + self.unclassified
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivityPair {
    AdaptiveCorrective,
    AdaptivePerfective,
    CorrectivePerfective,
}

impl ActivityPair {
    pub const ALL: [ActivityPair; 3] = [
        ActivityPair::AdaptiveCorrective,
        ActivityPair::AdaptivePerfective,
        ActivityPair::CorrectivePerfective,
    ];

    /// The two series compared, as `(X, Y)`.
    pub fn series(self) -> (ActivityLabel, ActivityLabel) {
        match self {
            ActivityPair::AdaptiveCorrective => (ActivityLabel::Adaptive, ActivityLabel::Corrective),
            ActivityPair::AdaptivePerfective => (ActivityLabel::Adaptive, ActivityLabel::Perfective),
            ActivityPair::CorrectivePerfective => {
                (ActivityLabel::Corrective, ActivityLabel::Perfective)
            }
        }
    }

    fn difference(self, profile: &ActivityProfile) -> i128 {
        let (x, y) = self.series();
        i128::from(profile.count(x)) - i128::from(profile.count(y))
    }
}

impl fmt::Display for ActivityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (x, y) = self.series();
        write!(f, "{x}-{y}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrossoverEvent {
    pub pair: ActivityPair,
    /// Ordinal of the later of the two releases compared.
    pub at_ordinal: usize,
    /// The series that moved from below to above the other.
    pub rising: ActivityLabel,
}

pub fn detect_crossovers(profiles: &[ActivityProfile], pair: ActivityPair) -> Vec<CrossoverEvent> {
    let (x, y) = pair.series();
    profiles
        .windows(2)
        .filter_map(|w| {
            let before = pair.difference(&w[0]).signum();
            let after = pair.difference(&w[1]).signum();
            (before * after < 0).then(|| CrossoverEvent {
                pair,
                at_ordinal: w[1].ordinal,
                rising: if after > 0 { x } else { y },
            })
        })
        .collect()
}

/// Crossovers for every pair, ordered by ordinal then pair.
pub fn all_crossovers(profiles: &[ActivityProfile]) -> Vec<CrossoverEvent> {
    let mut events: Vec<CrossoverEvent> = ActivityPair::ALL
        .iter()
        .flat_map(|&pair| detect_crossovers(profiles, pair))
        .collect();
    events.sort_by_key(|e| (e.at_ordinal, e.pair));
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaturityScore {
    pub adaptive_corrective: usize,
    pub adaptive_perfective: usize,
    pub corrective_perfective: usize,
    pub total_crossovers: usize,
    pub release_count: usize,
    /// `total_crossovers / release_count`, zero without releases.
    pub maturity_ratio: Fixed2,
}

impl MaturityScore {
    pub fn count(&self, pair: ActivityPair) -> usize {
        match pair {
            ActivityPair::AdaptiveCorrective => self.adaptive_corrective,
            ActivityPair::AdaptivePerfective => self.adaptive_perfective,
            ActivityPair::CorrectivePerfective => self.corrective_perfective,
        }
    }
}

pub fn maturity_score(profiles: &[ActivityProfile]) -> MaturityScore {
    let count = |pair| detect_crossovers(profiles, pair).len();
    let adaptive_corrective = count(ActivityPair::AdaptiveCorrective);
    let adaptive_perfective = count(ActivityPair::AdaptivePerfective);
    let corrective_perfective = count(ActivityPair::CorrectivePerfective);
    let total_crossovers = adaptive_corrective + adaptive_perfective + corrective_perfective;
    let release_count = profiles.len();
    MaturityScore {
        adaptive_corrective,
        adaptive_perfective,
        corrective_perfective,
        total_crossovers,
        release_count,
        maturity_ratio: Fixed2::from_ratio(total_crossovers as u64, release_count as u64),
    }
}
