//! Open-source repository assessment.
//!
//! The pipeline mines a git repository's tag history into release windows,
//! labels every commit with a maintenance activity (corrective, adaptive or
//! perfective), counts crossovers between the per-release activity series,
//! and pools the result with hosting-service metadata into one JSON document
//! and one self-contained HTML page.
//!
//! ```text
//! miner ──► classifier ──► maturity ──┐
//!                                     ├──► report (json / html)
//! collectors (metadata, Q&A, OSV) ────┘
//! ```

pub mod classifier;
pub mod collectors;
pub mod fixed;
pub mod maturity;
pub mod miner;
pub mod pipeline;
pub mod report;

pub use classifier::{
    profile_release, ActivityLabel, ClassifiedCommit, CommitClassifier, KeywordTable,
};
pub use fixed::Fixed2;
pub use maturity::{
    detect_crossovers, maturity_score, ActivityPair, ActivityProfile, CrossoverEvent,
    MaturityScore,
};
pub use miner::{
    enumerate_releases, mining_summary, open_repository, Commit, MiningSummary, ReleaseHistory,
    ReleaseWindow, RepoHandle,
};
pub use report::AssessmentReport;
