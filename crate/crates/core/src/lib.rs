//! Detection of unusual events in GitHub-style repositories.
//!
//! A commit, issue, or pull request is an unusual event when one of its
//! metric values is an extreme outlier (beyond three interquartile ranges
//! from the quartiles) within a context-specific distribution: the whole
//! project, or slices by label, committer, merge status, file, filetype,
//! assignee, or owner. The crate covers the full pipeline: fetching and
//! caching repository data, computing metrics, detecting outliers, and
//! aggregating results into frequency, coverage, perception, and usefulness
//! statistics.

pub mod analytics;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod outliers;

pub use analytics::{
    coverage_stats, frequency_report, odds_ratio, perception_analysis, sample_survey_artifacts,
    usefulness_ranking, AnalyticsError, CoverageStats, FrequencyReport, PerceptionOutcome,
    PerceptionRow, PerceptionStratum, SurveyCell, SurveySample, UsefulnessEntry,
};
pub use ingest::{
    fetch_repository, link_commits_to_artifacts, load_snapshot, qualifies_for_sample,
    save_snapshot, IngestConfig, IngestError, QualificationVerdict, StoreError,
};
pub use metrics::{
    commit_observations, issue_observations, per_file_observations, pull_observations,
};
pub use model::{
    ArtifactKind, ArtifactRef, ChangeKind, Commit, CommitMetric, ContextKey, ContextKind,
    Direction, DistributionSummary, EventTypeId, FileChange, Issue, IssueMetric, MetricKind,
    Observation, OddsRatioResult, PullMetric, PullRequest, Rating, RepoSnapshot, UnusualEvent,
};
pub use outliers::{detect_all, detect_group, partition, summarize, DetectorConfig, OutlierError};
