//! Repository acquisition and persistence: fetching from the GitHub REST API,
//! the line-delimited snapshot cache, commit/issue/pull linking, and the
//! sample-qualification gate.

mod github;
mod link;
mod store;

pub use github::fetch_repository;
pub use link::{issue_refs, link_commits_to_artifacts};
pub use store::{load_snapshot, save_snapshot, SCHEMA_VERSION};

use std::fmt;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::model::{ModelError, RepoSnapshot};

pub const DEFAULT_MIN_COMMITS: usize = 500;
pub const DEFAULT_MIN_ISSUES_OR_PULLS: usize = 100;
pub const DEFAULT_API_BASE: &str = "https://api.github.com";

/// Knobs for [`fetch_repository`].
#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub auth_token: Option<String>,
    pub max_parallel_requests: usize,
    /// Page size for list endpoints, at most 100.
    pub page_size: usize,
    pub since: Option<DateTime<Utc>>,
    pub cache_dir: PathBuf,
    /// API root; overridable so tests can point at a fixture server.
    pub api_base: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            auth_token: None,
            max_parallel_requests: 4,
            page_size: 100,
            since: None,
            cache_dir: PathBuf::from("."),
            api_base: DEFAULT_API_BASE.to_string(),
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.max_parallel_requests < 1 {
            return Err(IngestError::Config("max_parallel_requests must be >= 1"));
        }
        if self.page_size < 1 || self.page_size > 100 {
            return Err(IngestError::Config("page_size must be in 1..=100"));
        }
        Ok(())
    }

    /// Cache file path for one repository.
    pub fn snapshot_path(&self, owner: &str, name: &str) -> PathBuf {
        self.cache_dir.join(format!("{owner}__{name}.snapshot.jsonl"))
    }

    pub(crate) fn partial_path(&self, owner: &str, name: &str) -> PathBuf {
        self.cache_dir.join(format!("{owner}__{name}.partial.jsonl"))
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid ingest configuration: {0}")]
    Config(&'static str),
    #[error("authentication failed")]
    Auth,
    #[error("repository {owner}/{name} not found")]
    RepositoryNotFound { owner: String, name: String },
    #[error("network failure: {0}")]
    Network(String),
    #[error("unexpected API response {status} from {url}")]
    Api { status: u16, url: String },
    #[error("malformed API payload from {url}: {message}")]
    Payload { url: String, message: String },
    #[error("partial fetch aborted; resumable state saved to {}", cache_state.display())]
    Partial {
        cache_state: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error("inconsistent repository data: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("missing schema header line")]
    MissingHeader,
    #[error("unsupported snapshot schema {found:?} (expected {SCHEMA_VERSION:?})")]
    Version { found: String },
    #[error("snapshot file has no meta record")]
    MissingMeta,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Outcome of the minimum-activity sampling gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualificationVerdict {
    Qualified,
    InsufficientCommits,
    InsufficientIssuesOrPulls,
}

impl QualificationVerdict {
    pub fn qualifies(self) -> bool {
        matches!(self, QualificationVerdict::Qualified)
    }

    pub fn reason(self) -> Option<&'static str> {
        match self {
            QualificationVerdict::Qualified => None,
            QualificationVerdict::InsufficientCommits => Some("insufficient commits"),
            QualificationVerdict::InsufficientIssuesOrPulls => Some("insufficient issues/pulls"),
        }
    }
}

impl fmt::Display for QualificationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason() {
            None => write!(f, "qualified"),
            Some(reason) => write!(f, "not qualified: {reason}"),
        }
    }
}

/// Checks the sampling thresholds: enough commits, and enough issues or
/// enough pull requests. The first failing criterion wins.
pub fn qualifies_for_sample(
    snapshot: &RepoSnapshot,
    min_commits: usize,
    min_issues_or_pulls: usize,
) -> QualificationVerdict {
    if snapshot.commits.len() < min_commits {
        QualificationVerdict::InsufficientCommits
    } else if snapshot.issues.len() < min_issues_or_pulls
        && snapshot.pulls.len() < min_issues_or_pulls
    {
        QualificationVerdict::InsufficientIssuesOrPulls
    } else {
        QualificationVerdict::Qualified
    }
}
