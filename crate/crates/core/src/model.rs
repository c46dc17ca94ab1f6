//! Shared domain types for repository data, metrics, contexts, and detection
//! results. Everything here is immutable after construction and safe to share
//! across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Elapsed time between two instants, in fractional days.
pub fn fractional_days(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    (to - from).num_seconds() as f64 / SECONDS_PER_DAY
}

/// Timestamp (de)serialization at second precision, `2016-01-01T00:00:00Z` style.
pub mod ts {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(dt: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&dt.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        let parsed = DateTime::parse_from_rfc3339(&raw).map_err(serde::de::Error::custom)?;
        Ok(parsed.with_timezone(&Utc))
    }
}

/// Same as [`ts`] but for optional timestamps.
pub mod ts_opt {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(dt: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match dt {
            Some(dt) => s.serialize_some(&dt.to_rfc3339_opts(SecondsFormat::Secs, true)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<DateTime<Utc>>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        match raw {
            Some(raw) => {
                let parsed =
                    DateTime::parse_from_rfc3339(&raw).map_err(serde::de::Error::custom)?;
                Ok(Some(parsed.with_timezone(&Utc)))
            }
            None => Ok(None),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate commit sha {0}")]
    DuplicateCommitSha(String),
    #[error("duplicate {kind} number {number}")]
    DuplicateNumber { kind: &'static str, number: u64 },
    #[error("number {0} used by both an issue and a pull request")]
    OverlappingNumber(u64),
    #[error("commit {sha}: invalid file change for {path}: {reason}")]
    InvalidFileChange {
        sha: String,
        path: String,
        reason: &'static str,
    },
    #[error("{kind} {id}: {reason}")]
    InvalidArtifact {
        kind: &'static str,
        id: String,
        reason: &'static str,
    },
}

// ---------------------------------------------------------------------------
// Artifact kinds and references
// ---------------------------------------------------------------------------

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Commit,
    Issue,
    Pull,
}

impl ArtifactKind {
    pub fn singular(self) -> &'static str {
        match self {
            ArtifactKind::Commit => "commit",
            ArtifactKind::Issue => "issue",
            ArtifactKind::Pull => "pull request",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            ArtifactKind::Commit => "commits",
            ArtifactKind::Issue => "issues",
            ArtifactKind::Pull => "pull requests",
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            ArtifactKind::Commit => "commit",
            ArtifactKind::Issue => "issue",
            ArtifactKind::Pull => "pull",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "commit" => Some(ArtifactKind::Commit),
            "issue" => Some(ArtifactKind::Issue),
            "pull" => Some(ArtifactKind::Pull),
            _ => None,
        }
    }
}

/// Points at one artifact; `path` is set for per-file commit observations so
/// one commit yields one observation per touched file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub kind: ArtifactKind,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ArtifactRef {
    pub fn commit(sha: impl Into<String>) -> Self {
        ArtifactRef {
            kind: ArtifactKind::Commit,
            id: sha.into(),
            path: None,
        }
    }

    pub fn commit_file(sha: impl Into<String>, path: impl Into<String>) -> Self {
        ArtifactRef {
            kind: ArtifactKind::Commit,
            id: sha.into(),
            path: Some(path.into()),
        }
    }

    pub fn issue(number: u64) -> Self {
        ArtifactRef {
            kind: ArtifactKind::Issue,
            id: number.to_string(),
            path: None,
        }
    }

    pub fn pull(number: u64) -> Self {
        ArtifactRef {
            kind: ArtifactKind::Pull,
            id: number.to_string(),
            path: None,
        }
    }

    /// Identity of the underlying artifact, ignoring the file path.
    pub fn artifact_id(&self) -> (ArtifactKind, &str) {
        (self.kind, &self.id)
    }

    /// Deterministic ordering key: issue/pull numbers sort numerically.
    pub fn sort_key(&self) -> (u8, u64, &str, Option<&str>) {
        let numeric = match self.kind {
            ArtifactKind::Commit => 0,
            _ => self.id.parse::<u64>().unwrap_or(u64::MAX),
        };
        (self.kind as u8, numeric, &self.id, self.path.as_deref())
    }
}

// ---------------------------------------------------------------------------
// Repository snapshot
// ---------------------------------------------------------------------------

/// Immutable capture of one repository. All detection is computed within a
/// single snapshot; nothing crosses project boundaries.
///
/// The first entry of `commits` is the default-branch head; reachability is
/// the transitive closure of parent links from it. Parents absent from the
/// snapshot are shallow boundaries, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoSnapshot {
    pub owner: String,
    pub name: String,
    pub default_branch: String,
    #[serde(with = "ts")]
    pub fetched_at: DateTime<Utc>,
    pub commits: Vec<Commit>,
    pub issues: Vec<Issue>,
    pub pulls: Vec<PullRequest>,
}

impl RepoSnapshot {
    /// Shas reachable from the default-branch head via parent links.
    pub fn default_branch_reachable(&self) -> BTreeSet<String> {
        let by_sha: HashMap<&str, &Commit> =
            self.commits.iter().map(|c| (c.sha.as_str(), c)).collect();
        let mut seen: HashSet<&str> = HashSet::new();
        let mut stack: Vec<&str> = match self.commits.first() {
            Some(head) => vec![head.sha.as_str()],
            None => Vec::new(),
        };
        while let Some(sha) = stack.pop() {
            if !seen.insert(sha) {
                continue;
            }
            if let Some(commit) = by_sha.get(sha) {
                for parent in &commit.parent_shas {
                    if by_sha.contains_key(parent.as_str()) && !seen.contains(parent.as_str()) {
                        stack.push(parent);
                    }
                }
            }
        }
        seen.into_iter().map(String::from).collect()
    }

    /// Parent shas referenced by commits but absent from the snapshot
    /// (shallow-history boundaries).
    pub fn external_parents(&self) -> BTreeSet<String> {
        let known: HashSet<&str> = self.commits.iter().map(|c| c.sha.as_str()).collect();
        self.commits
            .iter()
            .flat_map(|c| c.parent_shas.iter())
            .filter(|p| !known.contains(p.as_str()))
            .cloned()
            .collect()
    }

    /// Checks the structural invariants of the snapshot.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut shas = HashSet::new();
        for commit in &self.commits {
            if !shas.insert(commit.sha.as_str()) {
                return Err(ModelError::DuplicateCommitSha(commit.sha.clone()));
            }
            for change in &commit.file_changes {
                if change.path.is_empty() {
                    return Err(ModelError::InvalidFileChange {
                        sha: commit.sha.clone(),
                        path: change.path.clone(),
                        reason: "empty path",
                    });
                }
                match change.change_kind {
                    ChangeKind::Renamed if change.previous_path.is_none() => {
                        return Err(ModelError::InvalidFileChange {
                            sha: commit.sha.clone(),
                            path: change.path.clone(),
                            reason: "rename without previous path",
                        });
                    }
                    ChangeKind::Added if change.lines_deleted != 0 => {
                        return Err(ModelError::InvalidFileChange {
                            sha: commit.sha.clone(),
                            path: change.path.clone(),
                            reason: "added file with deleted lines",
                        });
                    }
                    ChangeKind::Deleted if change.lines_added != 0 => {
                        return Err(ModelError::InvalidFileChange {
                            sha: commit.sha.clone(),
                            path: change.path.clone(),
                            reason: "deleted file with added lines",
                        });
                    }
                    _ => {}
                }
            }
        }
        let mut numbers = HashSet::new();
        for issue in &self.issues {
            if !numbers.insert(issue.number) {
                return Err(ModelError::DuplicateNumber {
                    kind: "issue",
                    number: issue.number,
                });
            }
            if let Some(closed) = issue.closed_at {
                if closed < issue.created_at {
                    return Err(ModelError::InvalidArtifact {
                        kind: "issue",
                        id: issue.number.to_string(),
                        reason: "closed before created",
                    });
                }
            }
        }
        let mut pull_numbers = HashSet::new();
        for pull in &self.pulls {
            if !pull_numbers.insert(pull.number) {
                return Err(ModelError::DuplicateNumber {
                    kind: "pull request",
                    number: pull.number,
                });
            }
            if numbers.contains(&pull.number) {
                return Err(ModelError::OverlappingNumber(pull.number));
            }
            if let Some(closed) = pull.closed_at {
                if closed < pull.created_at {
                    return Err(ModelError::InvalidArtifact {
                        kind: "pull request",
                        id: pull.number.to_string(),
                        reason: "closed before created",
                    });
                }
            }
            match (pull.merged_at, pull.closed_at) {
                (Some(merged), Some(_)) if merged < pull.created_at => {
                    return Err(ModelError::InvalidArtifact {
                        kind: "pull request",
                        id: pull.number.to_string(),
                        reason: "merged before created",
                    });
                }
                (Some(_), None) => {
                    return Err(ModelError::InvalidArtifact {
                        kind: "pull request",
                        id: pull.number.to_string(),
                        reason: "merged but not closed",
                    });
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commit {
    pub sha: String,
    pub parent_shas: Vec<String>,
    pub author_id: String,
    pub committer_id: String,
    #[serde(with = "ts")]
    pub committer_timestamp: DateTime<Utc>,
    pub message: String,
    pub file_changes: Vec<FileChange>,
    pub comment_count: u64,
    pub linked_issue_numbers: BTreeSet<u64>,
    pub linked_pr_numbers: BTreeSet<u64>,
}

impl Commit {
    pub fn is_merge(&self) -> bool {
        self.parent_shas.len() >= 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Added,
    Modified,
    Deleted,
    Renamed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub change_kind: ChangeKind,
    pub lines_added: u64,
    pub lines_deleted: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub number: u64,
    pub title: String,
    pub body: String,
    pub creator_id: String,
    pub assignee_ids: BTreeSet<String>,
    pub labels: BTreeSet<String>,
    #[serde(with = "ts")]
    pub created_at: DateTime<Utc>,
    #[serde(default, with = "ts_opt", skip_serializing_if = "Option::is_none")]
    pub closed_at: Option<DateTime<Utc>>,
    pub comment_count: u64,
    pub linked_default_branch_commit_shas: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullRequest {
    pub number: u64,
    pub title: String,
    pub body: String,
    pub creator_id: String,
    pub assignee_ids: BTreeSet<String>,
    pub labels: BTreeSet<String>,
    #[serde(with = "ts")]
    pub created_at: DateTime<Utc>,
    #[serde(default, with = "ts_opt", skip_serializing_if = "Option::is_none")]
    pub closed_at: Option<DateTime<Utc>>,
    #[serde(default, with = "ts_opt", skip_serializing_if = "Option::is_none")]
    pub merged_at: Option<DateTime<Utc>>,
    pub comment_count: u64,
    pub review_comment_count: u64,
    pub changed_files: u64,
    pub lines_added: u64,
    pub lines_deleted: u64,
    pub commit_shas: BTreeSet<String>,
}

impl PullRequest {
    pub fn is_merged(&self) -> bool {
        self.merged_at.is_some()
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Unit a metric is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Days,
    Lines,
    Characters,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CommitMetric {
    DaysBetweenCommits,
    LocAdded,
    LocDeleted,
    LocModified,
    MessageLength,
    CommentCount,
    FilesAdded,
    FilesChanged,
    FilesDeleted,
    FilesModified,
    FilesRenamed,
    PullRequestCount,
}

impl CommitMetric {
    pub const ALL: [CommitMetric; 12] = [
        CommitMetric::DaysBetweenCommits,
        CommitMetric::LocAdded,
        CommitMetric::LocDeleted,
        CommitMetric::LocModified,
        CommitMetric::MessageLength,
        CommitMetric::CommentCount,
        CommitMetric::FilesAdded,
        CommitMetric::FilesChanged,
        CommitMetric::FilesDeleted,
        CommitMetric::FilesModified,
        CommitMetric::FilesRenamed,
        CommitMetric::PullRequestCount,
    ];

    /// Metrics that also exist at per-file granularity.
    pub const PER_FILE: [CommitMetric; 4] = [
        CommitMetric::DaysBetweenCommits,
        CommitMetric::LocAdded,
        CommitMetric::LocDeleted,
        CommitMetric::LocModified,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IssueMetric {
    BodyLength,
    DaysOpenToClosed,
    CommentCount,
    LabelCount,
    DefaultBranchCommitCount,
    TitleLength,
}

impl IssueMetric {
    pub const ALL: [IssueMetric; 6] = [
        IssueMetric::BodyLength,
        IssueMetric::DaysOpenToClosed,
        IssueMetric::CommentCount,
        IssueMetric::LabelCount,
        IssueMetric::DefaultBranchCommitCount,
        IssueMetric::TitleLength,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PullMetric {
    BodyLength,
    DaysOpenToClosed,
    DaysOpenToMerged,
    ChangedFiles,
    ReviewCommentCount,
    CommentCount,
    LabelCount,
    LocAdded,
    LocDeleted,
    DefaultBranchCommitCount,
    TitleLength,
}

impl PullMetric {
    pub const ALL: [PullMetric; 11] = [
        PullMetric::BodyLength,
        PullMetric::DaysOpenToClosed,
        PullMetric::DaysOpenToMerged,
        PullMetric::ChangedFiles,
        PullMetric::ReviewCommentCount,
        PullMetric::CommentCount,
        PullMetric::LabelCount,
        PullMetric::LocAdded,
        PullMetric::LocDeleted,
        PullMetric::DefaultBranchCommitCount,
        PullMetric::TitleLength,
    ];
}

/// One measurable quantity, tagged with the artifact kind it applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricKind {
    Commit(CommitMetric),
    Issue(IssueMetric),
    Pull(PullMetric),
}

impl MetricKind {
    pub fn artifact_kind(self) -> ArtifactKind {
        match self {
            MetricKind::Commit(_) => ArtifactKind::Commit,
            MetricKind::Issue(_) => ArtifactKind::Issue,
            MetricKind::Pull(_) => ArtifactKind::Pull,
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            MetricKind::Commit(m) => match m {
                CommitMetric::DaysBetweenCommits => Unit::Days,
                CommitMetric::LocAdded | CommitMetric::LocDeleted | CommitMetric::LocModified => {
                    Unit::Lines
                }
                CommitMetric::MessageLength => Unit::Characters,
                _ => Unit::Count,
            },
            MetricKind::Issue(m) => match m {
                IssueMetric::BodyLength | IssueMetric::TitleLength => Unit::Characters,
                IssueMetric::DaysOpenToClosed => Unit::Days,
                _ => Unit::Count,
            },
            MetricKind::Pull(m) => match m {
                PullMetric::BodyLength | PullMetric::TitleLength => Unit::Characters,
                PullMetric::DaysOpenToClosed | PullMetric::DaysOpenToMerged => Unit::Days,
                PullMetric::LocAdded | PullMetric::LocDeleted => Unit::Lines,
                _ => Unit::Count,
            },
        }
    }

    /// Short identifier used in type ids and JSON output.
    pub fn id(self) -> &'static str {
        match self {
            MetricKind::Commit(m) => match m {
                CommitMetric::DaysBetweenCommits => "days_between_commits",
                CommitMetric::LocAdded => "loc_added",
                CommitMetric::LocDeleted => "loc_deleted",
                CommitMetric::LocModified => "loc_modified",
                CommitMetric::MessageLength => "message_length",
                CommitMetric::CommentCount => "comment_count",
                CommitMetric::FilesAdded => "files_added",
                CommitMetric::FilesChanged => "files_changed",
                CommitMetric::FilesDeleted => "files_deleted",
                CommitMetric::FilesModified => "files_modified",
                CommitMetric::FilesRenamed => "files_renamed",
                CommitMetric::PullRequestCount => "pull_request_count",
            },
            MetricKind::Issue(m) => match m {
                IssueMetric::BodyLength => "body_length",
                IssueMetric::DaysOpenToClosed => "days_open_to_closed",
                IssueMetric::CommentCount => "comment_count",
                IssueMetric::LabelCount => "label_count",
                IssueMetric::DefaultBranchCommitCount => "default_branch_commit_count",
                IssueMetric::TitleLength => "title_length",
            },
            MetricKind::Pull(m) => match m {
                PullMetric::BodyLength => "body_length",
                PullMetric::DaysOpenToClosed => "days_open_to_closed",
                PullMetric::DaysOpenToMerged => "days_open_to_merged",
                PullMetric::ChangedFiles => "changed_files",
                PullMetric::ReviewCommentCount => "review_comment_count",
                PullMetric::CommentCount => "comment_count",
                PullMetric::LabelCount => "label_count",
                PullMetric::LocAdded => "loc_added",
                PullMetric::LocDeleted => "loc_deleted",
                PullMetric::DefaultBranchCommitCount => "default_branch_commit_count",
                PullMetric::TitleLength => "title_length",
            },
        }
    }

    pub fn from_id(kind: ArtifactKind, id: &str) -> Option<Self> {
        let all: Vec<MetricKind> = match kind {
            ArtifactKind::Commit => CommitMetric::ALL.iter().map(|&m| MetricKind::Commit(m)).collect(),
            ArtifactKind::Issue => IssueMetric::ALL.iter().map(|&m| MetricKind::Issue(m)).collect(),
            ArtifactKind::Pull => PullMetric::ALL.iter().map(|&m| MetricKind::Pull(m)).collect(),
        };
        all.into_iter().find(|m| m.id() == id)
    }

    /// Human-readable name, as used in notification messages.
    pub fn display_name(self) -> &'static str {
        match self {
            MetricKind::Commit(m) => match m {
                CommitMetric::DaysBetweenCommits => "days between commits",
                CommitMetric::LocAdded => "number of LOC added",
                CommitMetric::LocDeleted => "number of LOC deleted",
                CommitMetric::LocModified => "number of LOC modified",
                CommitMetric::MessageLength => "message length",
                CommitMetric::CommentCount => "number of comments",
                CommitMetric::FilesAdded => "number of files added",
                CommitMetric::FilesChanged => "number of files changed",
                CommitMetric::FilesDeleted => "number of files deleted",
                CommitMetric::FilesModified => "number of files modified",
                CommitMetric::FilesRenamed => "number of files renamed",
                CommitMetric::PullRequestCount => "number of pull requests",
            },
            MetricKind::Issue(m) => match m {
                IssueMetric::BodyLength => "body length",
                IssueMetric::DaysOpenToClosed => "days between open and closed",
                IssueMetric::CommentCount => "number of comments",
                IssueMetric::LabelCount => "number of labels",
                IssueMetric::DefaultBranchCommitCount => "number of master branch commits",
                IssueMetric::TitleLength => "title length",
            },
            MetricKind::Pull(m) => match m {
                PullMetric::BodyLength => "body length",
                PullMetric::DaysOpenToClosed => "days between open and closed",
                PullMetric::DaysOpenToMerged => "days between open and merged",
                PullMetric::ChangedFiles => "number of changed files",
                PullMetric::ReviewCommentCount => "number of code review comments",
                PullMetric::CommentCount => "number of comments",
                PullMetric::LabelCount => "number of labels",
                PullMetric::LocAdded => "number of LOC added",
                PullMetric::LocDeleted => "number of LOC deleted",
                PullMetric::DefaultBranchCommitCount => "number of master branch commits",
                PullMetric::TitleLength => "title length",
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Contexts
// ---------------------------------------------------------------------------

/// The slice of a project over which a distribution is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContextKind {
    Project,
    Label,
    MergeFlag,
    Committer,
    CommitterAndMerge,
    File,
    FileAndMerge,
    FileAndCommitter,
    FileAndLabel,
    Filetype,
    Assignee,
    Owner,
    MergeStatus,
}

impl ContextKind {
    pub const ALL: [ContextKind; 13] = [
        ContextKind::Project,
        ContextKind::Label,
        ContextKind::MergeFlag,
        ContextKind::Committer,
        ContextKind::CommitterAndMerge,
        ContextKind::File,
        ContextKind::FileAndMerge,
        ContextKind::FileAndCommitter,
        ContextKind::FileAndLabel,
        ContextKind::Filetype,
        ContextKind::Assignee,
        ContextKind::Owner,
        ContextKind::MergeStatus,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ContextKind::Project => "project",
            ContextKind::Label => "label",
            ContextKind::MergeFlag => "merge_flag",
            ContextKind::Committer => "committer",
            ContextKind::CommitterAndMerge => "committer_and_merge",
            ContextKind::File => "file",
            ContextKind::FileAndMerge => "file_and_merge",
            ContextKind::FileAndCommitter => "file_and_committer",
            ContextKind::FileAndLabel => "file_and_label",
            ContextKind::Filetype => "filetype",
            ContextKind::Assignee => "assignee",
            ContextKind::Owner => "owner",
            ContextKind::MergeStatus => "merge_status",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        ContextKind::ALL.iter().copied().find(|c| c.id() == id)
    }

    /// Number of discriminator strings a key of this kind carries.
    pub fn arity(self) -> usize {
        match self {
            ContextKind::Project => 0,
            ContextKind::Label
            | ContextKind::MergeFlag
            | ContextKind::Committer
            | ContextKind::File
            | ContextKind::Filetype
            | ContextKind::Assignee
            | ContextKind::Owner
            | ContextKind::MergeStatus => 1,
            ContextKind::CommitterAndMerge
            | ContextKind::FileAndMerge
            | ContextKind::FileAndCommitter
            | ContextKind::FileAndLabel => 2,
        }
    }

    /// Contexts whose groups are built from per-file observations.
    pub fn is_file_level(self) -> bool {
        matches!(
            self,
            ContextKind::File
                | ContextKind::FileAndMerge
                | ContextKind::FileAndCommitter
                | ContextKind::FileAndLabel
                | ContextKind::Filetype
        )
    }
}

pub const MERGE_DISCRIMINATOR: &str = "merge";
pub const NON_MERGE_DISCRIMINATOR: &str = "non-merge";
pub const MERGED_DISCRIMINATOR: &str = "merged";
pub const UNMERGED_DISCRIMINATOR: &str = "unmerged";
pub const NO_EXTENSION: &str = "<none>";

/// A concrete context group key. Arity per kind is fixed by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContextKey {
    Project,
    Label(String),
    MergeFlag(bool),
    Committer(String),
    CommitterAndMerge(String, bool),
    File(String),
    FileAndMerge(String, bool),
    FileAndCommitter(String, String),
    FileAndLabel(String, String),
    Filetype(String),
    Assignee(String),
    Owner(String),
    MergeStatus(bool),
}

impl ContextKey {
    pub fn kind(&self) -> ContextKind {
        match self {
            ContextKey::Project => ContextKind::Project,
            ContextKey::Label(_) => ContextKind::Label,
            ContextKey::MergeFlag(_) => ContextKind::MergeFlag,
            ContextKey::Committer(_) => ContextKind::Committer,
            ContextKey::CommitterAndMerge(..) => ContextKind::CommitterAndMerge,
            ContextKey::File(_) => ContextKind::File,
            ContextKey::FileAndMerge(..) => ContextKind::FileAndMerge,
            ContextKey::FileAndCommitter(..) => ContextKind::FileAndCommitter,
            ContextKey::FileAndLabel(..) => ContextKind::FileAndLabel,
            ContextKey::Filetype(_) => ContextKind::Filetype,
            ContextKey::Assignee(_) => ContextKind::Assignee,
            ContextKey::Owner(_) => ContextKind::Owner,
            ContextKey::MergeStatus(_) => ContextKind::MergeStatus,
        }
    }

    pub fn discriminators(&self) -> Vec<String> {
        fn flag(value: bool, yes: &str, no: &str) -> String {
            if value { yes.to_string() } else { no.to_string() }
        }
        match self {
            ContextKey::Project => vec![],
            ContextKey::Label(l) => vec![l.clone()],
            ContextKey::MergeFlag(m) => {
                vec![flag(*m, MERGE_DISCRIMINATOR, NON_MERGE_DISCRIMINATOR)]
            }
            ContextKey::Committer(c) => vec![c.clone()],
            ContextKey::CommitterAndMerge(c, m) => vec![
                c.clone(),
                flag(*m, MERGE_DISCRIMINATOR, NON_MERGE_DISCRIMINATOR),
            ],
            ContextKey::File(p) => vec![p.clone()],
            ContextKey::FileAndMerge(p, m) => vec![
                p.clone(),
                flag(*m, MERGE_DISCRIMINATOR, NON_MERGE_DISCRIMINATOR),
            ],
            ContextKey::FileAndCommitter(p, c) => vec![p.clone(), c.clone()],
            ContextKey::FileAndLabel(p, l) => vec![p.clone(), l.clone()],
            ContextKey::Filetype(e) => vec![e.clone()],
            ContextKey::Assignee(a) => vec![a.clone()],
            ContextKey::Owner(o) => vec![o.clone()],
            ContextKey::MergeStatus(m) => {
                vec![flag(*m, MERGED_DISCRIMINATOR, UNMERGED_DISCRIMINATOR)]
            }
        }
    }

    /// Rebuilds a key from its kind and discriminator list.
    pub fn from_parts(kind: ContextKind, discriminators: &[String]) -> Option<ContextKey> {
        fn parse_flag(raw: &str, yes: &str, no: &str) -> Option<bool> {
            if raw == yes {
                Some(true)
            } else if raw == no {
                Some(false)
            } else {
                None
            }
        }
        if discriminators.len() != kind.arity() {
            return None;
        }
        let d = discriminators;
        Some(match kind {
            ContextKind::Project => ContextKey::Project,
            ContextKind::Label => ContextKey::Label(d[0].clone()),
            ContextKind::MergeFlag => ContextKey::MergeFlag(parse_flag(
                &d[0],
                MERGE_DISCRIMINATOR,
                NON_MERGE_DISCRIMINATOR,
            )?),
            ContextKind::Committer => ContextKey::Committer(d[0].clone()),
            ContextKind::CommitterAndMerge => ContextKey::CommitterAndMerge(
                d[0].clone(),
                parse_flag(&d[1], MERGE_DISCRIMINATOR, NON_MERGE_DISCRIMINATOR)?,
            ),
            ContextKind::File => ContextKey::File(d[0].clone()),
            ContextKind::FileAndMerge => ContextKey::FileAndMerge(
                d[0].clone(),
                parse_flag(&d[1], MERGE_DISCRIMINATOR, NON_MERGE_DISCRIMINATOR)?,
            ),
            ContextKind::FileAndCommitter => {
                ContextKey::FileAndCommitter(d[0].clone(), d[1].clone())
            }
            ContextKind::FileAndLabel => ContextKey::FileAndLabel(d[0].clone(), d[1].clone()),
            ContextKind::Filetype => ContextKey::Filetype(d[0].clone()),
            ContextKind::Assignee => ContextKey::Assignee(d[0].clone()),
            ContextKind::Owner => ContextKey::Owner(d[0].clone()),
            ContextKind::MergeStatus => ContextKey::MergeStatus(parse_flag(
                &d[0],
                MERGED_DISCRIMINATOR,
                UNMERGED_DISCRIMINATOR,
            )?),
        })
    }
}

/// Lowercase extension after the final dot of the filename, or `<none>`.
pub fn file_extension(path: &str) -> String {
    let filename = path.rsplit('/').next().unwrap_or(path);
    match filename.rfind('.') {
        Some(idx) if idx + 1 < filename.len() => filename[idx + 1..].to_lowercase(),
        _ => NO_EXTENSION.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Event types
// ---------------------------------------------------------------------------

/// One way in which an artifact can be unusual: an (artifact kind, metric,
/// context kind) combination. Only combinations with a defined distribution
/// are constructible; there are exactly 151 of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventTypeId {
    metric: MetricKind,
    context: ContextKind,
}

impl EventTypeId {
    pub fn new(metric: MetricKind, context: ContextKind) -> Option<Self> {
        if Self::is_valid(metric, context) {
            Some(EventTypeId { metric, context })
        } else {
            None
        }
    }

    fn is_valid(metric: MetricKind, context: ContextKind) -> bool {
        match metric {
            MetricKind::Commit(m) => match context {
                ContextKind::Project
                | ContextKind::Label
                | ContextKind::MergeFlag
                | ContextKind::Committer => true,
                ContextKind::CommitterAndMerge
                | ContextKind::File
                | ContextKind::FileAndMerge
                | ContextKind::FileAndCommitter
                | ContextKind::FileAndLabel
                | ContextKind::Filetype => CommitMetric::PER_FILE.contains(&m),
                _ => false,
            },
            MetricKind::Issue(_) => matches!(
                context,
                ContextKind::Project
                    | ContextKind::Label
                    | ContextKind::Assignee
                    | ContextKind::Owner
            ),
            MetricKind::Pull(_) => matches!(
                context,
                ContextKind::Project
                    | ContextKind::Label
                    | ContextKind::Assignee
                    | ContextKind::Owner
                    | ContextKind::MergeStatus
            ),
        }
    }

    pub fn metric(self) -> MetricKind {
        self.metric
    }

    pub fn context(self) -> ContextKind {
        self.context
    }

    pub fn artifact_kind(self) -> ArtifactKind {
        self.metric.artifact_kind()
    }

    /// Every constructible event type, in canonical (artifact, metric,
    /// context) order.
    pub fn all() -> Vec<EventTypeId> {
        let mut out = Vec::new();
        let metrics: Vec<MetricKind> = CommitMetric::ALL
            .iter()
            .map(|&m| MetricKind::Commit(m))
            .chain(IssueMetric::ALL.iter().map(|&m| MetricKind::Issue(m)))
            .chain(PullMetric::ALL.iter().map(|&m| MetricKind::Pull(m)))
            .collect();
        for metric in metrics {
            for context in ContextKind::ALL {
                if let Some(id) = EventTypeId::new(metric, context) {
                    out.push(id);
                }
            }
        }
        out
    }

    /// The six types rated useful by at least half their voters.
    pub fn useful_six() -> [EventTypeId; 6] {
        [
            EventTypeId::new(
                MetricKind::Commit(CommitMetric::LocModified),
                ContextKind::Project,
            )
            .unwrap(),
            EventTypeId::new(
                MetricKind::Pull(PullMetric::CommentCount),
                ContextKind::Project,
            )
            .unwrap(),
            EventTypeId::new(
                MetricKind::Issue(IssueMetric::DaysOpenToClosed),
                ContextKind::Project,
            )
            .unwrap(),
            EventTypeId::new(
                MetricKind::Issue(IssueMetric::CommentCount),
                ContextKind::Label,
            )
            .unwrap(),
            EventTypeId::new(
                MetricKind::Commit(CommitMetric::LocDeleted),
                ContextKind::Project,
            )
            .unwrap(),
            EventTypeId::new(
                MetricKind::Commit(CommitMetric::LocAdded),
                ContextKind::Project,
            )
            .unwrap(),
        ]
    }
}

impl fmt::Display for EventTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.artifact_kind().id(),
            self.metric.id(),
            self.context.id()
        )
    }
}

#[derive(Debug, Error)]
#[error("invalid event type id {0:?}")]
pub struct ParseEventTypeError(pub String);

impl FromStr for EventTypeId {
    type Err = ParseEventTypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseEventTypeError(s.to_string());
        let mut parts = s.split('/');
        let kind = parts.next().and_then(ArtifactKind::from_id).ok_or_else(err)?;
        let metric = parts
            .next()
            .and_then(|m| MetricKind::from_id(kind, m))
            .ok_or_else(err)?;
        let context = parts
            .next()
            .and_then(ContextKind::from_id)
            .ok_or_else(err)?;
        if parts.next().is_some() {
            return Err(err());
        }
        EventTypeId::new(metric, context).ok_or_else(err)
    }
}

impl Serialize for EventTypeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EventTypeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Observations and detection results
// ---------------------------------------------------------------------------

/// One (artifact, metric) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub artifact: ArtifactRef,
    pub metric: MetricKind,
    pub value: f64,
}

impl Observation {
    pub fn new(artifact: ArtifactRef, metric: MetricKind, value: f64) -> Self {
        debug_assert!(value.is_finite());
        Observation {
            artifact,
            metric,
            value,
        }
    }
}

/// Quartiles and outlier fences of one context group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    High,
    Low,
}

/// One artifact flagged by one event type within one context group.
#[derive(Debug, Clone, PartialEq)]
pub struct UnusualEvent {
    pub artifact: ArtifactRef,
    pub event_type: EventTypeId,
    pub context: ContextKey,
    pub value: f64,
    pub summary: DistributionSummary,
    pub direction: Direction,
}

impl UnusualEvent {
    /// The direction invariant: high events lie strictly above the upper
    /// fence, low events strictly below the lower fence.
    pub fn direction_holds(&self) -> bool {
        match self.direction {
            Direction::High => self.value > self.summary.upper_fence,
            Direction::Low => self.value < self.summary.lower_fence,
        }
    }

    /// Full deterministic ordering: artifact, event type, context, path.
    pub fn sort_key(&self) -> (u8, u64, String, EventTypeId, ContextKey, Option<String>) {
        let (kind, numeric, id, path) = self.artifact.sort_key();
        (
            kind,
            numeric,
            id.to_string(),
            self.event_type,
            self.context.clone(),
            path.map(String::from),
        )
    }
}

/// One survey answer about one artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub artifact_ref: ArtifactRef,
    pub is_unusual: bool,
    pub flagged_types: BTreeSet<EventTypeId>,
    pub perceived_difficult: bool,
    pub perceived_typical: bool,
    pub owned_by_rater: bool,
    #[serde(default)]
    pub per_type_useful: BTreeMap<EventTypeId, bool>,
}

impl Rating {
    /// Flagged types must be nonempty exactly when the artifact is unusual.
    pub fn is_consistent(&self) -> bool {
        self.is_unusual == !self.flagged_types.is_empty()
    }
}

/// A 2x2 contingency table with its odds ratio and 95% confidence interval.
/// `corrected` marks results where the Haldane-Anscombe 0.5 adjustment was
/// applied because of a zero cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioResult {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub odds_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub corrected: bool,
}
