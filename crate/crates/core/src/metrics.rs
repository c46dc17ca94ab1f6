//! Turns snapshots into numeric observations, one per (artifact, metric).
//!
//! Orderings sort by (committer timestamp, sha) so gaps are nonnegative even
//! when raw history timestamps are not monotonic. Diff data only exposes
//! added/deleted line counts, so "modified" lines are paired per file change:
//! modified = min(added, deleted), with the remainders counting as pure adds
//! and deletes.

use std::collections::{BTreeMap, HashMap};

use crate::model::{
    fractional_days, ArtifactRef, ChangeKind, Commit, CommitMetric, FileChange, IssueMetric,
    MetricKind, Observation, PullMetric, RepoSnapshot,
};

/// Commits sorted by (committer timestamp, sha).
pub(crate) fn canonical_commits(snapshot: &RepoSnapshot) -> Vec<&Commit> {
    let mut ordered: Vec<&Commit> = snapshot.commits.iter().collect();
    ordered.sort_by(|a, b| {
        a.committer_timestamp
            .cmp(&b.committer_timestamp)
            .then_with(|| a.sha.cmp(&b.sha))
    });
    ordered
}

/// Per-file-change line pairing: (added, deleted, modified).
pub(crate) fn paired_loc(change: &FileChange) -> (u64, u64, u64) {
    let modified = change.lines_added.min(change.lines_deleted);
    (
        change.lines_added - modified,
        change.lines_deleted - modified,
        modified,
    )
}

/// One (commit, file change) pair with its rename-chain identity. The chain
/// is keyed by the first path a file was seen under; renames transfer it, so
/// per-file commit gaps survive renames.
pub(crate) struct FileTouch<'a> {
    pub commit: &'a Commit,
    pub change: &'a FileChange,
    pub chain: String,
}

/// All file touches in canonical commit order, with chains resolved.
pub(crate) fn file_touches(snapshot: &RepoSnapshot) -> Vec<FileTouch<'_>> {
    let mut live: HashMap<String, String> = HashMap::new();
    let mut touches = Vec::new();
    for commit in canonical_commits(snapshot) {
        for change in &commit.file_changes {
            let chain = match change.change_kind {
                ChangeKind::Renamed => {
                    let previous = change
                        .previous_path
                        .as_deref()
                        .unwrap_or(change.path.as_str());
                    let root = live
                        .remove(previous)
                        .unwrap_or_else(|| previous.to_string());
                    live.insert(change.path.clone(), root.clone());
                    root
                }
                _ => live
                    .entry(change.path.clone())
                    .or_insert_with(|| change.path.clone())
                    .clone(),
            };
            touches.push(FileTouch {
                commit,
                change,
                chain,
            });
        }
    }
    touches
}

/// Commit-level observations: every applicable commit metric for every
/// commit. Gap observations use the project-wide ordering; the first commit
/// produces none.
pub fn commit_observations(snapshot: &RepoSnapshot) -> Vec<Observation> {
    let ordered = canonical_commits(snapshot);
    let mut out = Vec::new();

    for pair in ordered.windows(2) {
        out.push(Observation::new(
            ArtifactRef::commit(&pair[1].sha),
            MetricKind::Commit(CommitMetric::DaysBetweenCommits),
            fractional_days(pair[0].committer_timestamp, pair[1].committer_timestamp),
        ));
    }

    for commit in &ordered {
        let artifact = ArtifactRef::commit(&commit.sha);
        let mut added = 0u64;
        let mut deleted = 0u64;
        let mut modified = 0u64;
        let mut files_added = 0u64;
        let mut files_deleted = 0u64;
        let mut files_modified = 0u64;
        let mut files_renamed = 0u64;
        for change in &commit.file_changes {
            let (a, d, m) = paired_loc(change);
            added += a;
            deleted += d;
            modified += m;
            match change.change_kind {
                ChangeKind::Added => files_added += 1,
                ChangeKind::Deleted => files_deleted += 1,
                ChangeKind::Modified => files_modified += 1,
                ChangeKind::Renamed => files_renamed += 1,
            }
        }
        let metric_values = [
            (CommitMetric::LocAdded, added as f64),
            (CommitMetric::LocDeleted, deleted as f64),
            (CommitMetric::LocModified, modified as f64),
            (
                CommitMetric::MessageLength,
                commit.message.chars().count() as f64,
            ),
            (CommitMetric::CommentCount, commit.comment_count as f64),
            (CommitMetric::FilesAdded, files_added as f64),
            (
                CommitMetric::FilesChanged,
                commit.file_changes.len() as f64,
            ),
            (CommitMetric::FilesDeleted, files_deleted as f64),
            (CommitMetric::FilesModified, files_modified as f64),
            (CommitMetric::FilesRenamed, files_renamed as f64),
            (
                CommitMetric::PullRequestCount,
                commit.linked_pr_numbers.len() as f64,
            ),
        ];
        for (metric, value) in metric_values {
            out.push(Observation::new(
                artifact.clone(),
                MetricKind::Commit(metric),
                value,
            ));
        }
    }
    out
}

/// Per-file observations for the four file-level metrics. Gap observations
/// measure the time since the previous commit touching the same chain; a file
/// touched only once produces no gap.
pub fn per_file_observations(snapshot: &RepoSnapshot) -> Vec<Observation> {
    let touches = file_touches(snapshot);
    let mut out = Vec::new();

    let mut by_chain: BTreeMap<&str, Vec<&FileTouch>> = BTreeMap::new();
    for touch in &touches {
        by_chain.entry(touch.chain.as_str()).or_default().push(touch);
    }
    for chain_touches in by_chain.values() {
        for pair in chain_touches.windows(2) {
            out.push(Observation::new(
                ArtifactRef::commit_file(&pair[1].commit.sha, &pair[1].change.path),
                MetricKind::Commit(CommitMetric::DaysBetweenCommits),
                fractional_days(
                    pair[0].commit.committer_timestamp,
                    pair[1].commit.committer_timestamp,
                ),
            ));
        }
    }

    for touch in &touches {
        let artifact = ArtifactRef::commit_file(&touch.commit.sha, &touch.change.path);
        let (added, deleted, modified) = paired_loc(touch.change);
        for (metric, value) in [
            (CommitMetric::LocAdded, added as f64),
            (CommitMetric::LocDeleted, deleted as f64),
            (CommitMetric::LocModified, modified as f64),
        ] {
            out.push(Observation::new(
                artifact.clone(),
                MetricKind::Commit(metric),
                value,
            ));
        }
    }
    out
}

/// Issue observations. `days_open_to_closed` is emitted for closed issues
/// only.
pub fn issue_observations(snapshot: &RepoSnapshot) -> Vec<Observation> {
    let mut out = Vec::new();
    for issue in &snapshot.issues {
        let artifact = ArtifactRef::issue(issue.number);
        let mut push = |metric: IssueMetric, value: f64| {
            out.push(Observation::new(
                artifact.clone(),
                MetricKind::Issue(metric),
                value,
            ));
        };
        push(IssueMetric::BodyLength, issue.body.chars().count() as f64);
        if let Some(closed) = issue.closed_at {
            push(
                IssueMetric::DaysOpenToClosed,
                fractional_days(issue.created_at, closed),
            );
        }
        push(IssueMetric::CommentCount, issue.comment_count as f64);
        push(IssueMetric::LabelCount, issue.labels.len() as f64);
        push(
            IssueMetric::DefaultBranchCommitCount,
            issue.linked_default_branch_commit_shas.len() as f64,
        );
        push(IssueMetric::TitleLength, issue.title.chars().count() as f64);
    }
    out
}

/// Pull-request observations. Close and merge durations are emitted only
/// when the corresponding timestamp exists; the default-branch commit count
/// intersects the PR's commits with head reachability.
pub fn pull_observations(snapshot: &RepoSnapshot) -> Vec<Observation> {
    let reachable = snapshot.default_branch_reachable();
    let mut out = Vec::new();
    for pull in &snapshot.pulls {
        let artifact = ArtifactRef::pull(pull.number);
        let mut push = |metric: PullMetric, value: f64| {
            out.push(Observation::new(
                artifact.clone(),
                MetricKind::Pull(metric),
                value,
            ));
        };
        push(PullMetric::BodyLength, pull.body.chars().count() as f64);
        if let Some(closed) = pull.closed_at {
            push(
                PullMetric::DaysOpenToClosed,
                fractional_days(pull.created_at, closed),
            );
        }
        if let Some(merged) = pull.merged_at {
            push(
                PullMetric::DaysOpenToMerged,
                fractional_days(pull.created_at, merged),
            );
        }
        push(PullMetric::ChangedFiles, pull.changed_files as f64);
        push(
            PullMetric::ReviewCommentCount,
            pull.review_comment_count as f64,
        );
        push(PullMetric::CommentCount, pull.comment_count as f64);
        push(PullMetric::LabelCount, pull.labels.len() as f64);
        push(PullMetric::LocAdded, pull.lines_added as f64);
        push(PullMetric::LocDeleted, pull.lines_deleted as f64);
        let on_default = pull
            .commit_shas
            .iter()
            .filter(|sha| reachable.contains(*sha))
            .count();
        push(PullMetric::DefaultBranchCommitCount, on_default as f64);
        push(PullMetric::TitleLength, pull.title.chars().count() as f64);
    }
    out
}
