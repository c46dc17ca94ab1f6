//! The detection engine: partitions observations into context groups,
//! summarizes each group's distribution, and flags extreme outliers.
//!
//! A value x is an extreme outlier of its group when x < Q1 - k*IQR or
//! x > Q3 + k*IQR, with k = 3 by default. Both inequalities are strict, so a
//! value sitting exactly on a fence is not flagged.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::metrics;
use crate::model::{
    file_extension, fractional_days, ArtifactKind, ArtifactRef, Commit, CommitMetric, ContextKey,
    ContextKind, Direction, DistributionSummary, EventTypeId, Issue, MetricKind, Observation,
    PullRequest, RepoSnapshot, UnusualEvent,
};

#[derive(Debug, Error)]
pub enum OutlierError {
    #[error("invalid detector configuration: {0}")]
    Config(&'static str),
    #[error("cannot summarize an empty group")]
    EmptyValues,
    #[error("cannot summarize non-finite values")]
    NonFiniteValues,
    #[error("context {context} is inapplicable to {artifact} metric {metric}")]
    InapplicableCombination {
        artifact: &'static str,
        metric: &'static str,
        context: &'static str,
    },
    #[error("observations for a {0} context must carry a file path")]
    ObservationMissingPath(&'static str),
    #[error("observation references unknown {kind} {id}")]
    UnknownArtifact { kind: &'static str, id: String },
}

/// Detector settings. `enabled_event_types` defaults to all 151 types;
/// `useful_only` further restricts detection to the six types developers
/// rated most useful.
#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub k: f64,
    pub min_group_size: usize,
    pub enabled_event_types: BTreeSet<EventTypeId>,
    pub useful_only: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            k: 3.0,
            min_group_size: 10,
            enabled_event_types: EventTypeId::all().into_iter().collect(),
            useful_only: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), OutlierError> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(OutlierError::Config("k must be a positive finite number"));
        }
        if self.min_group_size < 2 {
            return Err(OutlierError::Config("min_group_size must be at least 2"));
        }
        Ok(())
    }

    fn effective_types(&self) -> BTreeSet<EventTypeId> {
        if self.useful_only {
            EventTypeId::useful_six()
                .into_iter()
                .filter(|t| self.enabled_event_types.contains(t))
                .collect()
        } else {
            self.enabled_event_types.clone()
        }
    }
}

/// Quartiles by linear interpolation at rank p*(n-1), plus fences at
/// `k` IQRs beyond Q1/Q3.
pub fn summarize(values: &[f64], k: f64) -> Result<DistributionSummary, OutlierError> {
    if values.is_empty() {
        return Err(OutlierError::EmptyValues);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(OutlierError::NonFiniteValues);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let q1 = interpolated_quantile(&sorted, 0.25);
    let median = interpolated_quantile(&sorted, 0.5);
    let q3 = interpolated_quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok(DistributionSummary {
        n: sorted.len(),
        q1,
        median,
        q3,
        iqr,
        lower_fence: q1 - k * iqr,
        upper_fence: q3 + k * iqr,
    })
}

fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Flags every observation strictly outside the fences of `summary`, which
/// must have been computed from exactly this group's values.
pub fn detect_group(
    group: &[Observation],
    summary: &DistributionSummary,
    event_type: EventTypeId,
    context: &ContextKey,
) -> Vec<UnusualEvent> {
    let mut events = Vec::new();
    for obs in group {
        let direction = if obs.value > summary.upper_fence {
            Direction::High
        } else if obs.value < summary.lower_fence {
            Direction::Low
        } else {
            continue;
        };
        events.push(UnusualEvent {
            artifact: obs.artifact.clone(),
            event_type,
            context: context.clone(),
            value: obs.value,
            summary: summary.clone(),
            direction,
        });
    }
    events
}

struct SnapshotIndex<'a> {
    commits_by_sha: HashMap<&'a str, &'a Commit>,
    issues_by_number: HashMap<u64, &'a Issue>,
    pulls_by_number: HashMap<u64, &'a PullRequest>,
}

impl<'a> SnapshotIndex<'a> {
    fn new(snapshot: &'a RepoSnapshot) -> Self {
        SnapshotIndex {
            commits_by_sha: snapshot
                .commits
                .iter()
                .map(|c| (c.sha.as_str(), c))
                .collect(),
            issues_by_number: snapshot.issues.iter().map(|i| (i.number, i)).collect(),
            pulls_by_number: snapshot.pulls.iter().map(|p| (p.number, p)).collect(),
        }
    }

    /// Labels of every issue or pull request linked to the commit.
    fn commit_labels(&self, commit: &Commit) -> BTreeSet<String> {
        let mut labels = BTreeSet::new();
        for number in &commit.linked_issue_numbers {
            if let Some(issue) = self.issues_by_number.get(number) {
                labels.extend(issue.labels.iter().cloned());
            }
        }
        for number in &commit.linked_pr_numbers {
            if let Some(pull) = self.pulls_by_number.get(number) {
                labels.extend(pull.labels.iter().cloned());
            }
        }
        labels
    }

    fn commit_keys(&self, commit: &Commit, context: ContextKind) -> Vec<ContextKey> {
        match context {
            ContextKind::Project => vec![ContextKey::Project],
            ContextKind::Label => self
                .commit_labels(commit)
                .into_iter()
                .map(ContextKey::Label)
                .collect(),
            ContextKind::MergeFlag => vec![ContextKey::MergeFlag(commit.is_merge())],
            ContextKind::Committer => vec![ContextKey::Committer(commit.committer_id.clone())],
            ContextKind::CommitterAndMerge => vec![ContextKey::CommitterAndMerge(
                commit.committer_id.clone(),
                commit.is_merge(),
            )],
            _ => unreachable!("file-level keys are derived per touch"),
        }
    }

    /// Keys of one file touch; `path_id` is the chain identity for gap
    /// metrics and the literal touched path otherwise.
    fn file_keys(
        &self,
        commit: &Commit,
        touched_path: &str,
        path_id: &str,
        context: ContextKind,
    ) -> Vec<ContextKey> {
        match context {
            ContextKind::File => vec![ContextKey::File(path_id.to_string())],
            ContextKind::FileAndMerge => vec![ContextKey::FileAndMerge(
                path_id.to_string(),
                commit.is_merge(),
            )],
            ContextKind::FileAndCommitter => vec![ContextKey::FileAndCommitter(
                path_id.to_string(),
                commit.committer_id.clone(),
            )],
            ContextKind::FileAndLabel => self
                .commit_labels(commit)
                .into_iter()
                .map(|label| ContextKey::FileAndLabel(path_id.to_string(), label))
                .collect(),
            ContextKind::Filetype => vec![ContextKey::Filetype(file_extension(touched_path))],
            _ => unreachable!("not a file-level context"),
        }
    }

    fn issue_keys(&self, issue: &Issue, context: ContextKind) -> Vec<ContextKey> {
        match context {
            ContextKind::Project => vec![ContextKey::Project],
            ContextKind::Label => issue
                .labels
                .iter()
                .cloned()
                .map(ContextKey::Label)
                .collect(),
            ContextKind::Assignee => issue
                .assignee_ids
                .iter()
                .cloned()
                .map(ContextKey::Assignee)
                .collect(),
            ContextKind::Owner => vec![ContextKey::Owner(issue.creator_id.clone())],
            _ => unreachable!("context validated against issue metrics"),
        }
    }

    fn pull_keys(&self, pull: &PullRequest, context: ContextKind) -> Vec<ContextKey> {
        match context {
            ContextKind::Project => vec![ContextKey::Project],
            ContextKind::Label => pull.labels.iter().cloned().map(ContextKey::Label).collect(),
            ContextKind::Assignee => pull
                .assignee_ids
                .iter()
                .cloned()
                .map(ContextKey::Assignee)
                .collect(),
            ContextKind::Owner => vec![ContextKey::Owner(pull.creator_id.clone())],
            ContextKind::MergeStatus => vec![ContextKey::MergeStatus(pull.is_merged())],
            _ => unreachable!("context validated against pull metrics"),
        }
    }
}

/// Splits observations into context groups. All observations must share one
/// artifact kind and metric.
///
/// Gap metrics are special: the gap between consecutive commits depends on
/// which commits belong to the group, so for `days_between_commits` the
/// groups' orderings and gaps are recomputed from the snapshot within each
/// context rather than sliced from the project-wide observations.
pub fn partition(
    observations: &[Observation],
    snapshot: &RepoSnapshot,
    context: ContextKind,
) -> Result<BTreeMap<ContextKey, Vec<Observation>>, OutlierError> {
    let Some(first) = observations.first() else {
        return Ok(BTreeMap::new());
    };
    let metric = first.metric;
    if EventTypeId::new(metric, context).is_none() {
        return Err(OutlierError::InapplicableCombination {
            artifact: metric.artifact_kind().id(),
            metric: metric.id(),
            context: context.id(),
        });
    }
    let index = SnapshotIndex::new(snapshot);

    if metric == MetricKind::Commit(CommitMetric::DaysBetweenCommits) {
        return Ok(regroup_gaps(snapshot, &index, context));
    }

    let mut groups: BTreeMap<ContextKey, Vec<Observation>> = BTreeMap::new();
    for obs in observations {
        debug_assert_eq!(obs.metric, metric, "mixed metrics in partition input");
        let keys = match metric.artifact_kind() {
            ArtifactKind::Commit => {
                let commit = index
                    .commits_by_sha
                    .get(obs.artifact.id.as_str())
                    .ok_or_else(|| OutlierError::UnknownArtifact {
                        kind: "commit",
                        id: obs.artifact.id.clone(),
                    })?;
                if context.is_file_level() {
                    let path = obs
                        .artifact
                        .path
                        .as_deref()
                        .ok_or(OutlierError::ObservationMissingPath(context.id()))?;
                    index.file_keys(commit, path, path, context)
                } else {
                    index.commit_keys(commit, context)
                }
            }
            ArtifactKind::Issue => {
                let number = obs.artifact.id.parse::<u64>().ok();
                let issue = number
                    .and_then(|n| index.issues_by_number.get(&n))
                    .ok_or_else(|| OutlierError::UnknownArtifact {
                        kind: "issue",
                        id: obs.artifact.id.clone(),
                    })?;
                index.issue_keys(issue, context)
            }
            ArtifactKind::Pull => {
                let number = obs.artifact.id.parse::<u64>().ok();
                let pull = number
                    .and_then(|n| index.pulls_by_number.get(&n))
                    .ok_or_else(|| OutlierError::UnknownArtifact {
                        kind: "pull request",
                        id: obs.artifact.id.clone(),
                    })?;
                index.pull_keys(pull, context)
            }
        };
        for key in keys {
            groups.entry(key).or_default().push(obs.clone());
        }
    }
    Ok(groups)
}

/// Recomputes `days_between_commits` within each context group's own
/// ordering. Summed over a group, the gaps telescope to the span between the
/// group's first and last commit.
fn regroup_gaps(
    snapshot: &RepoSnapshot,
    index: &SnapshotIndex<'_>,
    context: ContextKind,
) -> BTreeMap<ContextKey, Vec<Observation>> {
    let metric = MetricKind::Commit(CommitMetric::DaysBetweenCommits);
    let mut groups: BTreeMap<ContextKey, Vec<Observation>> = BTreeMap::new();

    if context.is_file_level() {
        // Elements are file touches; the chain identity keeps a renamed
        // file's history in one group.
        let touches = metrics::file_touches(snapshot);
        let mut members: BTreeMap<ContextKey, Vec<&metrics::FileTouch<'_>>> = BTreeMap::new();
        for touch in &touches {
            let keys = index.file_keys(touch.commit, &touch.change.path, &touch.chain, context);
            for key in keys {
                members.entry(key).or_default().push(touch);
            }
        }
        for (key, touches) in members {
            let mut gaps = Vec::new();
            for pair in touches.windows(2) {
                gaps.push(Observation::new(
                    ArtifactRef::commit_file(&pair[1].commit.sha, &pair[1].change.path),
                    metric,
                    fractional_days(
                        pair[0].commit.committer_timestamp,
                        pair[1].commit.committer_timestamp,
                    ),
                ));
            }
            groups.insert(key, gaps);
        }
    } else {
        let ordered = metrics::canonical_commits(snapshot);
        let mut members: BTreeMap<ContextKey, Vec<&Commit>> = BTreeMap::new();
        for commit in ordered {
            for key in index.commit_keys(commit, context) {
                members.entry(key).or_default().push(commit);
            }
        }
        for (key, commits) in members {
            let mut gaps = Vec::new();
            for pair in commits.windows(2) {
                gaps.push(Observation::new(
                    ArtifactRef::commit(&pair[1].sha),
                    metric,
                    fractional_days(pair[0].committer_timestamp, pair[1].committer_timestamp),
                ));
            }
            groups.insert(key, gaps);
        }
    }
    groups.retain(|_, group| !group.is_empty());
    groups
}

/// Runs every enabled event type over the snapshot and returns all unusual
/// events, deterministically sorted by (artifact, event type, context).
/// Groups smaller than `min_group_size` are skipped.
pub fn detect_all(
    snapshot: &RepoSnapshot,
    config: &DetectorConfig,
) -> Result<Vec<UnusualEvent>, OutlierError> {
    config.validate()?;
    let enabled = config.effective_types();

    let mut commit_by_metric: BTreeMap<MetricKind, Vec<Observation>> = BTreeMap::new();
    for obs in metrics::commit_observations(snapshot) {
        commit_by_metric.entry(obs.metric).or_default().push(obs);
    }
    let mut file_by_metric: BTreeMap<MetricKind, Vec<Observation>> = BTreeMap::new();
    for obs in metrics::per_file_observations(snapshot) {
        file_by_metric.entry(obs.metric).or_default().push(obs);
    }
    let mut issue_by_metric: BTreeMap<MetricKind, Vec<Observation>> = BTreeMap::new();
    for obs in metrics::issue_observations(snapshot) {
        issue_by_metric.entry(obs.metric).or_default().push(obs);
    }
    let mut pull_by_metric: BTreeMap<MetricKind, Vec<Observation>> = BTreeMap::new();
    for obs in metrics::pull_observations(snapshot) {
        pull_by_metric.entry(obs.metric).or_default().push(obs);
    }
    let empty: Vec<Observation> = Vec::new();

    let mut events = Vec::new();
    for event_type in EventTypeId::all() {
        if !enabled.contains(&event_type) {
            continue;
        }
        let metric = event_type.metric();
        let context = event_type.context();
        // Gap groups are rebuilt from the snapshot regardless of whether the
        // project-wide stream produced any gap at all (two single-touch files
        // can still form a two-touch filetype group).
        let groups = if metric == MetricKind::Commit(CommitMetric::DaysBetweenCommits) {
            let index = SnapshotIndex::new(snapshot);
            regroup_gaps(snapshot, &index, context)
        } else {
            let stream = match metric.artifact_kind() {
                ArtifactKind::Commit if context.is_file_level() => &file_by_metric,
                ArtifactKind::Commit => &commit_by_metric,
                ArtifactKind::Issue => &issue_by_metric,
                ArtifactKind::Pull => &pull_by_metric,
            };
            partition(stream.get(&metric).unwrap_or(&empty), snapshot, context)?
        };
        for (key, group) in groups {
            if group.len() < config.min_group_size {
                continue;
            }
            let values: Vec<f64> = group.iter().map(|o| o.value).collect();
            let summary = summarize(&values, config.k)?;
            events.extend(detect_group(&group, &summary, event_type, &key));
        }
    }
    events.sort_by_key(|e| e.sort_key());
    Ok(events)
}
