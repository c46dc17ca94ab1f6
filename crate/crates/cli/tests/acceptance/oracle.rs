//! Brute-force reference detector. Everything here is recomputed from the
//! snapshot with naive, standalone logic: its own commit ordering, rename
//! chains, context tables, and quantile code. The engine under test must
//! reproduce it exactly.

use std::collections::{BTreeMap, BTreeSet};

use unusual_events::model::{ChangeKind, Commit, RepoSnapshot, UnusualEvent};

#[derive(Debug, Clone, PartialEq)]
pub struct Flagged {
    pub type_id: String,
    pub discriminators: Vec<String>,
    pub kind: String,
    pub id: String,
    pub path: Option<String>,
    pub value: f64,
    pub high: bool,
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Flagged {
    fn sort_key(&self) -> impl Ord + '_ {
        (
            self.type_id.clone(),
            self.discriminators.clone(),
            self.kind.clone(),
            self.id.clone(),
            self.path.clone(),
            self.value.to_bits(),
            self.high,
        )
    }
}

pub fn sort(mut list: Vec<Flagged>) -> Vec<Flagged> {
    list.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    list
}

/// Converts engine output into the oracle's comparison shape.
pub fn from_events(events: &[UnusualEvent]) -> Vec<Flagged> {
    sort(
        events
            .iter()
            .map(|e| Flagged {
                type_id: e.event_type.to_string(),
                discriminators: e.context.discriminators(),
                kind: e.artifact.kind.id().to_string(),
                id: e.artifact.id.clone(),
                path: e.artifact.path.clone(),
                value: e.value,
                high: e.direction == unusual_events::model::Direction::High,
                n: e.summary.n,
                q1: e.summary.q1,
                median: e.summary.median,
                q3: e.summary.q3,
                iqr: e.summary.iqr,
                lower: e.summary.lower_fence,
                upper: e.summary.upper_fence,
            })
            .collect(),
    )
}

const COMMIT_METRICS: [&str; 12] = [
    "days_between_commits",
    "loc_added",
    "loc_deleted",
    "loc_modified",
    "message_length",
    "comment_count",
    "files_added",
    "files_changed",
    "files_deleted",
    "files_modified",
    "files_renamed",
    "pull_request_count",
];
const COMMIT_MAIN_CONTEXTS: [&str; 4] = ["project", "label", "merge_flag", "committer"];
const FILE_METRICS: [&str; 4] = [
    "days_between_commits",
    "loc_added",
    "loc_deleted",
    "loc_modified",
];
const COMMIT_EXTRA_CONTEXTS: [&str; 6] = [
    "committer_and_merge",
    "file",
    "file_and_merge",
    "file_and_committer",
    "file_and_label",
    "filetype",
];
const ISSUE_METRICS: [&str; 6] = [
    "body_length",
    "days_open_to_closed",
    "comment_count",
    "label_count",
    "default_branch_commit_count",
    "title_length",
];
const ISSUE_CONTEXTS: [&str; 4] = ["project", "label", "assignee", "owner"];
const PULL_METRICS: [&str; 11] = [
    "body_length",
    "days_open_to_closed",
    "days_open_to_merged",
    "changed_files",
    "review_comment_count",
    "comment_count",
    "label_count",
    "loc_added",
    "loc_deleted",
    "default_branch_commit_count",
    "title_length",
];
const PULL_CONTEXTS: [&str; 5] = ["project", "label", "assignee", "owner", "merge_status"];

struct Entry {
    id: String,
    path: Option<String>,
    value: f64,
}

type Groups = BTreeMap<Vec<String>, Vec<Entry>>;

pub fn detect(snapshot: &RepoSnapshot, k: f64, min_group: usize) -> Vec<Flagged> {
    let mut out = Vec::new();

    for metric in COMMIT_METRICS {
        for context in COMMIT_MAIN_CONTEXTS {
            let groups = commit_level_groups(snapshot, metric, context);
            flag(&groups, &format!("commit/{metric}/{context}"), "commit", k, min_group, &mut out);
        }
    }
    for metric in FILE_METRICS {
        for context in COMMIT_EXTRA_CONTEXTS {
            let groups = if context == "committer_and_merge" {
                commit_level_groups(snapshot, metric, context)
            } else {
                file_level_groups(snapshot, metric, context)
            };
            flag(&groups, &format!("commit/{metric}/{context}"), "commit", k, min_group, &mut out);
        }
    }
    for metric in ISSUE_METRICS {
        for context in ISSUE_CONTEXTS {
            let groups = issue_groups(snapshot, metric, context);
            flag(&groups, &format!("issue/{metric}/{context}"), "issue", k, min_group, &mut out);
        }
    }
    let reachable = closure_from_head(snapshot);
    for metric in PULL_METRICS {
        for context in PULL_CONTEXTS {
            let groups = pull_groups(snapshot, metric, context, &reachable);
            flag(&groups, &format!("pull/{metric}/{context}"), "pull", k, min_group, &mut out);
        }
    }
    sort(out)
}

fn flag(
    groups: &Groups,
    type_id: &str,
    kind: &str,
    k: f64,
    min_group: usize,
    out: &mut Vec<Flagged>,
) {
    for (discriminators, entries) in groups {
        if entries.len() < min_group {
            continue;
        }
        let mut values: Vec<f64> = entries.iter().map(|e| e.value).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile(&values, 0.25);
        let median = quantile(&values, 0.5);
        let q3 = quantile(&values, 0.75);
        let iqr = q3 - q1;
        let lower = q1 - k * iqr;
        let upper = q3 + k * iqr;
        for entry in entries {
            let high = if entry.value > upper {
                true
            } else if entry.value < lower {
                false
            } else {
                continue;
            };
            out.push(Flagged {
                type_id: type_id.to_string(),
                discriminators: discriminators.clone(),
                kind: kind.to_string(),
                id: entry.id.clone(),
                path: entry.path.clone(),
                value: entry.value,
                high,
                n: values.len(),
                q1,
                median,
                q3,
                iqr,
                lower,
                upper,
            });
        }
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let rank = p * (sorted.len() - 1) as f64;
    let below = rank.floor() as usize;
    let above = rank.ceil() as usize;
    sorted[below] + (rank - below as f64) * (sorted[above] - sorted[below])
}

fn day_gap(earlier: &Commit, later: &Commit) -> f64 {
    (later.committer_timestamp - earlier.committer_timestamp).num_seconds() as f64 / 86_400.0
}

fn ordered_commits(snapshot: &RepoSnapshot) -> Vec<&Commit> {
    let mut list: Vec<&Commit> = snapshot.commits.iter().collect();
    list.sort_by(|a, b| {
        (a.committer_timestamp, a.sha.as_str()).cmp(&(b.committer_timestamp, b.sha.as_str()))
    });
    list
}

fn merge_word(commit: &Commit) -> String {
    if commit.parent_shas.len() >= 2 {
        "merge".to_string()
    } else {
        "non-merge".to_string()
    }
}

fn labels_of_commit(commit: &Commit, snapshot: &RepoSnapshot) -> Vec<String> {
    let mut labels = BTreeSet::new();
    for issue in &snapshot.issues {
        if commit.linked_issue_numbers.contains(&issue.number) {
            labels.extend(issue.labels.iter().cloned());
        }
    }
    for pull in &snapshot.pulls {
        if commit.linked_pr_numbers.contains(&pull.number) {
            labels.extend(pull.labels.iter().cloned());
        }
    }
    labels.into_iter().collect()
}

fn commit_context_keys(
    commit: &Commit,
    context: &str,
    snapshot: &RepoSnapshot,
) -> Vec<Vec<String>> {
    match context {
        "project" => vec![vec![]],
        "label" => labels_of_commit(commit, snapshot)
            .into_iter()
            .map(|l| vec![l])
            .collect(),
        "merge_flag" => vec![vec![merge_word(commit)]],
        "committer" => vec![vec![commit.committer_id.clone()]],
        "committer_and_merge" => vec![vec![commit.committer_id.clone(), merge_word(commit)]],
        other => panic!("not a commit-level context: {other}"),
    }
}

fn pair_split(added: u64, deleted: u64) -> (f64, f64, f64) {
    let modified = added.min(deleted);
    (
        (added - modified) as f64,
        (deleted - modified) as f64,
        modified as f64,
    )
}

fn commit_metric_value(commit: &Commit, metric: &str) -> f64 {
    match metric {
        "loc_added" | "loc_deleted" | "loc_modified" => {
            let mut totals = (0.0, 0.0, 0.0);
            for change in &commit.file_changes {
                let (a, d, m) = pair_split(change.lines_added, change.lines_deleted);
                totals = (totals.0 + a, totals.1 + d, totals.2 + m);
            }
            match metric {
                "loc_added" => totals.0,
                "loc_deleted" => totals.1,
                _ => totals.2,
            }
        }
        "message_length" => commit.message.chars().count() as f64,
        "comment_count" => commit.comment_count as f64,
        "files_added" => count_kind(commit, ChangeKind::Added),
        "files_changed" => commit.file_changes.len() as f64,
        "files_deleted" => count_kind(commit, ChangeKind::Deleted),
        "files_modified" => count_kind(commit, ChangeKind::Modified),
        "files_renamed" => count_kind(commit, ChangeKind::Renamed),
        "pull_request_count" => commit.linked_pr_numbers.len() as f64,
        other => panic!("not a per-commit value metric: {other}"),
    }
}

fn count_kind(commit: &Commit, kind: ChangeKind) -> f64 {
    commit
        .file_changes
        .iter()
        .filter(|f| f.change_kind == kind)
        .count() as f64
}

fn commit_level_groups(snapshot: &RepoSnapshot, metric: &str, context: &str) -> Groups {
    let mut groups: Groups = BTreeMap::new();
    if metric == "days_between_commits" {
        let mut sequences: BTreeMap<Vec<String>, Vec<&Commit>> = BTreeMap::new();
        for commit in ordered_commits(snapshot) {
            for key in commit_context_keys(commit, context, snapshot) {
                sequences.entry(key).or_default().push(commit);
            }
        }
        for (key, sequence) in sequences {
            let gaps: Vec<Entry> = sequence
                .windows(2)
                .map(|pair| Entry {
                    id: pair[1].sha.clone(),
                    path: None,
                    value: day_gap(pair[0], pair[1]),
                })
                .collect();
            if !gaps.is_empty() {
                groups.insert(key, gaps);
            }
        }
    } else {
        for commit in &snapshot.commits {
            let value = commit_metric_value(commit, metric);
            for key in commit_context_keys(commit, context, snapshot) {
                groups.entry(key).or_default().push(Entry {
                    id: commit.sha.clone(),
                    path: None,
                    value,
                });
            }
        }
    }
    groups
}

struct Touch<'a> {
    commit: &'a Commit,
    path: String,
    chain: String,
    added: u64,
    deleted: u64,
}

fn touches(snapshot: &RepoSnapshot) -> Vec<Touch<'_>> {
    let mut alive: BTreeMap<String, String> = BTreeMap::new();
    let mut list = Vec::new();
    for commit in ordered_commits(snapshot) {
        for change in &commit.file_changes {
            let chain = if change.change_kind == ChangeKind::Renamed {
                let previous = change.previous_path.clone().unwrap_or(change.path.clone());
                let root = alive.remove(&previous).unwrap_or(previous);
                alive.insert(change.path.clone(), root.clone());
                root
            } else if let Some(root) = alive.get(&change.path) {
                root.clone()
            } else {
                alive.insert(change.path.clone(), change.path.clone());
                change.path.clone()
            };
            list.push(Touch {
                commit,
                path: change.path.clone(),
                chain,
                added: change.lines_added,
                deleted: change.lines_deleted,
            });
        }
    }
    list
}

fn extension(path: &str) -> String {
    let filename = path.rsplit('/').next().unwrap_or(path);
    match filename.rfind('.') {
        Some(at) if at + 1 < filename.len() => filename[at + 1..].to_lowercase(),
        _ => "<none>".to_string(),
    }
}

fn touch_keys(
    touch: &Touch<'_>,
    path_dim: &str,
    context: &str,
    snapshot: &RepoSnapshot,
) -> Vec<Vec<String>> {
    match context {
        "file" => vec![vec![path_dim.to_string()]],
        "file_and_merge" => vec![vec![path_dim.to_string(), merge_word(touch.commit)]],
        "file_and_committer" => vec![vec![
            path_dim.to_string(),
            touch.commit.committer_id.clone(),
        ]],
        "file_and_label" => labels_of_commit(touch.commit, snapshot)
            .into_iter()
            .map(|l| vec![path_dim.to_string(), l])
            .collect(),
        "filetype" => vec![vec![extension(&touch.path)]],
        other => panic!("not a file-level context: {other}"),
    }
}

fn file_level_groups(snapshot: &RepoSnapshot, metric: &str, context: &str) -> Groups {
    let all = touches(snapshot);
    let mut groups: Groups = BTreeMap::new();
    if metric == "days_between_commits" {
        // chains keep a renamed file's identity for the gap metric
        let mut sequences: BTreeMap<Vec<String>, Vec<&Touch<'_>>> = BTreeMap::new();
        for touch in &all {
            for key in touch_keys(touch, &touch.chain, context, snapshot) {
                sequences.entry(key).or_default().push(touch);
            }
        }
        for (key, sequence) in sequences {
            let gaps: Vec<Entry> = sequence
                .windows(2)
                .map(|pair| Entry {
                    id: pair[1].commit.sha.clone(),
                    path: Some(pair[1].path.clone()),
                    value: day_gap(pair[0].commit, pair[1].commit),
                })
                .collect();
            if !gaps.is_empty() {
                groups.insert(key, gaps);
            }
        }
    } else {
        for touch in &all {
            let (a, d, m) = pair_split(touch.added, touch.deleted);
            let value = match metric {
                "loc_added" => a,
                "loc_deleted" => d,
                "loc_modified" => m,
                other => panic!("not a per-file value metric: {other}"),
            };
            for key in touch_keys(touch, &touch.path, context, snapshot) {
                groups.entry(key).or_default().push(Entry {
                    id: touch.commit.sha.clone(),
                    path: Some(touch.path.clone()),
                    value,
                });
            }
        }
    }
    groups
}

fn issue_groups(snapshot: &RepoSnapshot, metric: &str, context: &str) -> Groups {
    let mut groups: Groups = BTreeMap::new();
    for issue in &snapshot.issues {
        let value = match metric {
            "body_length" => issue.body.chars().count() as f64,
            "days_open_to_closed" => match issue.closed_at {
                Some(closed) => (closed - issue.created_at).num_seconds() as f64 / 86_400.0,
                None => continue,
            },
            "comment_count" => issue.comment_count as f64,
            "label_count" => issue.labels.len() as f64,
            "default_branch_commit_count" => {
                issue.linked_default_branch_commit_shas.len() as f64
            }
            "title_length" => issue.title.chars().count() as f64,
            other => panic!("not an issue metric: {other}"),
        };
        let keys: Vec<Vec<String>> = match context {
            "project" => vec![vec![]],
            "label" => issue.labels.iter().map(|l| vec![l.clone()]).collect(),
            "assignee" => issue.assignee_ids.iter().map(|a| vec![a.clone()]).collect(),
            "owner" => vec![vec![issue.creator_id.clone()]],
            other => panic!("not an issue context: {other}"),
        };
        for key in keys {
            groups.entry(key).or_default().push(Entry {
                id: issue.number.to_string(),
                path: None,
                value,
            });
        }
    }
    groups
}

pub fn closure_from_head(snapshot: &RepoSnapshot) -> BTreeSet<String> {
    let known: BTreeSet<&str> = snapshot.commits.iter().map(|c| c.sha.as_str()).collect();
    let mut reachable = BTreeSet::new();
    let mut frontier: Vec<String> = snapshot
        .commits
        .first()
        .map(|head| vec![head.sha.clone()])
        .unwrap_or_default();
    while let Some(sha) = frontier.pop() {
        if !known.contains(sha.as_str()) || !reachable.insert(sha.clone()) {
            continue;
        }
        let commit = snapshot.commits.iter().find(|c| c.sha == sha).unwrap();
        for parent in &commit.parent_shas {
            frontier.push(parent.clone());
        }
    }
    reachable
}

fn pull_groups(
    snapshot: &RepoSnapshot,
    metric: &str,
    context: &str,
    reachable: &BTreeSet<String>,
) -> Groups {
    let mut groups: Groups = BTreeMap::new();
    for pull in &snapshot.pulls {
        let value = match metric {
            "body_length" => pull.body.chars().count() as f64,
            "days_open_to_closed" => match pull.closed_at {
                Some(closed) => (closed - pull.created_at).num_seconds() as f64 / 86_400.0,
                None => continue,
            },
            "days_open_to_merged" => match pull.merged_at {
                Some(merged) => (merged - pull.created_at).num_seconds() as f64 / 86_400.0,
                None => continue,
            },
            "changed_files" => pull.changed_files as f64,
            "review_comment_count" => pull.review_comment_count as f64,
            "comment_count" => pull.comment_count as f64,
            "label_count" => pull.labels.len() as f64,
            "loc_added" => pull.lines_added as f64,
            "loc_deleted" => pull.lines_deleted as f64,
            "default_branch_commit_count" => pull
                .commit_shas
                .iter()
                .filter(|sha| reachable.contains(*sha))
                .count() as f64,
            "title_length" => pull.title.chars().count() as f64,
            other => panic!("not a pull metric: {other}"),
        };
        let keys: Vec<Vec<String>> = match context {
            "project" => vec![vec![]],
            "label" => pull.labels.iter().map(|l| vec![l.clone()]).collect(),
            "assignee" => pull.assignee_ids.iter().map(|a| vec![a.clone()]).collect(),
            "owner" => vec![vec![pull.creator_id.clone()]],
            "merge_status" => vec![vec![if pull.merged_at.is_some() {
                "merged".to_string()
            } else {
                "unmerged".to_string()
            }]],
            other => panic!("not a pull context: {other}"),
        };
        for key in keys {
            groups.entry(key).or_default().push(Entry {
                id: pull.number.to_string(),
                path: None,
                value,
            });
        }
    }
    groups
}
