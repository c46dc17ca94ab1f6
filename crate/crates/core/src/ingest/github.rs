//! GitHub REST v3 fetching. Listing endpoints are paginated to exhaustion;
//! per-commit and per-pull detail requests run on a small worker pool. Rate
//! limits are honored by waiting, never by dropping pages. A failure after
//! data has been fetched saves the partial state and reports a resumable
//! error instead of a snapshot.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use chrono::{DateTime, SecondsFormat, Utc};
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{save_snapshot, IngestConfig, IngestError};
use crate::model::{ChangeKind, Commit, FileChange, Issue, PullRequest, RepoSnapshot};

const MAX_ATTEMPTS: u32 = 6;
const MAX_WAIT_SECS: u64 = 900;

/// Fetches one repository into a [`RepoSnapshot`]. The commit list is taken
/// from the default branch head, so the first commit of the snapshot is the
/// head itself.
pub fn fetch_repository(
    owner: &str,
    name: &str,
    config: &IngestConfig,
) -> Result<RepoSnapshot, IngestError> {
    config.validate()?;
    let fetcher = Fetcher::new(config)?;

    let repo: RepoInfo = match fetcher.get_json(&format!("repos/{owner}/{name}"), Vec::new()) {
        Ok(repo) => repo,
        Err(IngestError::Api { status: 404, .. }) => {
            return Err(IngestError::RepositoryNotFound {
                owner: owner.to_string(),
                name: name.to_string(),
            })
        }
        Err(err) => return Err(err),
    };
    let fetched_at = now_seconds();

    let mut commit_params = vec![("sha".to_string(), repo.default_branch.clone())];
    if let Some(since) = config.since {
        commit_params.push((
            "since".to_string(),
            since.to_rfc3339_opts(SecondsFormat::Secs, true),
        ));
    }
    let listed: Vec<CommitListItem> =
        fetcher.get_paged(&format!("repos/{owner}/{name}/commits"), commit_params)?;

    let mut snapshot = RepoSnapshot {
        owner: owner.to_string(),
        name: name.to_string(),
        default_branch: repo.default_branch.clone(),
        fetched_at,
        commits: Vec::new(),
        issues: Vec::new(),
        pulls: Vec::new(),
    };

    let shas: Vec<String> = listed.into_iter().map(|item| item.sha).collect();
    let commit_jobs = parallel_map(shas, config.max_parallel_requests, |sha| {
        let detail: CommitDetail =
            fetcher.get_json(&format!("repos/{owner}/{name}/commits/{sha}"), Vec::new())?;
        map_commit(detail)
    });
    match commit_jobs {
        Ok(commits) => snapshot.commits = commits,
        Err(failure) => {
            snapshot.commits = failure.completed;
            return Err(partial_error(config, owner, name, snapshot, failure.error));
        }
    }

    let mut issue_params = vec![("state".to_string(), "all".to_string())];
    if let Some(since) = config.since {
        issue_params.push((
            "since".to_string(),
            since.to_rfc3339_opts(SecondsFormat::Secs, true),
        ));
    }
    let issues: Result<Vec<IssueItem>, IngestError> =
        fetcher.get_paged(&format!("repos/{owner}/{name}/issues"), issue_params);
    match issues {
        Ok(items) => {
            snapshot.issues = items
                .into_iter()
                .filter(|item| item.pull_request.is_none())
                .map(map_issue)
                .collect();
        }
        Err(error) => return Err(partial_error(config, owner, name, snapshot, error)),
    }

    let pull_list: Result<Vec<PullListItem>, IngestError> = fetcher.get_paged(
        &format!("repos/{owner}/{name}/pulls"),
        vec![("state".to_string(), "all".to_string())],
    );
    let numbers: Vec<u64> = match pull_list {
        Ok(items) => items.into_iter().map(|item| item.number).collect(),
        Err(error) => return Err(partial_error(config, owner, name, snapshot, error)),
    };
    let pull_jobs = parallel_map(numbers, config.max_parallel_requests, |number| {
        let detail: PullDetail = fetcher.get_json(
            &format!("repos/{owner}/{name}/pulls/{number}"),
            Vec::new(),
        )?;
        let commits: Vec<PullCommit> = fetcher.get_paged(
            &format!("repos/{owner}/{name}/pulls/{number}/commits"),
            Vec::new(),
        )?;
        Ok(map_pull(detail, commits))
    });
    match pull_jobs {
        Ok(pulls) => snapshot.pulls = pulls,
        Err(failure) => {
            snapshot.pulls = failure.completed;
            return Err(partial_error(config, owner, name, snapshot, failure.error));
        }
    }

    snapshot.validate()?;
    Ok(snapshot)
}

fn now_seconds() -> DateTime<Utc> {
    let now = Utc::now();
    now - chrono::Duration::nanoseconds(now.timestamp_subsec_nanos() as i64)
}

fn partial_error(
    config: &IngestConfig,
    owner: &str,
    name: &str,
    snapshot: RepoSnapshot,
    source: IngestError,
) -> IngestError {
    let path = config.partial_path(owner, name);
    if std::fs::create_dir_all(&config.cache_dir).is_err() {
        return source;
    }
    match save_snapshot(&snapshot, &path) {
        Ok(()) => IngestError::Partial {
            cache_state: path,
            source: Box::new(source),
        },
        Err(_) => source,
    }
}

// ---------------------------------------------------------------------------
// HTTP plumbing
// ---------------------------------------------------------------------------

struct Fetcher {
    client: Client,
    base: String,
    token: Option<String>,
    page_size: usize,
}

impl Fetcher {
    fn new(config: &IngestConfig) -> Result<Self, IngestError> {
        let client = Client::builder()
            .user_agent("unusual-events")
            .build()
            .map_err(|e| IngestError::Network(e.to_string()))?;
        Ok(Fetcher {
            client,
            base: config.api_base.trim_end_matches('/').to_string(),
            token: config.auth_token.clone(),
            page_size: config.page_size,
        })
    }

    fn get(&self, path: &str, params: &[(String, String)]) -> Result<Response, IngestError> {
        let url = format!("{}/{}", self.base, path);
        for attempt in 0..MAX_ATTEMPTS {
            let mut request = self
                .client
                .get(&url)
                .header("Accept", "application/vnd.github+json");
            if !params.is_empty() {
                request = request.query(params);
            }
            if let Some(token) = &self.token {
                request = request.bearer_auth(token);
            }
            let response = request
                .send()
                .map_err(|e| IngestError::Network(e.to_string()))?;
            let status = response.status();
            if status == StatusCode::UNAUTHORIZED {
                return Err(IngestError::Auth);
            }
            if status == StatusCode::FORBIDDEN || status == StatusCode::TOO_MANY_REQUESTS {
                match rate_limit_wait(&response) {
                    Some(wait) if attempt + 1 < MAX_ATTEMPTS => {
                        thread::sleep(wait);
                        continue;
                    }
                    Some(_) => {
                        return Err(IngestError::Network(format!(
                            "rate limit retries exhausted for {url}"
                        )))
                    }
                    // A 403 without rate-limit signals is a credential problem.
                    None => return Err(IngestError::Auth),
                }
            }
            if !status.is_success() {
                return Err(IngestError::Api {
                    status: status.as_u16(),
                    url,
                });
            }
            return Ok(response);
        }
        Err(IngestError::Network(format!("retries exhausted for {url}")))
    }

    fn get_json<T: DeserializeOwned>(
        &self,
        path: &str,
        params: Vec<(String, String)>,
    ) -> Result<T, IngestError> {
        let url = format!("{}/{}", self.base, path);
        let response = self.get(path, &params)?;
        response.json().map_err(|e| IngestError::Payload {
            url,
            message: e.to_string(),
        })
    }

    /// Follows `page=1,2,...` until a short or empty page.
    fn get_paged<T: DeserializeOwned>(
        &self,
        path: &str,
        params: Vec<(String, String)>,
    ) -> Result<Vec<T>, IngestError> {
        let mut all = Vec::new();
        let mut page = 1usize;
        loop {
            let mut page_params = params.clone();
            page_params.push(("per_page".to_string(), self.page_size.to_string()));
            page_params.push(("page".to_string(), page.to_string()));
            let batch: Vec<T> = self.get_json(path, page_params)?;
            let len = batch.len();
            all.extend(batch);
            if len < self.page_size {
                return Ok(all);
            }
            page += 1;
        }
    }
}

fn rate_limit_wait(response: &Response) -> Option<Duration> {
    let headers = response.headers();
    if let Some(retry) = headers.get("Retry-After") {
        if let Ok(secs) = retry.to_str().unwrap_or_default().parse::<u64>() {
            return Some(Duration::from_secs(secs.min(MAX_WAIT_SECS)));
        }
    }
    let remaining = headers
        .get("X-RateLimit-Remaining")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok());
    if remaining == Some(0) {
        let reset = headers
            .get("X-RateLimit-Reset")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse::<u64>().ok())
            .unwrap_or(0);
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs();
        let wait = reset.saturating_sub(now).clamp(1, MAX_WAIT_SECS);
        return Some(Duration::from_secs(wait));
    }
    None
}

struct PartialFailure<T> {
    completed: Vec<T>,
    error: IngestError,
}

/// Runs `work` over `items` on up to `workers` threads, preserving input
/// order among completed results. The first error stops the pool.
fn parallel_map<I, T, F>(items: Vec<I>, workers: usize, work: F) -> Result<Vec<T>, PartialFailure<T>>
where
    I: Send,
    T: Send,
    F: Fn(I) -> Result<T, IngestError> + Sync,
{
    let total = items.len();
    let queue: Mutex<VecDeque<(usize, I)>> = Mutex::new(items.into_iter().enumerate().collect());
    let results: Mutex<Vec<Option<T>>> =
        Mutex::new((0..total).map(|_| None).collect::<Vec<_>>());
    let error: Mutex<Option<IngestError>> = Mutex::new(None);

    thread::scope(|scope| {
        for _ in 0..workers.clamp(1, total.max(1)) {
            scope.spawn(|| loop {
                if error.lock().unwrap().is_some() {
                    break;
                }
                let job = queue.lock().unwrap().pop_front();
                let Some((index, item)) = job else { break };
                match work(item) {
                    Ok(value) => results.lock().unwrap()[index] = Some(value),
                    Err(e) => {
                        let mut slot = error.lock().unwrap();
                        if slot.is_none() {
                            *slot = Some(e);
                        }
                        break;
                    }
                }
            });
        }
    });

    let results = results.into_inner().unwrap();
    match error.into_inner().unwrap() {
        None => Ok(results.into_iter().map(|r| r.expect("completed")).collect()),
        Some(error) => Err(PartialFailure {
            completed: results.into_iter().flatten().collect(),
            error,
        }),
    }
}

// ---------------------------------------------------------------------------
// Wire formats
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct RepoInfo {
    default_branch: String,
}

#[derive(Deserialize)]
struct CommitListItem {
    sha: String,
}

#[derive(Deserialize)]
struct CommitDetail {
    sha: String,
    #[serde(default)]
    parents: Vec<ParentRef>,
    commit: CommitMeta,
    author: Option<Actor>,
    committer: Option<Actor>,
    #[serde(default)]
    files: Option<Vec<FileEntry>>,
}

#[derive(Deserialize)]
struct ParentRef {
    sha: String,
}

#[derive(Deserialize)]
struct CommitMeta {
    author: Option<GitActor>,
    committer: Option<GitActor>,
    #[serde(default)]
    message: String,
    #[serde(default)]
    comment_count: u64,
}

#[derive(Deserialize)]
struct GitActor {
    name: Option<String>,
    date: Option<DateTime<Utc>>,
}

#[derive(Deserialize)]
struct Actor {
    login: String,
}

#[derive(Deserialize)]
struct FileEntry {
    filename: String,
    status: String,
    #[serde(default)]
    additions: u64,
    #[serde(default)]
    deletions: u64,
    previous_filename: Option<String>,
}

#[derive(Deserialize)]
struct Label {
    name: String,
}

#[derive(Deserialize)]
struct IssueItem {
    number: u64,
    #[serde(default)]
    title: String,
    body: Option<String>,
    user: Option<Actor>,
    #[serde(default)]
    assignees: Vec<Actor>,
    #[serde(default)]
    labels: Vec<Label>,
    created_at: DateTime<Utc>,
    closed_at: Option<DateTime<Utc>>,
    #[serde(default)]
    comments: u64,
    pull_request: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct PullListItem {
    number: u64,
}

#[derive(Deserialize)]
struct PullDetail {
    number: u64,
    #[serde(default)]
    title: String,
    body: Option<String>,
    user: Option<Actor>,
    #[serde(default)]
    assignees: Vec<Actor>,
    #[serde(default)]
    labels: Vec<Label>,
    created_at: DateTime<Utc>,
    closed_at: Option<DateTime<Utc>>,
    merged_at: Option<DateTime<Utc>>,
    #[serde(default)]
    comments: u64,
    #[serde(default)]
    review_comments: u64,
    #[serde(default)]
    changed_files: u64,
    #[serde(default)]
    additions: u64,
    #[serde(default)]
    deletions: u64,
}

#[derive(Deserialize)]
struct PullCommit {
    sha: String,
}

fn map_commit(detail: CommitDetail) -> Result<Commit, IngestError> {
    let timestamp = detail
        .commit
        .committer
        .as_ref()
        .and_then(|c| c.date)
        .or_else(|| detail.commit.author.as_ref().and_then(|a| a.date))
        .ok_or_else(|| IngestError::Payload {
            url: format!("commit {}", detail.sha),
            message: "missing committer date".to_string(),
        })?;
    let timestamp = timestamp - chrono::Duration::nanoseconds(timestamp.timestamp_subsec_nanos() as i64);
    let author_id = detail
        .author
        .map(|a| a.login)
        .or_else(|| detail.commit.author.and_then(|a| a.name))
        .unwrap_or_else(|| "unknown".to_string());
    let committer_id = detail
        .committer
        .map(|c| c.login)
        .or_else(|| detail.commit.committer.and_then(|c| c.name))
        .unwrap_or_else(|| "unknown".to_string());
    Ok(Commit {
        sha: detail.sha,
        parent_shas: detail.parents.into_iter().map(|p| p.sha).collect(),
        author_id,
        committer_id,
        committer_timestamp: timestamp,
        message: detail.commit.message,
        file_changes: detail
            .files
            .unwrap_or_default()
            .into_iter()
            .map(map_file)
            .collect(),
        comment_count: detail.commit.comment_count,
        linked_issue_numbers: BTreeSet::new(),
        linked_pr_numbers: BTreeSet::new(),
    })
}

fn map_file(entry: FileEntry) -> FileChange {
    let change_kind = match entry.status.as_str() {
        "added" | "copied" => ChangeKind::Added,
        "removed" => ChangeKind::Deleted,
        "renamed" if entry.previous_filename.is_some() => ChangeKind::Renamed,
        _ => ChangeKind::Modified,
    };
    let (lines_added, lines_deleted) = match change_kind {
        ChangeKind::Added => (entry.additions, 0),
        ChangeKind::Deleted => (0, entry.deletions),
        _ => (entry.additions, entry.deletions),
    };
    FileChange {
        path: entry.filename,
        change_kind,
        lines_added,
        lines_deleted,
        previous_path: match change_kind {
            ChangeKind::Renamed => entry.previous_filename,
            _ => None,
        },
    }
}

fn truncate_opt(ts: Option<DateTime<Utc>>) -> Option<DateTime<Utc>> {
    ts.map(|t| t - chrono::Duration::nanoseconds(t.timestamp_subsec_nanos() as i64))
}

fn map_issue(item: IssueItem) -> Issue {
    let created = item.created_at;
    Issue {
        number: item.number,
        title: item.title,
        body: item.body.unwrap_or_default(),
        creator_id: item
            .user
            .map(|u| u.login)
            .unwrap_or_else(|| "unknown".to_string()),
        assignee_ids: item.assignees.into_iter().map(|a| a.login).collect(),
        labels: item.labels.into_iter().map(|l| l.name).collect(),
        created_at: created - chrono::Duration::nanoseconds(created.timestamp_subsec_nanos() as i64),
        closed_at: truncate_opt(item.closed_at),
        comment_count: item.comments,
        linked_default_branch_commit_shas: BTreeSet::new(),
    }
}

fn map_pull(detail: PullDetail, commits: Vec<PullCommit>) -> PullRequest {
    let created = detail.created_at;
    PullRequest {
        number: detail.number,
        title: detail.title,
        body: detail.body.unwrap_or_default(),
        creator_id: detail
            .user
            .map(|u| u.login)
            .unwrap_or_else(|| "unknown".to_string()),
        assignee_ids: detail.assignees.into_iter().map(|a| a.login).collect(),
        labels: detail.labels.into_iter().map(|l| l.name).collect(),
        created_at: created - chrono::Duration::nanoseconds(created.timestamp_subsec_nanos() as i64),
        closed_at: truncate_opt(detail.closed_at),
        merged_at: truncate_opt(detail.merged_at),
        comment_count: detail.comments,
        review_comment_count: detail.review_comments,
        changed_files: detail.changed_files,
        lines_added: detail.additions,
        lines_deleted: detail.deletions,
        commit_shas: commits.into_iter().map(|c| c.sha).collect(),
    }
}
