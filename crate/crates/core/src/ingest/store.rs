//! Line-delimited snapshot persistence. First line is a schema header, then
//! one JSON record per artifact with a `kind` discriminator.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::model::{ts, Commit, Issue, PullRequest, RepoSnapshot};

pub const SCHEMA_VERSION: &str = "unusual-events/1";

#[derive(Serialize, Deserialize)]
struct SchemaHeader {
    schema: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Meta(Meta),
    Commit(Commit),
    Issue(Issue),
    Pull(PullRequest),
}

#[derive(Serialize, Deserialize)]
struct Meta {
    owner: String,
    name: String,
    default_branch: String,
    #[serde(with = "ts")]
    fetched_at: DateTime<Utc>,
}

/// Writes a snapshot as JSONL: header, meta, commits, issues, pulls.
pub fn save_snapshot(snapshot: &RepoSnapshot, path: &Path) -> Result<(), StoreError> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    let header = SchemaHeader {
        schema: SCHEMA_VERSION.to_string(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header"))?;
    let meta = Record::Meta(Meta {
        owner: snapshot.owner.clone(),
        name: snapshot.name.clone(),
        default_branch: snapshot.default_branch.clone(),
        fetched_at: snapshot.fetched_at,
    });
    write_record(&mut out, &meta)?;
    for commit in &snapshot.commits {
        write_record(&mut out, &Record::Commit(commit.clone()))?;
    }
    for issue in &snapshot.issues {
        write_record(&mut out, &Record::Issue(issue.clone()))?;
    }
    for pull in &snapshot.pulls {
        write_record(&mut out, &Record::Pull(pull.clone()))?;
    }
    out.flush()?;
    Ok(())
}

fn write_record(out: &mut impl Write, record: &Record) -> Result<(), StoreError> {
    let line = serde_json::to_string(record).expect("record serialization");
    writeln!(out, "{line}")?;
    Ok(())
}

/// Reads a snapshot back. Parse failures name the offending line;
/// a schema mismatch is reported as a version error.
pub fn load_snapshot(path: &Path) -> Result<RepoSnapshot, StoreError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header_line = lines.next().ok_or(StoreError::MissingHeader)??;
    let header: SchemaHeader =
        serde_json::from_str(&header_line).map_err(|source| StoreError::Parse { line: 1, source })?;
    if header.schema != SCHEMA_VERSION {
        return Err(StoreError::Version {
            found: header.schema,
        });
    }

    let mut meta: Option<Meta> = None;
    let mut commits = Vec::new();
    let mut issues = Vec::new();
    let mut pulls = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 2;
        let record: Record = serde_json::from_str(&line)
            .map_err(|source| StoreError::Parse { line: line_no, source })?;
        match record {
            Record::Meta(m) => meta = Some(m),
            Record::Commit(c) => commits.push(c),
            Record::Issue(i) => issues.push(i),
            Record::Pull(p) => pulls.push(p),
        }
    }
    let meta = meta.ok_or(StoreError::MissingMeta)?;
    let snapshot = RepoSnapshot {
        owner: meta.owner,
        name: meta.name,
        default_branch: meta.default_branch,
        fetched_at: meta.fetched_at,
        commits,
        issues,
        pulls,
    };
    snapshot.validate()?;
    Ok(snapshot)
}
