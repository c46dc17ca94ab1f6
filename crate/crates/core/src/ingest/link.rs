//! Cross-references commits with issues and pull requests.
//!
//! Commits link to issues through `#N` tokens in the commit message and to
//! pull requests through both `#N` tokens and PR commit listings. Issues get
//! the set of default-branch commits that reference them.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::model::RepoSnapshot;

/// Extracts `#N` issue/PR references from a message. A token counts when the
/// `#` is not preceded by a word character and the digits are not followed by
/// one, mirroring GitHub's cross-reference convention.
pub fn issue_refs(message: &str) -> BTreeSet<u64> {
    let bytes = message.as_bytes();
    let mut refs = BTreeSet::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'#' {
            i += 1;
            continue;
        }
        let boundary_before = i == 0 || !is_word_byte(bytes[i - 1]);
        let digits_start = i + 1;
        let mut digits_end = digits_start;
        while digits_end < bytes.len() && bytes[digits_end].is_ascii_digit() {
            digits_end += 1;
        }
        let boundary_after = digits_end == bytes.len() || !is_word_byte(bytes[digits_end]);
        if boundary_before && digits_end > digits_start && boundary_after {
            if let Ok(number) = message[digits_start..digits_end].parse::<u64>() {
                refs.insert(number);
            }
        }
        i = digits_end.max(i + 1);
    }
    refs
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Recomputes all link fields from scratch. Unresolvable references are
/// ignored. Idempotent: relinking a linked snapshot yields the same result.
pub fn link_commits_to_artifacts(snapshot: &RepoSnapshot) -> RepoSnapshot {
    let mut linked = snapshot.clone();

    let issue_numbers: HashSet<u64> = linked.issues.iter().map(|i| i.number).collect();
    let pull_numbers: HashSet<u64> = linked.pulls.iter().map(|p| p.number).collect();

    // sha -> PRs listing that sha among their commits
    let mut prs_by_sha: HashMap<&str, BTreeSet<u64>> = HashMap::new();
    for pull in &snapshot.pulls {
        for sha in &pull.commit_shas {
            prs_by_sha.entry(sha.as_str()).or_default().insert(pull.number);
        }
    }

    for commit in &mut linked.commits {
        let refs = issue_refs(&commit.message);
        commit.linked_issue_numbers = refs
            .iter()
            .copied()
            .filter(|n| issue_numbers.contains(n))
            .collect();
        let mut prs: BTreeSet<u64> = refs
            .iter()
            .copied()
            .filter(|n| pull_numbers.contains(n))
            .collect();
        if let Some(members) = prs_by_sha.get(commit.sha.as_str()) {
            prs.extend(members.iter().copied());
        }
        commit.linked_pr_numbers = prs;
    }

    let reachable = linked.default_branch_reachable();
    let mut commits_by_issue: HashMap<u64, BTreeSet<String>> = HashMap::new();
    for commit in &linked.commits {
        if !reachable.contains(&commit.sha) {
            continue;
        }
        for number in &commit.linked_issue_numbers {
            commits_by_issue
                .entry(*number)
                .or_default()
                .insert(commit.sha.clone());
        }
    }
    for issue in &mut linked.issues {
        issue.linked_default_branch_commit_shas = commits_by_issue
            .remove(&issue.number)
            .unwrap_or_default();
    }

    linked
}
