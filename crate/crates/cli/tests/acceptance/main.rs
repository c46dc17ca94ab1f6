//! Acceptance suite. Each test prints one pass line; run with
//! `cargo test -p unusual-events-cli --test acceptance -- --nocapture`
//! to see them.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unusual_events::analytics::{odds_ratio, usefulness_ranking};
use unusual_events::ingest::{
    link_commits_to_artifacts, load_snapshot, qualifies_for_sample, save_snapshot,
};
use unusual_events::model::{
    ArtifactRef, ChangeKind, Commit, CommitMetric, ContextKey, ContextKind, Direction,
    DistributionSummary, EventTypeId, FileChange, Issue, IssueMetric, MetricKind, Observation,
    PullMetric, RepoSnapshot, UnusualEvent,
};
use unusual_events::outliers::{detect_all, detect_group, summarize, DetectorConfig};
use unusual_events_cli::{render_event_message, EventRecord};

fn issue_days_project() -> EventTypeId {
    EventTypeId::new(
        MetricKind::Issue(IssueMetric::DaysOpenToClosed),
        ContextKind::Project,
    )
    .unwrap()
}

fn issue_group(metric: IssueMetric, values: &[f64]) -> Vec<Observation> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            Observation::new(ArtifactRef::issue(i as u64 + 1), MetricKind::Issue(metric), v)
        })
        .collect()
}

#[test]
fn criterion_01_motivating_examples() {
    let start = Instant::now();

    // Issue open durations whose quartiles land on 0.9058 / 4.65 / 16.20
    // days; the 70-day issue (position 8) must be flagged high.
    let rxswift = [0.0, 0.5, 0.9058, 2.0, 4.65, 10.0, 16.20, 30.0, 70.0];
    let group = issue_group(IssueMetric::DaysOpenToClosed, &rxswift);
    let summary = summarize(&rxswift, 3.0).unwrap();
    assert!((summary.q1 - 0.9058).abs() < 1e-12);
    assert!((summary.median - 4.65).abs() < 1e-12);
    assert!((summary.q3 - 16.20).abs() < 1e-12);
    assert!(
        (summary.upper_fence - 62.0826).abs() < 1e-9,
        "fence {} != 62.0826",
        summary.upper_fence
    );
    let events = detect_group(&group, &summary, issue_days_project(), &ContextKey::Project);
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].value, 70.0);
    assert_eq!(events[0].direction, Direction::High);

    // Comment counts in a wontfix label group with quartiles 1 / 2 / 3.5;
    // the 13-comment issue is beyond the fence at 11.
    let latexml = [0.0, 1.0, 1.0, 1.5, 2.0, 3.0, 3.5, 5.0, 13.0];
    let group = issue_group(IssueMetric::CommentCount, &latexml);
    let summary = summarize(&latexml, 3.0).unwrap();
    assert!((summary.q1 - 1.0).abs() < 1e-12);
    assert!((summary.median - 2.0).abs() < 1e-12);
    assert!((summary.q3 - 3.5).abs() < 1e-12);
    assert!((summary.upper_fence - 11.0).abs() < 1e-9);
    let label_type = EventTypeId::new(
        MetricKind::Issue(IssueMetric::CommentCount),
        ContextKind::Label,
    )
    .unwrap();
    let events = detect_group(
        &group,
        &summary,
        label_type,
        &ContextKey::Label("wontfix".into()),
    );
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].value, 13.0);

    // Open durations for one assignee with quartiles 0.8858 / 6.94 / 36.21
    // days; the 334-day issue clears the fence at ~142.18 days.
    let elixir = [0.1, 0.5, 0.8858, 3.0, 6.94, 20.0, 36.21, 100.0, 334.0];
    let group = issue_group(IssueMetric::DaysOpenToClosed, &elixir);
    let summary = summarize(&elixir, 3.0).unwrap();
    assert!((summary.q1 - 0.8858).abs() < 1e-12);
    assert!((summary.q3 - 36.21).abs() < 1e-12);
    assert!(
        (summary.upper_fence - 142.1826).abs() < 1e-9,
        "fence {} != 142.1826",
        summary.upper_fence
    );
    let assignee_type = EventTypeId::new(
        MetricKind::Issue(IssueMetric::DaysOpenToClosed),
        ContextKind::Assignee,
    )
    .unwrap();
    let events = detect_group(
        &group,
        &summary,
        assignee_type,
        &ContextKey::Assignee("josevalim".into()),
    );
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].value, 334.0);

    assert!(start.elapsed().as_secs() < 1);
    println!("[PASS] criterion 1: motivating-example fences reproduced to 1e-9");
}

#[test]
fn criterion_02_notification_rendering() {
    let start = Instant::now();
    let make = |metric: PullMetric, value: f64, q1: f64, median: f64, q3: f64| UnusualEvent {
        artifact: ArtifactRef::pull(201),
        event_type: EventTypeId::new(MetricKind::Pull(metric), ContextKind::Project).unwrap(),
        context: ContextKey::Project,
        value,
        summary: DistributionSummary {
            n: 40,
            q1,
            median,
            q3,
            iqr: q3 - q1,
            lower_fence: q1 - 3.0 * (q3 - q1),
            upper_fence: q3 + 3.0 * (q3 - q1),
        },
        direction: Direction::High,
    };
    assert_eq!(
        render_event_message(&make(PullMetric::ChangedFiles, 72.0, 2.0, 6.0, 13.0)),
        "This pull request is an outlier in terms of number of changed files with a value of \
         72. Most pull requests with these characteristics have values between 2.0 and 13.0 \
         with a median of 6.0."
    );
    assert_eq!(
        render_event_message(&make(
            PullMetric::DefaultBranchCommitCount,
            26.0,
            2.0,
            3.0,
            6.0
        )),
        "This pull request is an outlier in terms of number of master branch commits with a \
         value of 26. Most pull requests with these characteristics have values between 2.0 \
         and 6.0 with a median of 3.0."
    );
    assert!(start.elapsed().as_secs() < 1);
    println!("[PASS] criterion 2: survey notification sentences render byte-exact");
}

#[test]
fn criterion_03_oracle_equivalence() {
    let start = Instant::now();
    let mut total_events = 0usize;
    for seed in 0..200u64 {
        let snapshot = link_commits_to_artifacts(&gen::snapshot(seed));
        let k = [0.5, 1.5, 3.0][(seed % 3) as usize];
        let min_group = [2usize, 3, 10][(seed % 5 % 3) as usize];
        let config = DetectorConfig {
            k,
            min_group_size: min_group,
            ..DetectorConfig::default()
        };
        let engine = oracle::from_events(&detect_all(&snapshot, &config).unwrap());
        let reference = oracle::detect(&snapshot, k, min_group);
        assert_eq!(
            engine, reference,
            "engine and brute force disagree for seed {seed} (k={k}, min_group={min_group})"
        );
        total_events += engine.len();
    }
    assert!(
        total_events > 1000,
        "suspiciously quiet corpus: only {total_events} events"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!(
        "[PASS] criterion 3: detect_all matches brute force on 200 random snapshots \
         ({total_events} events compared)"
    );
}

#[test]
fn criterion_04_outlier_rule_properties() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xFE11CE);
    for case in 0..1000 {
        let n = rng.gen_range(2..40);
        let mut values: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.8) {
                    rng.gen_range(0..500) as f64
                } else {
                    rng.gen_range(0.0..500.0)
                }
            })
            .collect();

        let flagged = |values: &[f64], k: f64| -> BTreeSet<usize> {
            let s = summarize(values, k).unwrap();
            values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v < s.lower_fence || v > s.upper_fence)
                .map(|(i, _)| i)
                .collect()
        };

        // fence monotonicity in k, down to the k=0 and k=infinity limits
        let mut previous = flagged(&values, 0.0);
        for k in [0.25, 1.0, 3.0, 8.0, 1e15] {
            let current = flagged(&values, k);
            assert!(
                current.is_subset(&previous),
                "case {case}: k={k} added events"
            );
            previous = current;
        }
        assert!(flagged(&values, 1e15).is_empty() || {
            // only possible when iqr is zero and a value differs from it
            summarize(&values, 1.0).unwrap().iqr == 0.0
        });

        // k = 0 flags exactly the values strictly outside [q1, q3]
        let s0 = summarize(&values, 0.0).unwrap();
        for (i, &v) in values.iter().enumerate() {
            let outside = v < s0.q1 || v > s0.q3;
            assert_eq!(flagged(&values, 0.0).contains(&i), outside);
        }

        // scale equivariance
        let lambda = [0.5, 2.0, 3.0, 4.0][rng.gen_range(0..4)];
        let scaled: Vec<f64> = values.iter().map(|v| v * lambda).collect();
        let s1 = summarize(&values, 3.0).unwrap();
        let s2 = summarize(&scaled, 3.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        assert!(close(s1.q1 * lambda, s2.q1));
        assert!(close(s1.median * lambda, s2.median));
        assert!(close(s1.q3 * lambda, s2.q3));
        assert!(close(s1.upper_fence * lambda, s2.upper_fence));
        assert_eq!(flagged(&values, 3.0), flagged(&scaled, 3.0), "case {case}");

        // permutation invariance: same summary, same flagged value multiset
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(summarize(&values, 3.0).unwrap(), summarize(&shuffled, 3.0).unwrap());
        let mut flagged_values: Vec<u64> = flagged(&values, 3.0)
            .iter()
            .map(|&i| values[i].to_bits())
            .collect();
        let mut flagged_shuffled: Vec<u64> = flagged(&shuffled, 3.0)
            .iter()
            .map(|&i| shuffled[i].to_bits())
            .collect();
        flagged_values.sort_unstable();
        flagged_shuffled.sort_unstable();
        assert_eq!(flagged_values, flagged_shuffled);

        // constant groups never produce events
        let constant = vec![values[0]; n];
        assert!(flagged(&constant, 3.0).is_empty());
        values.truncate(n);
    }

    // strict boundary: a value exactly on the fence is not an outlier
    let spiked = [5.0, 5.0, 5.0, 5.0, 9.0];
    let summary = summarize(&spiked, 3.0).unwrap();
    assert_eq!(summary.upper_fence, 5.0);
    let group = issue_group(IssueMetric::CommentCount, &spiked);
    let events = detect_group(&group, &summary, issue_days_project(), &ContextKey::Project);
    assert_eq!(events.len(), 1, "only the 9.0 observation is beyond the fence");
    let on_fence = issue_group(IssueMetric::CommentCount, &[5.0, 5.0, 5.0, 5.0, 5.0]);
    let events = detect_group(
        &on_fence,
        &summarize(&[5.0; 5], 3.0).unwrap(),
        issue_days_project(),
        &ContextKey::Project,
    );
    assert!(events.is_empty());

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!("[PASS] criterion 4: outlier-rule properties hold over 1000 random cases");
}

#[test]
fn criterion_05_event_type_enumeration() {
    let all = EventTypeId::all();
    assert_eq!(all.len(), 151);
    let distinct: BTreeSet<_> = all.iter().collect();
    assert_eq!(distinct.len(), 151);
    println!("[PASS] criterion 5: exactly 151 constructible event types");
}

#[test]
fn criterion_06_odds_ratio_arithmetic() {
    let result = odds_ratio(20, 10, 5, 25);
    assert!((result.odds_ratio - 10.0).abs() < 1e-12);
    // Woolf: exp(ln 10 +- 1.96 * sqrt(1/20 + 1/10 + 1/5 + 1/25)), evaluated
    // independently here
    let margin = 1.96 * (1.0f64 / 20.0 + 1.0 / 10.0 + 1.0 / 5.0 + 1.0 / 25.0).sqrt();
    let expected_low = (10.0f64.ln() - margin).exp();
    let expected_high = (10.0f64.ln() + margin).exp();
    assert!((result.ci_low - expected_low).abs() < 1e-12);
    assert!((result.ci_high - expected_high).abs() < 1e-12);
    assert!((result.ci_low - 2.9405).abs() < 1e-2);
    assert!((result.ci_high - 34.0083).abs() < 1e-2);

    // outcome-flip reciprocity is exact on this table
    let flipped = odds_ratio(10, 20, 25, 5);
    assert_eq!(result.odds_ratio * flipped.odds_ratio, 1.0);

    // zero cells come back corrected and finite, never as errors
    let corrected = odds_ratio(0, 10, 5, 25);
    assert!(corrected.corrected);
    assert_eq!(corrected.odds_ratio, (0.5 * 25.5) / (10.5 * 5.5));
    assert!(corrected.ci_low.is_finite() && corrected.ci_high.is_finite());
    assert!(corrected.ci_low <= corrected.odds_ratio);
    assert!(corrected.odds_ratio <= corrected.ci_high);

    println!(
        "[PASS] criterion 6: Woolf CI = [{:.4}, {:.4}], reciprocity exact, zero cells corrected",
        result.ci_low, result.ci_high
    );
}

#[test]
fn criterion_07_usefulness_ranking() {
    let t = |metric: MetricKind, context: ContextKind| EventTypeId::new(metric, context).unwrap();
    let loc_modified = t(
        MetricKind::Commit(CommitMetric::LocModified),
        ContextKind::Project,
    );
    let pull_comments = t(
        MetricKind::Pull(PullMetric::CommentCount),
        ContextKind::Project,
    );
    let issue_days = t(
        MetricKind::Issue(IssueMetric::DaysOpenToClosed),
        ContextKind::Project,
    );
    let label_comments = t(
        MetricKind::Issue(IssueMetric::CommentCount),
        ContextKind::Label,
    );
    let loc_deleted = t(
        MetricKind::Commit(CommitMetric::LocDeleted),
        ContextKind::Project,
    );
    let loc_added = t(
        MetricKind::Commit(CommitMetric::LocAdded),
        ContextKind::Project,
    );

    let mut votes: BTreeMap<EventTypeId, (u64, u64)> = BTreeMap::new();
    // the published shares: 60 / 57 / 53 / 50 / 50 / 50 percent
    votes.insert(loc_modified, (12, 8));
    votes.insert(pull_comments, (8, 6));
    votes.insert(issue_days, (8, 7));
    votes.insert(label_comments, (10, 10));
    votes.insert(loc_deleted, (8, 8));
    votes.insert(loc_added, (5, 5));
    // distractors: below half, or too few votes
    votes.insert(
        t(MetricKind::Commit(CommitMetric::MessageLength), ContextKind::Project),
        (9, 20),
    );
    votes.insert(
        t(MetricKind::Pull(PullMetric::TitleLength), ContextKind::Project),
        (3, 2),
    );
    votes.insert(
        t(MetricKind::Issue(IssueMetric::LabelCount), ContextKind::Owner),
        (0, 12),
    );

    let ranked = usefulness_ranking(&votes, 6);
    let order: Vec<EventTypeId> = ranked.iter().map(|e| e.event_type).collect();
    assert_eq!(
        order,
        vec![
            loc_modified,
            pull_comments,
            issue_days,
            label_comments,
            loc_deleted,
            loc_added
        ]
    );
    let shares: Vec<u32> = ranked.iter().map(|e| (e.share * 100.0).round() as u32).collect();
    assert_eq!(shares, vec![60, 57, 53, 50, 50, 50]);
    println!("[PASS] criterion 7: the six most useful types rank in published order");
}

#[test]
fn criterion_08_qualification_gate() {
    let snapshot = |commits: usize, issues: usize, pulls: usize| {
        let ts = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
        RepoSnapshot {
            owner: "o".into(),
            name: "n".into(),
            default_branch: "master".into(),
            fetched_at: ts,
            commits: (0..commits)
                .map(|i| Commit {
                    sha: format!("c{i}"),
                    parent_shas: vec![],
                    author_id: "a".into(),
                    committer_id: "a".into(),
                    committer_timestamp: ts,
                    message: String::new(),
                    file_changes: vec![],
                    comment_count: 0,
                    linked_issue_numbers: BTreeSet::new(),
                    linked_pr_numbers: BTreeSet::new(),
                })
                .collect(),
            issues: (0..issues)
                .map(|i| Issue {
                    number: i as u64 + 1,
                    title: String::new(),
                    body: String::new(),
                    creator_id: "a".into(),
                    assignee_ids: BTreeSet::new(),
                    labels: BTreeSet::new(),
                    created_at: ts,
                    closed_at: None,
                    comment_count: 0,
                    linked_default_branch_commit_shas: BTreeSet::new(),
                })
                .collect(),
            pulls: (0..pulls)
                .map(|i| unusual_events::model::PullRequest {
                    number: 100_000 + i as u64,
                    title: String::new(),
                    body: String::new(),
                    creator_id: "a".into(),
                    assignee_ids: BTreeSet::new(),
                    labels: BTreeSet::new(),
                    created_at: ts,
                    closed_at: None,
                    merged_at: None,
                    comment_count: 0,
                    review_comment_count: 0,
                    changed_files: 0,
                    lines_added: 0,
                    lines_deleted: 0,
                    commit_shas: BTreeSet::new(),
                })
                .collect(),
        }
    };
    let verdict = qualifies_for_sample(&snapshot(509, 0, 100), 500, 100);
    assert!(verdict.qualifies());
    let verdict = qualifies_for_sample(&snapshot(499, 5000, 0), 500, 100);
    assert_eq!(verdict.reason(), Some("insufficient commits"));
    let verdict = qualifies_for_sample(&snapshot(500, 99, 99), 500, 100);
    assert_eq!(verdict.reason(), Some("insufficient issues/pulls"));
    println!("[PASS] criterion 8: qualification boundaries behave as specified");
}

#[test]
fn criterion_09_ingest_round_trip() {
    let ts = |d: u32, h: u32| Utc.with_ymd_and_hms(2016, 3, d, h, 0, 0).unwrap();
    let commit = |sha: &str, parents: &[&str], message: &str, changes: Vec<FileChange>| Commit {
        sha: sha.into(),
        parent_shas: parents.iter().map(|s| s.to_string()).collect(),
        author_id: "grüße".into(),
        committer_id: "grüße".into(),
        committer_timestamp: ts(1, 0),
        message: message.into(),
        file_changes: changes,
        comment_count: 1,
        linked_issue_numbers: BTreeSet::new(),
        linked_pr_numbers: BTreeSet::new(),
    };
    // two branches: head -> mid -> root, and side -> root
    let snapshot = RepoSnapshot {
        owner: "köln".into(),
        name: "emoji-\u{1F680}".into(),
        default_branch: "master".into(),
        fetched_at: ts(20, 12),
        commits: vec![
            commit(
                "head",
                &["mid"],
                "line one\nline \"two\" with unicode \u{2764}\n\ttab",
                vec![FileChange {
                    path: "src/renamed.rs".into(),
                    change_kind: ChangeKind::Renamed,
                    lines_added: 4,
                    lines_deleted: 2,
                    previous_path: Some("src/original.rs".into()),
                }],
            ),
            commit("mid", &["root"], "fixes #7", vec![]),
            commit("root", &[], "start", vec![]),
            commit("side", &["root"], "fixes #7 too", vec![]),
        ],
        issues: vec![Issue {
            number: 7,
            title: "Ünïcode title".into(),
            body: "body\nwith\nnewlines".into(),
            creator_id: "carol".into(),
            assignee_ids: ["grüße".to_string()].into_iter().collect(),
            labels: ["bug".to_string()].into_iter().collect(),
            created_at: ts(1, 0),
            closed_at: Some(ts(5, 6)),
            comment_count: 2,
            linked_default_branch_commit_shas: BTreeSet::new(),
        }],
        pulls: vec![],
    };
    let linked = link_commits_to_artifacts(&snapshot);
    // only the default-branch commit counts as linked
    assert_eq!(
        linked.issues[0].linked_default_branch_commit_shas,
        ["mid".to_string()].into_iter().collect::<BTreeSet<_>>()
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("round-trip.snapshot.jsonl");
    save_snapshot(&linked, &path).unwrap();
    let loaded = load_snapshot(&path).unwrap();
    assert_eq!(loaded, linked);

    // reachability agrees with the standalone closure
    assert_eq!(loaded.default_branch_reachable(), oracle::closure_from_head(&loaded));
    assert!(!loaded
        .default_branch_reachable()
        .contains("side"));
    println!("[PASS] criterion 9: snapshot round-trips byte-faithfully; reachability matches");
}

#[test]
fn criterion_10_detect_determinism() {
    // a snapshot guaranteed to produce events: constant commits plus a spike
    let ts0 = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
    let mut commits: Vec<Commit> = (0..25)
        .map(|i| Commit {
            sha: format!("c{i:02}"),
            parent_shas: if i + 1 < 25 {
                vec![format!("c{:02}", i + 1)]
            } else {
                vec![]
            },
            author_id: "alice".into(),
            committer_id: "alice".into(),
            committer_timestamp: ts0 + Duration::days((25 - i) as i64),
            message: "routine".into(),
            file_changes: vec![FileChange {
                path: "src/lib.rs".into(),
                change_kind: ChangeKind::Modified,
                lines_added: 4,
                lines_deleted: 4,
                previous_path: None,
            }],
            comment_count: 0,
            linked_issue_numbers: BTreeSet::new(),
            linked_pr_numbers: BTreeSet::new(),
        })
        .collect();
    commits[12].file_changes[0].lines_added = 900;
    commits[12].file_changes[0].lines_deleted = 900;
    let snapshot = RepoSnapshot {
        owner: "det".into(),
        name: "erminism".into(),
        default_branch: "master".into(),
        fetched_at: ts0,
        commits,
        issues: vec![],
        pulls: vec![],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("det.snapshot.jsonl");
    save_snapshot(&snapshot, &path).unwrap();

    let run = || {
        Command::new(env!("CARGO_BIN_EXE_unusual-events"))
            .args(["detect", path.to_str().unwrap(), "--min-group-size", "2"])
            .output()
            .expect("run detect")
    };
    let first = run();
    let second = run();
    assert!(first.status.success());
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout, "detect output not byte-identical");
    assert!(!first.stdout.is_empty(), "expected events from the spiked fixture");

    // every emitted line re-parses into a self-consistent event
    for line in String::from_utf8(first.stdout).unwrap().lines() {
        let record: EventRecord = serde_json::from_str(line).unwrap();
        let event = record.into_event().unwrap();
        assert!(event.direction_holds());
    }
    println!("[PASS] criterion 10: detect output is byte-identical across runs");
}
