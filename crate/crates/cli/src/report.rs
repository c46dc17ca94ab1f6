//! Text rendering for reports: frequency tables shaped like the commit,
//! issue, and pull-request summaries, coverage lines, the perception table,
//! the usefulness ranking, and survey sheets.

use std::collections::BTreeMap;

use serde::Serialize;
use unusual_events::analytics::{
    CoverageStats, FrequencyReport, PerceptionRow, SurveySample, UsefulnessEntry,
};
use unusual_events::model::{
    ArtifactKind, CommitMetric, ContextKind, EventTypeId, IssueMetric, MetricKind, PullMetric,
    UnusualEvent,
};

use crate::render::render_event_message;

fn context_display(context: ContextKind) -> &'static str {
    match context {
        ContextKind::Project => "project",
        ContextKind::Label => "label",
        ContextKind::MergeFlag => "merge?",
        ContextKind::Committer => "committer",
        ContextKind::CommitterAndMerge => "committer/merge?",
        ContextKind::File => "file",
        ContextKind::FileAndMerge => "file/merge?",
        ContextKind::FileAndCommitter => "file/committer",
        ContextKind::FileAndLabel => "file/label",
        ContextKind::Filetype => "filetype",
        ContextKind::Assignee => "assignee",
        ContextKind::Owner => "owner",
        ContextKind::MergeStatus => "merge status",
    }
}

fn render_table(
    out: &mut String,
    title: &str,
    metrics: &[MetricKind],
    contexts: &[ContextKind],
    report: &FrequencyReport,
) {
    let header: Vec<String> = std::iter::once("metric".to_string())
        .chain(contexts.iter().map(|c| context_display(*c).to_string()))
        .collect();
    let mut rows: Vec<Vec<String>> = vec![header];
    for &metric in metrics {
        let mut row = vec![metric.display_name().to_string()];
        for &context in contexts {
            let event_type = EventTypeId::new(metric, context).expect("valid table cell");
            let cell = &report.rows[&event_type];
            row.push(format!("{} ({}%)", cell.count, cell.display_percent));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|col| rows.iter().map(|r| r[col].len()).max().unwrap_or(0))
        .collect();
    out.push_str(title);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out.push('\n');
}

/// The four frequency tables plus coverage, in plain aligned text.
pub fn render_report_text(report: &FrequencyReport, coverage: &CoverageStats) -> String {
    let commit_metrics: Vec<MetricKind> =
        CommitMetric::ALL.iter().map(|&m| MetricKind::Commit(m)).collect();
    let file_metrics: Vec<MetricKind> = CommitMetric::PER_FILE
        .iter()
        .map(|&m| MetricKind::Commit(m))
        .collect();
    let issue_metrics: Vec<MetricKind> =
        IssueMetric::ALL.iter().map(|&m| MetricKind::Issue(m)).collect();
    let pull_metrics: Vec<MetricKind> =
        PullMetric::ALL.iter().map(|&m| MetricKind::Pull(m)).collect();

    let mut out = String::new();
    render_table(
        &mut out,
        &format!("unusual commits ({} total)", report.totals.commits),
        &commit_metrics,
        &[
            ContextKind::Project,
            ContextKind::Label,
            ContextKind::MergeFlag,
            ContextKind::Committer,
        ],
        report,
    );
    render_table(
        &mut out,
        "unusual commits, grouped by files and filetypes",
        &file_metrics,
        &[
            ContextKind::CommitterAndMerge,
            ContextKind::File,
            ContextKind::FileAndMerge,
            ContextKind::FileAndCommitter,
            ContextKind::FileAndLabel,
            ContextKind::Filetype,
        ],
        report,
    );
    render_table(
        &mut out,
        &format!("unusual issues ({} total)", report.totals.issues),
        &issue_metrics,
        &[
            ContextKind::Project,
            ContextKind::Label,
            ContextKind::Assignee,
            ContextKind::Owner,
        ],
        report,
    );
    render_table(
        &mut out,
        &format!("unusual pull requests ({} total)", report.totals.pulls),
        &pull_metrics,
        &[
            ContextKind::Project,
            ContextKind::Label,
            ContextKind::Assignee,
            ContextKind::Owner,
            ContextKind::MergeStatus,
        ],
        report,
    );

    out.push_str("coverage\n");
    out.push_str(&format!(
        "  commits: {:.2}% unusual in at least one way\n",
        coverage.commit_fraction * 100.0
    ));
    out.push_str(&format!(
        "  issues: {:.2}% unusual in at least one way\n",
        coverage.issue_fraction * 100.0
    ));
    out.push_str(&format!(
        "  pull requests: {:.2}% unusual in at least one way\n",
        coverage.pull_fraction * 100.0
    ));
    out.push_str(&format!(
        "  max event types per artifact: {}\n",
        coverage.max_types_per_artifact
    ));
    out
}

#[derive(Serialize)]
pub struct ReportJson<'a> {
    pub frequency: &'a FrequencyReport,
    pub coverage: &'a CoverageStats,
}

/// Perception table: one line per (outcome, stratum) with the 2x2 counts,
/// odds ratio, and 95% confidence interval.
pub fn render_perception_text(rows: &[PerceptionRow]) -> String {
    let mut lines: Vec<Vec<String>> = vec![vec![
        "outcome".into(),
        "stratum".into(),
        "a".into(),
        "b".into(),
        "c".into(),
        "d".into(),
        "odds ratio".into(),
        "95% CI".into(),
        "".into(),
    ]];
    for row in rows {
        lines.push(vec![
            row.outcome.to_string(),
            row.stratum.to_string(),
            row.result.a.to_string(),
            row.result.b.to_string(),
            row.result.c.to_string(),
            row.result.d.to_string(),
            format!("{:.2}", row.result.odds_ratio),
            format!("[{:.2}, {:.2}]", row.result.ci_low, row.result.ci_high),
            if row.result.corrected {
                "(corrected)".into()
            } else {
                String::new()
            },
        ]);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|col| lines.iter().map(|r| r[col].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in lines {
        let rendered: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
            .collect();
        out.push_str(rendered.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn render_usefulness_text(entries: &[UsefulnessEntry]) -> String {
    if entries.is_empty() {
        return "usefulness ranking: no event type passed the vote thresholds\n".to_string();
    }
    let mut out = String::from("usefulness ranking\n");
    for (rank, entry) in entries.iter().enumerate() {
        out.push_str(&format!(
            "  {}. {} {:.0}% positive ({}/{})\n",
            rank + 1,
            entry.event_type,
            entry.share * 100.0,
            entry.positive,
            entry.positive + entry.negative
        ));
    }
    out
}

/// Survey sheet: one block per sampled artifact with its rendered event
/// statements, looked up from the detection results.
pub fn render_survey_text(sample: &SurveySample, events: &[UnusualEvent]) -> String {
    let mut by_key: BTreeMap<(ArtifactKind, &str, EventTypeId), &UnusualEvent> = BTreeMap::new();
    for event in events {
        by_key
            .entry((event.artifact.kind, event.artifact.id.as_str(), event.event_type))
            .or_insert(event);
    }
    let mut out = String::new();
    for cell in &sample.cells {
        out.push_str(&format!(
            "[{}|{}] {} {}\n",
            if cell.owned { "own" } else { "other" },
            if cell.unusual { "unusual" } else { "not unusual" },
            cell.kind.singular(),
            cell.artifact.id
        ));
        for event_type in &cell.presented_types {
            match by_key.get(&(cell.kind, cell.artifact.id.as_str(), *event_type)) {
                Some(event) => out.push_str(&format!("  {}\n", render_event_message(event))),
                None => out.push_str(&format!("  flagged as {event_type}\n")),
            }
        }
    }
    out
}
