//! Aggregations over detection results and user-supplied ratings: frequency
//! tables, coverage, odds ratios with 95% confidence intervals, usefulness
//! ranking, and survey sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ArtifactKind, ArtifactRef, ContextKey, ContextKind, EventTypeId, OddsRatioResult, Rating,
    RepoSnapshot, UnusualEvent,
};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("unknown participant {0:?}")]
    UnknownParticipant(String),
    #[error("no ratings supplied")]
    EmptyRatings,
}

// ---------------------------------------------------------------------------
// Frequency and coverage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactTotals {
    pub commits: usize,
    pub issues: usize,
    pub pulls: usize,
}

impl ArtifactTotals {
    pub fn for_kind(&self, kind: ArtifactKind) -> usize {
        match kind {
            ArtifactKind::Commit => self.commits,
            ArtifactKind::Issue => self.issues,
            ArtifactKind::Pull => self.pulls,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    /// Distinct artifacts flagged at least once by this event type.
    pub count: usize,
    /// Share of the artifact population, in percent.
    pub percentage: f64,
    /// Integer-rounded percentage, table style.
    pub display_percent: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub rows: BTreeMap<EventTypeId, FrequencyRow>,
    pub totals: ArtifactTotals,
}

/// Counts distinct flagged artifacts per event type over all 151 types.
pub fn frequency_report(events: &[UnusualEvent], snapshot: &RepoSnapshot) -> FrequencyReport {
    let totals = ArtifactTotals {
        commits: snapshot.commits.len(),
        issues: snapshot.issues.len(),
        pulls: snapshot.pulls.len(),
    };
    let mut distinct: BTreeMap<EventTypeId, BTreeSet<(ArtifactKind, &str)>> = BTreeMap::new();
    for event in events {
        distinct
            .entry(event.event_type)
            .or_default()
            .insert(event.artifact.artifact_id());
    }
    let rows = EventTypeId::all()
        .into_iter()
        .map(|event_type| {
            let count = distinct.get(&event_type).map_or(0, BTreeSet::len);
            let total = totals.for_kind(event_type.artifact_kind());
            let percentage = if total == 0 {
                0.0
            } else {
                100.0 * count as f64 / total as f64
            };
            (
                event_type,
                FrequencyRow {
                    count,
                    percentage,
                    display_percent: percentage.round() as u32,
                },
            )
        })
        .collect();
    FrequencyReport { rows, totals }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageStats {
    /// Fraction of commits unusual in at least one way, in [0, 1].
    pub commit_fraction: f64,
    pub issue_fraction: f64,
    pub pull_fraction: f64,
    /// Maximum number of distinct (event type, context group) pairs flagged
    /// on a single artifact.
    pub max_types_per_artifact: usize,
}

/// Per-kind coverage of the detection results.
pub fn coverage_stats(events: &[UnusualEvent], snapshot: &RepoSnapshot) -> CoverageStats {
    let mut flagged: BTreeMap<(ArtifactKind, &str), BTreeSet<(EventTypeId, &ContextKey)>> =
        BTreeMap::new();
    for event in events {
        flagged
            .entry(event.artifact.artifact_id())
            .or_default()
            .insert((event.event_type, &event.context));
    }
    let count_kind = |kind: ArtifactKind| flagged.keys().filter(|(k, _)| *k == kind).count();
    let fraction = |count: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        }
    };
    CoverageStats {
        commit_fraction: fraction(count_kind(ArtifactKind::Commit), snapshot.commits.len()),
        issue_fraction: fraction(count_kind(ArtifactKind::Issue), snapshot.issues.len()),
        pull_fraction: fraction(count_kind(ArtifactKind::Pull), snapshot.pulls.len()),
        max_types_per_artifact: flagged.values().map(BTreeSet::len).max().unwrap_or(0),
    }
}

// ---------------------------------------------------------------------------
// Odds ratios
// ---------------------------------------------------------------------------

const Z_95: f64 = 1.96;

/// Odds ratio (a*d)/(b*c) of a 2x2 table with a Woolf log-normal 95%
/// confidence interval. Any zero cell triggers the Haldane-Anscombe 0.5
/// adjustment of all four cells; the result is then marked `corrected`.
pub fn odds_ratio(a: u64, b: u64, c: u64, d: u64) -> OddsRatioResult {
    let corrected = a == 0 || b == 0 || c == 0 || d == 0;
    let adjust = if corrected { 0.5 } else { 0.0 };
    let fa = a as f64 + adjust;
    let fb = b as f64 + adjust;
    let fc = c as f64 + adjust;
    let fd = d as f64 + adjust;
    let ratio = (fa * fd) / (fb * fc);
    let margin = Z_95 * (1.0 / fa + 1.0 / fb + 1.0 / fc + 1.0 / fd).sqrt();
    OddsRatioResult {
        a,
        b,
        c,
        d,
        odds_ratio: ratio,
        ci_low: (ratio.ln() - margin).exp(),
        ci_high: (ratio.ln() + margin).exp(),
        corrected,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerceptionOutcome {
    Difficult,
    Atypical,
}

impl fmt::Display for PerceptionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerceptionOutcome::Difficult => write!(f, "difficult"),
            PerceptionOutcome::Atypical => write!(f, "atypical"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionStratum {
    All,
    OwnedByRater,
    NotOwned,
    Commits,
    Issues,
    Pulls,
    EventType(EventTypeId),
}

impl fmt::Display for PerceptionStratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerceptionStratum::All => write!(f, "all"),
            PerceptionStratum::OwnedByRater => write!(f, "owned by rater"),
            PerceptionStratum::NotOwned => write!(f, "not owned"),
            PerceptionStratum::Commits => write!(f, "commits"),
            PerceptionStratum::Issues => write!(f, "issues"),
            PerceptionStratum::Pulls => write!(f, "pulls"),
            PerceptionStratum::EventType(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerceptionRow {
    pub outcome: PerceptionOutcome,
    pub stratum: PerceptionStratum,
    pub result: OddsRatioResult,
}

/// Odds of unusual artifacts being perceived as difficult or atypical, over
/// the standard strata plus one row per project-context event type (exposure
/// by flagged-type membership, comparing artifacts of the same kind only).
/// Degenerate strata come back continuity-corrected rather than failing.
pub fn perception_analysis(ratings: &[Rating]) -> Result<Vec<PerceptionRow>, AnalyticsError> {
    if ratings.is_empty() {
        return Err(AnalyticsError::EmptyRatings);
    }
    let mut rows = Vec::new();
    for outcome in [PerceptionOutcome::Difficult, PerceptionOutcome::Atypical] {
        let overall = [
            PerceptionStratum::All,
            PerceptionStratum::OwnedByRater,
            PerceptionStratum::NotOwned,
            PerceptionStratum::Commits,
            PerceptionStratum::Issues,
            PerceptionStratum::Pulls,
        ];
        for stratum in overall {
            let subset: Vec<&Rating> = ratings
                .iter()
                .filter(|r| stratum_contains(&stratum, r))
                .collect();
            let result = tally(&subset, outcome, |r| r.is_unusual);
            rows.push(PerceptionRow {
                outcome,
                stratum,
                result,
            });
        }
        for event_type in EventTypeId::all()
            .into_iter()
            .filter(|t| t.context() == ContextKind::Project)
        {
            let kind = event_type.artifact_kind();
            let subset: Vec<&Rating> = ratings
                .iter()
                .filter(|r| r.artifact_ref.kind == kind)
                .collect();
            let result = tally(&subset, outcome, |r| r.flagged_types.contains(&event_type));
            rows.push(PerceptionRow {
                outcome,
                stratum: PerceptionStratum::EventType(event_type),
                result,
            });
        }
    }
    Ok(rows)
}

fn stratum_contains(stratum: &PerceptionStratum, rating: &Rating) -> bool {
    match stratum {
        PerceptionStratum::All => true,
        PerceptionStratum::OwnedByRater => rating.owned_by_rater,
        PerceptionStratum::NotOwned => !rating.owned_by_rater,
        PerceptionStratum::Commits => rating.artifact_ref.kind == ArtifactKind::Commit,
        PerceptionStratum::Issues => rating.artifact_ref.kind == ArtifactKind::Issue,
        PerceptionStratum::Pulls => rating.artifact_ref.kind == ArtifactKind::Pull,
        PerceptionStratum::EventType(_) => unreachable!("event-type strata are tallied directly"),
    }
}

fn tally(
    subset: &[&Rating],
    outcome: PerceptionOutcome,
    exposed: impl Fn(&Rating) -> bool,
) -> OddsRatioResult {
    let has_outcome = |r: &Rating| match outcome {
        PerceptionOutcome::Difficult => r.perceived_difficult,
        PerceptionOutcome::Atypical => !r.perceived_typical,
    };
    let mut counts = [0u64; 4];
    for rating in subset {
        let index = match (exposed(rating), has_outcome(rating)) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[index] += 1;
    }
    odds_ratio(counts[0], counts[1], counts[2], counts[3])
}

// ---------------------------------------------------------------------------
// Usefulness ranking
// ---------------------------------------------------------------------------

pub const DEFAULT_MIN_VOTES: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsefulnessEntry {
    pub event_type: EventTypeId,
    pub positive: u64,
    pub negative: u64,
    /// positive / (positive + negative)
    pub share: f64,
}

/// Event types rated useful at least half the time, with at least
/// `min_votes` votes. Sorted by positive share, ties broken by vote count
/// and then by event type order.
pub fn usefulness_ranking(
    votes: &BTreeMap<EventTypeId, (u64, u64)>,
    min_votes: u64,
) -> Vec<UsefulnessEntry> {
    let mut entries: Vec<UsefulnessEntry> = votes
        .iter()
        .filter_map(|(&event_type, &(positive, negative))| {
            let total = positive + negative;
            if total >= min_votes && positive * 2 >= total {
                Some(UsefulnessEntry {
                    event_type,
                    positive,
                    negative,
                    share: positive as f64 / total as f64,
                })
            } else {
                None
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.share
            .partial_cmp(&a.share)
            .expect("shares are finite")
            .then_with(|| (b.positive + b.negative).cmp(&(a.positive + a.negative)))
            .then_with(|| a.event_type.cmp(&b.event_type))
    });
    entries
}

// ---------------------------------------------------------------------------
// Survey sampling
// ---------------------------------------------------------------------------

/// One artifact shown to the participant, with up to five of its flagged
/// event types.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyCell {
    pub owned: bool,
    pub unusual: bool,
    pub kind: ArtifactKind,
    pub artifact: ArtifactRef,
    pub presented_types: Vec<EventTypeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveySample {
    pub cells: Vec<SurveyCell>,
}

/// Samples up to 12 artifacts crossing {own, other} x {unusual, not} x
/// {commit, issue, pull}, one uniformly random qualifying artifact per cell.
/// Unsatisfiable cells are omitted and the presentation order is shuffled;
/// everything is driven by the seed, so equal inputs give equal samples.
pub fn sample_survey_artifacts(
    snapshot: &RepoSnapshot,
    events: &[UnusualEvent],
    participant_id: &str,
    seed: u64,
) -> Result<SurveySample, AnalyticsError> {
    let known = snapshot
        .commits
        .iter()
        .any(|c| c.committer_id == participant_id || c.author_id == participant_id)
        || snapshot.issues.iter().any(|i| i.creator_id == participant_id)
        || snapshot.pulls.iter().any(|p| p.creator_id == participant_id);
    if !known {
        return Err(AnalyticsError::UnknownParticipant(participant_id.to_string()));
    }

    let mut flagged: BTreeMap<(ArtifactKind, String), BTreeSet<EventTypeId>> = BTreeMap::new();
    for event in events {
        flagged
            .entry((event.artifact.kind, event.artifact.id.clone()))
            .or_default()
            .insert(event.event_type);
    }

    struct Candidate {
        reference: ArtifactRef,
        owned: bool,
    }
    let mut candidates: BTreeMap<ArtifactKind, Vec<Candidate>> = BTreeMap::new();
    for commit in &snapshot.commits {
        candidates
            .entry(ArtifactKind::Commit)
            .or_default()
            .push(Candidate {
                reference: ArtifactRef::commit(&commit.sha),
                owned: commit.author_id == participant_id
                    || commit.committer_id == participant_id,
            });
    }
    for issue in &snapshot.issues {
        candidates
            .entry(ArtifactKind::Issue)
            .or_default()
            .push(Candidate {
                reference: ArtifactRef::issue(issue.number),
                owned: issue.creator_id == participant_id,
            });
    }
    for pull in &snapshot.pulls {
        candidates
            .entry(ArtifactKind::Pull)
            .or_default()
            .push(Candidate {
                reference: ArtifactRef::pull(pull.number),
                owned: pull.creator_id == participant_id,
            });
    }
    for list in candidates.values_mut() {
        list.sort_by(|a, b| a.reference.sort_key().cmp(&b.reference.sort_key()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    for owned in [true, false] {
        for unusual in [false, true] {
            for kind in [ArtifactKind::Commit, ArtifactKind::Issue, ArtifactKind::Pull] {
                let pool: Vec<&Candidate> = candidates
                    .get(&kind)
                    .map(|list| {
                        list.iter()
                            .filter(|c| {
                                let is_unusual = flagged
                                    .contains_key(&(kind, c.reference.id.clone()));
                                c.owned == owned && is_unusual == unusual
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                if pool.is_empty() {
                    continue;
                }
                let picked = pool[rng.gen_range(0..pool.len())];
                let mut presented: Vec<EventTypeId> = flagged
                    .get(&(kind, picked.reference.id.clone()))
                    .map(|set| set.iter().copied().collect())
                    .unwrap_or_default();
                if presented.len() > 5 {
                    let chosen = rand::seq::index::sample(&mut rng, presented.len(), 5);
                    presented = chosen.iter().map(|i| presented[i]).collect();
                }
                cells.push(SurveyCell {
                    owned,
                    unusual,
                    kind,
                    artifact: picked.reference.clone(),
                    presented_types: presented,
                });
            }
        }
    }
    cells.shuffle(&mut rng);
    Ok(SurveySample { cells })
}
