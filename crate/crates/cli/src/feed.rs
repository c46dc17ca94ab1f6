//! The awareness feed: one entry per artifact, grouping all of its unusual
//! events with their rendered messages.

use serde::Serialize;
use unusual_events::model::UnusualEvent;

use crate::records::{ArtifactJson, EventRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedEntry {
    pub artifact: ArtifactJson,
    pub events: Vec<EventRecord>,
}

/// Groups events by artifact, sorted by kind then identifier.
pub fn build_feed(events: &[UnusualEvent]) -> Vec<FeedEntry> {
    let mut sorted: Vec<&UnusualEvent> = events.iter().collect();
    sorted.sort_by_key(|e| e.sort_key());

    let mut entries: Vec<FeedEntry> = Vec::new();
    for event in sorted {
        let record = EventRecord::from_event(event);
        match entries.last_mut() {
            Some(last)
                if last.artifact.kind == event.artifact.kind
                    && last.artifact.id == event.artifact.id =>
            {
                last.events.push(record)
            }
            _ => entries.push(FeedEntry {
                artifact: ArtifactJson {
                    kind: event.artifact.kind,
                    id: event.artifact.id.clone(),
                    path: None,
                },
                events: vec![record],
            }),
        }
    }
    entries
}

pub fn render_feed_text(entries: &[FeedEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        let n = entry.events.len();
        out.push_str(&format!(
            "{} {}: {} unusual event{}\n",
            entry.artifact.kind.singular(),
            entry.artifact.id,
            n,
            if n == 1 { "" } else { "s" }
        ));
        for event in &entry.events {
            out.push_str("  ");
            out.push_str(&event.message);
            out.push('\n');
        }
    }
    out
}
