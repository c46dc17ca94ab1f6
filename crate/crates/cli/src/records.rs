//! The JSON-lines event schema emitted by `detect` and consumed by
//! downstream notifiers. Field order is stable:
//! artifact, metric, context, value, direction, summary, message.

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use unusual_events::model::{
    ArtifactKind, ArtifactRef, ContextKey, ContextKind, Direction, DistributionSummary,
    EventTypeId, MetricKind, UnusualEvent,
};

use crate::render::render_event_message;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactJson {
    pub kind: ArtifactKind,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl From<&ArtifactRef> for ArtifactJson {
    fn from(artifact: &ArtifactRef) -> Self {
        ArtifactJson {
            kind: artifact.kind,
            id: artifact.id.clone(),
            path: artifact.path.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextJson {
    pub kind: String,
    pub discriminators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub artifact: ArtifactJson,
    pub metric: String,
    pub context: ContextJson,
    pub value: f64,
    pub direction: Direction,
    pub summary: DistributionSummary,
    pub message: String,
}

impl EventRecord {
    pub fn from_event(event: &UnusualEvent) -> Self {
        EventRecord {
            artifact: ArtifactJson::from(&event.artifact),
            metric: event.event_type.metric().id().to_string(),
            context: ContextJson {
                kind: event.event_type.context().id().to_string(),
                discriminators: event.context.discriminators(),
            },
            value: event.value,
            direction: event.direction,
            summary: event.summary.clone(),
            message: render_event_message(event),
        }
    }

    /// Rebuilds the domain event; fails on unknown metric or context names.
    pub fn into_event(self) -> Result<UnusualEvent> {
        let metric = MetricKind::from_id(self.artifact.kind, &self.metric)
            .ok_or_else(|| anyhow!("unknown metric {:?}", self.metric))?;
        let context_kind = ContextKind::from_id(&self.context.kind)
            .ok_or_else(|| anyhow!("unknown context {:?}", self.context.kind))?;
        let event_type = EventTypeId::new(metric, context_kind).ok_or_else(|| {
            anyhow!(
                "invalid event type {}/{}/{}",
                self.artifact.kind.id(),
                self.metric,
                self.context.kind
            )
        })?;
        let context = ContextKey::from_parts(context_kind, &self.context.discriminators)
            .with_context(|| format!("bad discriminators for context {}", self.context.kind))?;
        Ok(UnusualEvent {
            artifact: ArtifactRef {
                kind: self.artifact.kind,
                id: self.artifact.id,
                path: self.artifact.path,
            },
            event_type,
            context,
            value: self.value,
            summary: self.summary,
            direction: self.direction,
        })
    }
}
