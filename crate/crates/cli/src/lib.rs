//! Library surface of the unusual-events CLI: message rendering, the JSON
//! event schema, feed building, and report formatting. The binary in
//! `main.rs` wires these to the detection pipeline.

pub mod feed;
pub mod records;
pub mod render;
pub mod report;

pub use feed::{build_feed, render_feed_text, FeedEntry};
pub use records::{ArtifactJson, ContextJson, EventRecord};
pub use render::{format_quartile, format_value, render_event_message};
pub use report::{
    render_perception_text, render_report_text, render_survey_text, render_usefulness_text,
    ReportJson,
};
