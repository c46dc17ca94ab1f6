//! Notification phrasing for unusual events.
//!
//! Quartiles always render with one decimal place ("between 2.0 and 13.0
//! with a median of 6.0") while the observed value drops the decimals when
//! it is a whole number, so feeds and survey sheets read consistently.

use unusual_events::model::UnusualEvent;

/// The observed value: integers render bare, fractions with one decimal.
pub fn format_value(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value:.1}")
    }
}

/// Quartiles always carry one decimal place.
pub fn format_quartile(value: f64) -> String {
    format!("{value:.1}")
}

/// Renders the notification sentence for one event.
pub fn render_event_message(event: &UnusualEvent) -> String {
    let kind = event.event_type.artifact_kind();
    format!(
        "This {} is an outlier in terms of {} with a value of {}. \
         Most {} with these characteristics have values between {} and {} \
         with a median of {}.",
        kind.singular(),
        event.event_type.metric().display_name(),
        format_value(event.value),
        kind.plural(),
        format_quartile(event.summary.q1),
        format_quartile(event.summary.q3),
        format_quartile(event.summary.median),
    )
}
