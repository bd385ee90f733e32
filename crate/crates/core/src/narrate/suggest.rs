use std::time::Duration;

use super::prosody::{plan_prosody, NarrationPlan};
use super::NarrationMode;
use crate::classify::{Classification, Family, MatchedBy, Severity};

pub const GENERIC_SUGGESTION: &str = "Recurring error: Consider adding try-except block";

const ADVICE: &[(&str, &str)] = &[
    ("KeyError", "consider using dict.get() for safe access"),
    ("IndexError", "consider checking the length before indexing"),
    ("ZeroDivisionError", "consider checking the divisor before dividing"),
    ("AttributeError", "consider checking for None before attribute access"),
    ("FileNotFoundError", "consider checking that the path exists first"),
];

/// What the recurrence detector saw for one signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureStats {
    pub exception_type: String,
    pub count: usize,
    pub window: Duration,
}

pub fn ordinal(n: usize) -> String {
    const WORDS: [&str; 20] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
        "tenth", "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth",
        "seventeenth", "eighteenth", "nineteenth", "twentieth",
    ];
    if (1..=20).contains(&n) {
        return WORDS[n - 1].to_string();
    }
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn window_phrase(window: Duration) -> String {
    let secs = window.as_secs();
    match secs {
        3600 => "this hour".to_string(),
        60 => "this minute".to_string(),
        86400 => "today".to_string(),
        s if s % 3600 == 0 => format!("in the last {} hours", s / 3600),
        s if s % 60 == 0 => format!("in the last {} minutes", s / 60),
        s => format!("in the last {s} seconds"),
    }
}

pub fn render_suggestion(stats: &SignatureStats) -> String {
    match ADVICE.iter().find(|(ty, _)| *ty == stats.exception_type) {
        Some((_, advice)) => format!(
            "This is the {} {} {} - {}",
            ordinal(stats.count),
            stats.exception_type,
            window_phrase(stats.window),
            advice
        ),
        None => GENERIC_SUGGESTION.to_string(),
    }
}

/// Suggestions are always spoken with Info prosody.
pub fn plan_suggestion(text: &str, mode: NarrationMode, base_rate_wpm: u32) -> NarrationPlan {
    let cls = Classification {
        family: Family::LogicalFlaws,
        severity: Severity::Info,
        matched_by: MatchedBy::Default,
    };
    plan_prosody(text, &cls, mode, base_rate_wpm).as_suggestion()
}
