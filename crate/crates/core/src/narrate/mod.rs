//! Spoken rendering of events: message text, prosody plans and recurrence advice.

mod message;
mod prosody;
mod suggest;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use message::{filter_text, render_message, simplify};
pub use prosody::{
    plan_prosody, split_semantic, tone_for, Chunk, NarrationPlan, PlanKind, ALERT_TONE_MS,
    CHUNK_PAUSE_MS, DEFAULT_RATE_WPM, DYSLEXIA_RATE_WPM, DYSLEXIA_WORD_PAUSE_MS,
};
pub use suggest::{ordinal, plan_suggestion, render_suggestion, SignatureStats, GENERIC_SUGGESTION};
pub use template::{
    Fields, Template, TemplateSet, COMPAT_FALLBACK_TEMPLATE, CRITICAL_PREFIX, DEFAULT_TEMPLATE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NarrationMode {
    #[default]
    Standard,
    Dyslexia,
}

impl FromStr for NarrationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(NarrationMode::Standard),
            "dyslexia" => Ok(NarrationMode::Dyslexia),
            other => Err(format!("unknown narration mode {other:?}")),
        }
    }
}

impl fmt::Display for NarrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NarrationMode::Standard => "standard",
            NarrationMode::Dyslexia => "dyslexia",
        })
    }
}
