use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::NarrationMode;
use crate::classify::{Classification, Severity};
use crate::event::ExceptionEvent;

pub const CHUNK_PAUSE_MS: u32 = 300;
pub const DYSLEXIA_WORD_PAUSE_MS: u32 = 500;
pub const DYSLEXIA_RATE_WPM: u32 = 120;
pub const ALERT_TONE_MS: u32 = 300;
pub const DEFAULT_RATE_WPM: u32 = 160;

/// Pitch shift in cents and rate multiplier for a severity tier.
pub fn tone_for(severity: Severity) -> (i32, f64) {
    match severity {
        Severity::Critical => (150, 1.25),
        Severity::High => (75, 1.10),
        Severity::Warning => (0, 1.00),
        Severity::Info => (-50, 0.85),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub text: String,
    pub pause_after_ms: u32,
    pub pitch_shift_cents: i32,
    pub rate_multiplier: f64,
}

impl Chunk {
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }

    /// Speaking time for this chunk, excluding the trailing pause.
    pub fn speech_ms(&self, base_rate_wpm: u32) -> f64 {
        self.word_count() as f64 * 60_000.0 / (base_rate_wpm as f64 * self.rate_multiplier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Narration,
    Suggestion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrationPlan {
    pub event_id: u64,
    pub severity: Severity,
    pub chunks: Vec<Chunk>,
    pub estimated_duration_ms: u64,
    pub base_rate_wpm: u32,
    pub mode: NarrationMode,
    /// Length of the alert tone played before the first chunk; zero for none.
    pub alert_tone_ms: u32,
    pub kind: PlanKind,
    pub captured_at: Option<DateTime<Utc>>,
    pub frame_count: usize,
}

impl NarrationPlan {
    /// Binds the plan to the event it narrates.
    pub fn for_event(mut self, event: &ExceptionEvent) -> Self {
        self.event_id = event.event_id;
        self.captured_at = Some(event.captured_at);
        self.frame_count = event.frames.len();
        self
    }

    pub fn as_suggestion(mut self) -> Self {
        self.kind = PlanKind::Suggestion;
        self
    }

    pub fn has_alert_tone(&self) -> bool {
        self.alert_tone_ms > 0
    }

    pub fn text(&self) -> String {
        self.chunks
            .iter()
            .map(|c| c.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Effective speaking rate of the first chunk in words per minute.
    pub fn effective_wpm(&self) -> f64 {
        self.chunks
            .first()
            .map_or(self.base_rate_wpm as f64, |c| self.base_rate_wpm as f64 * c.rate_multiplier)
    }
}

/// Splits after sentence ends and colons, and after the dash of a ` - ` separator.
/// The separators stay with the preceding chunk so the chunks re-join to the input.
pub fn split_semantic(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let cut = match bytes[i] {
            b'.' | b'!' | b'?' | b':' if bytes.get(i + 1) == Some(&b' ') => Some(i + 1),
            b' ' if bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b' ') => Some(i + 2),
            _ => None,
        };
        if let Some(end) = cut {
            let piece = text[start..end].trim();
            if !piece.is_empty() {
                chunks.push(piece.to_string());
            }
            start = end;
            i = end;
        } else {
            i += 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        chunks.push(tail.to_string());
    }
    chunks
}

/// Builds the speech plan for already-rendered text.
///
/// An empty text still yields one chunk so every plan is speakable.
pub fn plan_prosody(
    text: &str,
    cls: &Classification,
    mode: NarrationMode,
    base_rate_wpm: u32,
) -> NarrationPlan {
    let base_rate_wpm = base_rate_wpm.max(1);
    let (pieces, pause, pitch, rate) = match mode {
        NarrationMode::Standard => {
            let (pitch, rate) = tone_for(cls.severity);
            (split_semantic(text), CHUNK_PAUSE_MS, pitch, rate)
        }
        NarrationMode::Dyslexia => (
            text.split_whitespace().map(str::to_string).collect(),
            DYSLEXIA_WORD_PAUSE_MS,
            0,
            DYSLEXIA_RATE_WPM as f64 / base_rate_wpm as f64,
        ),
    };
    let pieces = if pieces.is_empty() {
        vec!["error".to_string()]
    } else {
        pieces
    };

    let n = pieces.len();
    let chunks: Vec<Chunk> = pieces
        .into_iter()
        .enumerate()
        .map(|(i, text)| Chunk {
            text,
            pause_after_ms: if i + 1 == n { 0 } else { pause },
            pitch_shift_cents: pitch,
            rate_multiplier: rate,
        })
        .collect();

    let estimated = chunks
        .iter()
        .map(|c| c.speech_ms(base_rate_wpm) + c.pause_after_ms as f64)
        .sum::<f64>()
        .round() as u64;

    NarrationPlan {
        event_id: 0,
        severity: cls.severity,
        chunks,
        estimated_duration_ms: estimated,
        base_rate_wpm,
        mode,
        alert_tone_ms: if cls.severity == Severity::Critical {
            ALERT_TONE_MS
        } else {
            0
        },
        kind: PlanKind::Narration,
        captured_at: None,
        frame_count: 0,
    }
}
