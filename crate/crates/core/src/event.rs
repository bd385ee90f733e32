//! Captured exception events and their stack frames.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// One record of a traceback: where execution was when the exception passed through.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StackFrame {
    pub file: String,
    pub line: u32,
    pub function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_line: Option<String>,
}

impl StackFrame {
    pub fn new(file: impl Into<String>, line: u32, function: impl Into<String>) -> Self {
        StackFrame {
            file: file.into(),
            line,
            function: function.into(),
            code_line: None,
        }
    }

    pub fn with_code(mut self, code: impl Into<String>) -> Self {
        self.code_line = Some(code.into());
        self
    }

    /// Checks the frame invariants: a non-empty file, line >= 1, a single-line code snippet.
    pub fn is_valid(&self) -> bool {
        !self.file.is_empty()
            && self.line >= 1
            && self
                .code_line
                .as_deref()
                .is_none_or(|c| !c.contains('\n') && !c.contains('\r'))
    }
}

/// How an event entered the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureSource {
    ParsedText,
    StructuredHook,
}

impl CaptureSource {
    pub fn as_str(self) -> &'static str {
        match self {
            CaptureSource::ParsedText => "parsed_text",
            CaptureSource::StructuredHook => "structured_hook",
        }
    }
}

/// One unhandled exception.
///
/// `frames` run outermost first, innermost last. `cause_chain` holds the
/// exceptions printed before this one in a chained traceback, earliest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionEvent {
    pub exception_type: String,
    pub message: String,
    pub frames: Vec<StackFrame>,
    #[serde(default)]
    pub cause_chain: Vec<ExceptionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_classes: Option<Vec<String>>,
    pub source: CaptureSource,
    pub captured_at: DateTime<Utc>,
    /// Zero until the session sequencer assigns an id.
    #[serde(default)]
    pub event_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<String>,
    /// Frame records dropped because they could not be split into file/line/function.
    #[serde(default)]
    pub malformed_frames: usize,
}

impl ExceptionEvent {
    pub fn new(
        exception_type: impl Into<String>,
        message: impl Into<String>,
        frames: Vec<StackFrame>,
        source: CaptureSource,
    ) -> Self {
        ExceptionEvent {
            exception_type: exception_type.into(),
            message: message.into(),
            frames,
            cause_chain: Vec::new(),
            base_classes: None,
            source,
            captured_at: now_ms(),
            event_id: 0,
            thread: None,
            malformed_frames: 0,
        }
    }

    pub fn innermost(&self) -> Option<&StackFrame> {
        self.frames.last()
    }

    /// True when at least one frame record had to be dropped while parsing.
    pub fn has_parse_warning(&self) -> bool {
        self.malformed_frames > 0 || self.cause_chain.iter().any(|c| c.has_parse_warning())
    }

    pub fn chain_depth(&self) -> usize {
        self.cause_chain.len()
    }
}

/// Current UTC time truncated to millisecond resolution.
pub fn now_ms() -> DateTime<Utc> {
    truncate_ms(Utc::now())
}

pub fn truncate_ms(t: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(t.timestamp_millis()).unwrap_or(t)
}
