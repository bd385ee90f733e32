//! The newline-delimited JSON events emitted by the in-interpreter hook.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::TraceError;
use crate::event::{now_ms, truncate_ms, CaptureSource, ExceptionEvent, StackFrame};

pub const WIRE_SCHEMA_VERSION: u32 = 1;

/// Prefix of hook events written to the error stream when no channel path is set.
pub const SENTINEL_PREFIX: &str = "##AUDIBLE-TRACE-EVENT## ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireFrame {
    pub file: String,
    pub line: u32,
    pub function: String,
    #[serde(default)]
    pub code_line: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(rename = "type")]
    pub exception_type: String,
    pub message: String,
    pub frames: Vec<WireFrame>,
    #[serde(default)]
    pub base_classes: Vec<String>,
    #[serde(default)]
    pub cause_chain: Vec<WireEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<String>,
}

fn default_schema() -> u32 {
    WIRE_SCHEMA_VERSION
}

impl WireEvent {
    pub fn from_event(ev: &ExceptionEvent) -> Self {
        WireEvent {
            schema_version: WIRE_SCHEMA_VERSION,
            exception_type: ev.exception_type.clone(),
            message: ev.message.clone(),
            frames: ev
                .frames
                .iter()
                .map(|f| WireFrame {
                    file: f.file.clone(),
                    line: f.line,
                    function: f.function.clone(),
                    code_line: f.code_line.clone(),
                })
                .collect(),
            base_classes: ev.base_classes.clone().unwrap_or_default(),
            cause_chain: ev.cause_chain.iter().map(WireEvent::from_event).collect(),
            thread: ev.thread.clone(),
            ts: Some(ev.captured_at.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)),
        }
    }
}

/// Parses one hook-emitted JSON document.
pub fn parse_structured(payload: &str) -> Result<ExceptionEvent, TraceError> {
    let wire: WireEvent = serde_json::from_str(payload.trim())
        .map_err(|e| TraceError::SchemaViolation(e.to_string()))?;
    wire_to_event(wire, true)
}

/// Parses an event-stream line, accepting the sentinel-prefixed fallback form.
pub fn parse_structured_line(line: &str) -> Result<ExceptionEvent, TraceError> {
    let line = line.trim_end_matches(['\r', '\n']);
    parse_structured(line.strip_prefix(SENTINEL_PREFIX).unwrap_or(line))
}

fn wire_to_event(wire: WireEvent, top: bool) -> Result<ExceptionEvent, TraceError> {
    if wire.schema_version != WIRE_SCHEMA_VERSION {
        return Err(TraceError::SchemaViolation(format!(
            "unsupported schema_version {}",
            wire.schema_version
        )));
    }
    if wire.exception_type.is_empty() {
        return Err(TraceError::SchemaViolation("empty type".into()));
    }
    let mut frames = Vec::with_capacity(wire.frames.len());
    for f in wire.frames {
        let frame = StackFrame {
            file: f.file,
            line: f.line,
            function: f.function,
            code_line: f.code_line.filter(|c| !c.is_empty()),
        };
        if !frame.is_valid() {
            return Err(TraceError::SchemaViolation(format!(
                "invalid frame {}:{}",
                frame.file, frame.line
            )));
        }
        frames.push(frame);
    }

    let mut causes = Vec::new();
    for c in wire.cause_chain {
        let mut c = wire_to_event(c, false)?;
        // Nested chains flatten to earliest-first.
        causes.append(&mut c.cause_chain);
        causes.push(c);
    }

    let captured_at = match wire.ts.as_deref() {
        Some(ts) => DateTime::parse_from_rfc3339(ts)
            .map(|t| truncate_ms(t.with_timezone(&Utc)))
            .map_err(|e| TraceError::SchemaViolation(format!("bad ts {ts:?}: {e}")))?,
        None => now_ms(),
    };

    let mut ev = ExceptionEvent::new(
        wire.exception_type,
        wire.message,
        frames,
        CaptureSource::StructuredHook,
    );
    ev.cause_chain = causes;
    ev.base_classes = Some(wire.base_classes);
    ev.thread = wire.thread;
    ev.captured_at = captured_at;
    if !top {
        ev.thread = None;
    }
    Ok(ev)
}
