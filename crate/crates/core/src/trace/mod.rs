//! Turning raw traceback text and hook payloads into [`ExceptionEvent`](crate::ExceptionEvent)s.

mod boundary;
mod context;
pub mod grammar;
mod parse;
mod structured;

pub use boundary::{detect_boundaries, BoundaryDetector, TracebackSpan};
pub use context::{
    extract_context, ContextLine, ContextSnippet, CONTEXT_RADIUS, REASON_OUT_OF_RANGE,
    REASON_UNAVAILABLE,
};
pub use parse::{parse_traceback, MODULE_FUNCTION};
pub use structured::{
    parse_structured, parse_structured_line, WireEvent, WireFrame, SENTINEL_PREFIX,
    WIRE_SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("no traceback found")]
    NoTracebackFound,
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}
