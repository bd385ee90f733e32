//! Single-stream speech output over a pluggable backend.

mod backend;
mod gateway;
mod latency;

pub use backend::{
    format_rate, transcript_line, Backend, BackendFailure, BackendKind, CommandBackend,
    NullBackend, SpeechBackend, TranscriptBackend,
};
pub use gateway::{
    Gateway, GatewayError, StatusListener, UtteranceRecord, UtteranceStatus, QUEUE_BOUND,
    REASON_COALESCED, REASON_SHUTDOWN,
};
pub use latency::{
    latency_report, mean_std, median, BucketStats, Complexity, LatencyReport, NoData, Summary,
};
