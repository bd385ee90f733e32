//! Capture, classification, narration and history of Python exceptions.
//!
//! Events come from traceback text ([`trace::parse_traceback`]) or from the
//! interpreter hook's JSON payloads ([`trace::parse_structured`]). A
//! [`Session`] classifies each one, appends it to the [`ledger::Ledger`],
//! plans its narration and hands the plan to the [`speech::Gateway`].

pub mod classify;
pub mod clock;
pub mod config;
pub mod dedup;
pub mod event;
pub mod ingest;
pub mod ledger;
pub mod narrate;
pub mod session;
pub mod speech;
pub mod trace;

pub use classify::{classify, Classification, Family, Severity, TaxonomyTable};
pub use config::{CaptureMode, ConfigFile, SessionConfig};
pub use event::{CaptureSource, ExceptionEvent, StackFrame};
pub use session::{Session, SessionEvent};
