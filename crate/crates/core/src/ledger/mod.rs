//! Persistent error history, recurrence detection and documentation links.

mod docs;
mod record;
mod recurrence;
mod store;

pub use docs::{gen_doc_url, origin_for, origin_for_name, DocOrigin, DOC_BASE, PYPI_SEARCH};
pub use record::{
    millis_z, seconds_z, Amendment, CauseSummary, LedgerRecord, RecordExtensions, Signature,
    CORE_KEYS, EXTENSION_KEY, UNKNOWN_FILE,
};
pub use recurrence::{RecurrenceWindow, DEFAULT_WINDOW_SECS, TRIGGER_COUNT};
pub use store::{Ledger, LedgerError, LedgerQuery, QueryPage, DEFAULT_PAGE_LIMIT};
