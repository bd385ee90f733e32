use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classify::{Classification, Family, MatchedBy, Severity};
use crate::event::{CaptureSource, ExceptionEvent, StackFrame};

/// The seven top-level keys of a history record, in file order.
pub const CORE_KEYS: [&str; 7] = [
    "timestamp",
    "exception",
    "message",
    "file",
    "line",
    "frequency",
    "resolution",
];

/// Key holding the extension fields.
pub const EXTENSION_KEY: &str = "x";

/// Whole-second UTC timestamps written as `2023-11-20T14:32:18Z`.
pub mod seconds_z {
    use chrono::{DateTime, NaiveDateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

    pub fn format(t: &DateTime<Utc>) -> String {
        t.format(FORMAT).to_string()
    }

    pub fn parse(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        NaiveDateTime::parse_from_str(s, FORMAT).map(|n| n.and_utc())
    }

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Millisecond UTC timestamps written as `2023-11-20T14:32:18.123Z`.
pub mod millis_z {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseSummary {
    #[serde(rename = "type")]
    pub exception_type: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordExtensions {
    pub id: u64,
    pub family: Family,
    pub severity: Severity,
    pub matched_by: MatchedBy,
    pub frames: Vec<StackFrame>,
    pub source: CaptureSource,
    #[serde(with = "millis_z")]
    pub captured_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub causes: Vec<CauseSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<String>,
}

/// One persisted error-history row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    #[serde(with = "seconds_z")]
    pub timestamp: DateTime<Utc>,
    pub exception: String,
    pub message: String,
    pub file: String,
    pub line: u32,
    pub frequency: u64,
    pub resolution: Option<String>,
    pub x: RecordExtensions,
}

/// Recurrence identity: exception type at a call site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub exception: String,
    pub file: String,
    pub line: u32,
}

pub const UNKNOWN_FILE: &str = "<unknown>";

impl Signature {
    pub fn of(event: &ExceptionEvent) -> Self {
        let (file, line) = event
            .innermost()
            .map_or((UNKNOWN_FILE.to_string(), 0), |f| (f.file.clone(), f.line));
        Signature {
            exception: event.exception_type.clone(),
            file,
            line,
        }
    }
}

impl LedgerRecord {
    pub fn new(event: &ExceptionEvent, cls: &Classification, id: u64, frequency: u64) -> Self {
        let sig = Signature::of(event);
        LedgerRecord {
            timestamp: DateTime::from_timestamp(event.captured_at.timestamp(), 0)
                .unwrap_or(event.captured_at),
            exception: sig.exception,
            message: event.message.clone(),
            file: sig.file,
            line: sig.line,
            frequency,
            resolution: None,
            x: RecordExtensions {
                id,
                family: cls.family,
                severity: cls.severity,
                matched_by: cls.matched_by,
                frames: event.frames.clone(),
                source: event.source,
                captured_at: event.captured_at,
                base_classes: event.base_classes.clone(),
                causes: event
                    .cause_chain
                    .iter()
                    .map(|c| CauseSummary {
                        exception_type: c.exception_type.clone(),
                        message: c.message.clone(),
                    })
                    .collect(),
                thread: event.thread.clone(),
            },
        }
    }

    pub fn id(&self) -> u64 {
        self.x.id
    }

    pub fn signature(&self) -> Signature {
        Signature {
            exception: self.exception.clone(),
            file: self.file.clone(),
            line: self.line,
        }
    }

    pub fn classification(&self) -> Classification {
        Classification {
            family: self.x.family,
            severity: self.x.severity,
            matched_by: self.x.matched_by,
        }
    }

    /// Rebuilds the event this record was written from. Cause frames are not kept.
    pub fn to_event(&self) -> ExceptionEvent {
        let mut ev = ExceptionEvent::new(
            self.exception.clone(),
            self.message.clone(),
            self.x.frames.clone(),
            self.x.source,
        );
        ev.event_id = self.x.id;
        ev.captured_at = self.x.captured_at;
        ev.base_classes = self.x.base_classes.clone();
        ev.thread = self.x.thread.clone();
        ev.cause_chain = self
            .x
            .causes
            .iter()
            .map(|c| {
                ExceptionEvent::new(
                    c.exception_type.clone(),
                    c.message.clone(),
                    Vec::new(),
                    self.x.source,
                )
            })
            .collect();
        ev
    }
}

/// A resolution amendment line: `{"amend": id, "resolution": text}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amendment {
    pub amend: u64,
    pub resolution: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub(crate) enum LedgerLine {
    Amend(Amendment),
    Record(Box<LedgerRecord>),
}
