//! Pairing of parsed-text and structured captures of the same exception.

use std::collections::VecDeque;

use crate::event::{CaptureSource, ExceptionEvent};

pub const DEDUP_WINDOW_MS: i64 = 2000;
/// How long a parsed-text event waits for its structured twin in dual capture.
pub const TEXT_HOLD_MS: i64 = 500;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupKey {
    pub exception_type: String,
    pub innermost: Option<(String, u32, String)>,
}

impl DedupKey {
    pub fn of(event: &ExceptionEvent) -> Self {
        DedupKey {
            exception_type: event.exception_type.clone(),
            innermost: event
                .innermost()
                .map(|f| (f.file.clone(), f.line, f.function.clone())),
        }
    }
}

#[derive(Debug)]
struct Committed {
    key: DedupKey,
    at_ms: i64,
    source: CaptureSource,
    paired: bool,
}

#[derive(Debug)]
struct Held {
    event: ExceptionEvent,
    release_at: i64,
}

/// Merges the two capture streams so each exception is committed once.
///
/// A committed event absorbs at most one event of the other source with the
/// same key captured within [`DEDUP_WINDOW_MS`]. Events of the same source are
/// never merged, so two threads failing identically both count. With a
/// non-zero hold, parsed-text events wait so a structured twin can win.
#[derive(Debug)]
pub struct Deduper {
    hold_ms: i64,
    held: VecDeque<Held>,
    committed: VecDeque<Committed>,
    duplicates: usize,
}

impl Deduper {
    pub fn new(hold_ms: i64) -> Self {
        Deduper {
            hold_ms,
            held: VecDeque::new(),
            committed: VecDeque::new(),
            duplicates: 0,
        }
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn pending(&self) -> usize {
        self.held.len()
    }

    fn twin_of(a: &DedupKey, a_ms: i64, b: &DedupKey, b_ms: i64) -> bool {
        a == b && (a_ms - b_ms).abs() <= DEDUP_WINDOW_MS
    }

    fn expire(&mut self, now_ms: i64) {
        let horizon = now_ms - 2 * DEDUP_WINDOW_MS - self.hold_ms;
        while self.committed.front().is_some_and(|c| c.at_ms < horizon) {
            self.committed.pop_front();
        }
    }

    fn commit(&mut self, event: ExceptionEvent, out: &mut Vec<ExceptionEvent>) {
        let key = DedupKey::of(&event);
        let at_ms = event.captured_at.timestamp_millis();
        if let Some(c) = self.committed.iter_mut().find(|c| {
            !c.paired && c.source != event.source && Self::twin_of(&c.key, c.at_ms, &key, at_ms)
        }) {
            c.paired = true;
            self.duplicates += 1;
            return;
        }
        self.committed.push_back(Committed {
            key,
            at_ms,
            source: event.source,
            paired: false,
        });
        out.push(event);
    }

    /// Offers one captured event; returns the events now ready to commit.
    pub fn push(&mut self, event: ExceptionEvent, now_ms: i64) -> Vec<ExceptionEvent> {
        let mut out = self.poll(now_ms);
        match event.source {
            CaptureSource::StructuredHook => {
                let key = DedupKey::of(&event);
                let at = event.captured_at.timestamp_millis();
                if let Some(i) = self.held.iter().position(|h| {
                    Self::twin_of(&DedupKey::of(&h.event), h.event.captured_at.timestamp_millis(), &key, at)
                }) {
                    self.held.remove(i);
                    self.duplicates += 1;
                    self.committed.push_back(Committed {
                        key,
                        at_ms: at,
                        source: event.source,
                        paired: true,
                    });
                    out.push(event);
                } else {
                    self.commit(event, &mut out);
                }
            }
            CaptureSource::ParsedText if self.hold_ms > 0 => self.held.push_back(Held {
                event,
                release_at: now_ms + self.hold_ms,
            }),
            CaptureSource::ParsedText => self.commit(event, &mut out),
        }
        out
    }

    /// Releases held events whose wait has elapsed.
    pub fn poll(&mut self, now_ms: i64) -> Vec<ExceptionEvent> {
        self.expire(now_ms);
        let mut out = Vec::new();
        while self.held.front().is_some_and(|h| h.release_at <= now_ms) {
            let h = self.held.pop_front().expect("checked");
            self.commit(h.event, &mut out);
        }
        out
    }

    /// Releases everything still held.
    pub fn drain(&mut self) -> Vec<ExceptionEvent> {
        let mut out = Vec::new();
        while let Some(h) = self.held.pop_front() {
            self.commit(h.event, &mut out);
        }
        out
    }
}
