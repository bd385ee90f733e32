//! The capture pipeline: one sequencer that classifies, persists, narrates and
//! notifies for every committed event.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::classify::{classify, Classification, TaxonomyTable};
use crate::clock::{Clock, SystemClock};
use crate::config::SessionConfig;
use crate::event::ExceptionEvent;
use crate::ingest::{IngestItem, IngestSummary, ReplayError};
use crate::ledger::{
    gen_doc_url, origin_for, Ledger, LedgerError, LedgerQuery, LedgerRecord, QueryPage, Signature,
};
use crate::narrate::{
    plan_prosody, plan_suggestion, render_message, render_suggestion, NarrationMode, PlanKind,
    SignatureStats, TemplateSet,
};
use crate::speech::{
    Gateway, LatencyReport, UtteranceRecord, UtteranceStatus,
};
use crate::trace::{extract_context, ContextSnippet};

/// Per-event pipeline timestamps.
///
/// `t_captured <= t_classified <= t_render_notified`; the first chunk starts
/// after classification, once the gateway reaches the plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineTimings {
    pub event_id: u64,
    pub t_captured: DateTime<Utc>,
    pub t_classified: DateTime<Utc>,
    pub t_render_notified: DateTime<Utc>,
    pub t_first_chunk: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counters {
    pub captured: usize,
    pub committed: usize,
    pub deduplicated: usize,
    pub malformed: usize,
    pub persist_failures: usize,
}

impl Counters {
    /// Every capture ends as a commit, a duplicate or a malformed input.
    pub fn conserved(&self) -> bool {
        self.captured == self.committed + self.deduplicated + self.malformed
    }
}

/// Published to session listeners.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEvent {
    Error {
        record: Box<LedgerRecord>,
        classification: Classification,
        doc_url: String,
        persisted: bool,
        narration: Option<UtteranceRecord>,
    },
    Narration(UtteranceRecord),
}

impl SessionEvent {
    pub fn event_id(&self) -> u64 {
        match self {
            SessionEvent::Error { record, .. } => record.id(),
            SessionEvent::Narration(u) => u.event_id,
        }
    }
}

pub type SessionListener = Box<dyn Fn(&SessionEvent) + Send + Sync>;

/// Result of pushing one event through the pipeline.
#[derive(Debug, Clone)]
pub struct Processed {
    pub record: LedgerRecord,
    pub classification: Classification,
    pub persisted: bool,
    pub narration: Option<UtteranceRecord>,
    pub suggestion: Option<UtteranceRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hotspot {
    pub exception: String,
    pub file: String,
    pub line: u32,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionStats {
    pub window_secs: u64,
    pub hotspots: Vec<Hotspot>,
    pub latency: Option<LatencyReport>,
    pub counters: Counters,
    pub records: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DocLink {
    pub exception: String,
    pub url: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContextView {
    pub id: u64,
    pub file: String,
    pub line: u32,
    pub snippet: ContextSnippet,
    pub docs: Vec<DocLink>,
}

#[derive(Debug, Clone)]
pub struct NarrationSettings {
    pub mode: NarrationMode,
    pub base_rate_wpm: u32,
    pub source_root: PathBuf,
}

impl From<&SessionConfig> for NarrationSettings {
    fn from(cfg: &SessionConfig) -> Self {
        NarrationSettings {
            mode: cfg.mode,
            base_rate_wpm: cfg.base_rate_wpm,
            source_root: cfg.source_root.clone(),
        }
    }
}

struct State {
    ledger: Ledger,
    next_event_id: u64,
    counters: Counters,
    last_now_ms: i64,
}

type Timings = Arc<Mutex<HashMap<u64, PipelineTimings>>>;
type Listeners = Arc<RwLock<Vec<SessionListener>>>;

pub struct Session {
    state: Mutex<State>,
    gateway: Gateway,
    taxonomy: TaxonomyTable,
    templates: TemplateSet,
    settings: NarrationSettings,
    clock: Arc<dyn Clock>,
    timings: Timings,
    listeners: Listeners,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Session {
    pub fn new(
        ledger: Ledger,
        gateway: Gateway,
        taxonomy: TaxonomyTable,
        templates: TemplateSet,
        settings: NarrationSettings,
    ) -> Self {
        Self::with_clock(ledger, gateway, taxonomy, templates, settings, Arc::new(SystemClock))
    }

    pub fn with_clock(
        ledger: Ledger,
        gateway: Gateway,
        taxonomy: TaxonomyTable,
        templates: TemplateSet,
        settings: NarrationSettings,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let timings: Timings = Arc::default();
        let listeners: Listeners = Arc::default();
        {
            let timings = Arc::clone(&timings);
            let listeners = Arc::clone(&listeners);
            gateway.set_listener(Box::new(move |u: &UtteranceRecord| {
                if u.status == UtteranceStatus::Speaking && u.kind == PlanKind::Narration {
                    if let Some(t) = lock(&timings).get_mut(&u.event_id) {
                        t.t_first_chunk.get_or_insert(u.started_at.unwrap_or(u.submitted_at));
                    }
                }
                let ev = SessionEvent::Narration(u.clone());
                for l in listeners.read().unwrap_or_else(|e| e.into_inner()).iter() {
                    l(&ev);
                }
            }));
        }
        let next_event_id = ledger.next_id();
        Session {
            state: Mutex::new(State {
                ledger,
                next_event_id,
                counters: Counters::default(),
                last_now_ms: i64::MIN,
            }),
            gateway,
            taxonomy,
            templates,
            settings,
            clock,
            timings,
            listeners,
        }
    }

    /// Builds ledger, backend and gateway from resolved settings.
    pub fn from_config(
        cfg: &SessionConfig,
        taxonomy: TaxonomyTable,
        templates: TemplateSet,
    ) -> Result<Self, LedgerError> {
        let ledger = match &cfg.ledger_path {
            Some(p) => Ledger::open(p, cfg.window_secs)?,
            None => Ledger::in_memory(cfg.window_secs),
        };
        let gateway = Gateway::start(cfg.backend.build()?);
        gateway.set_muted(cfg.mute);
        Ok(Session::new(ledger, gateway, taxonomy, templates, cfg.into()))
    }

    pub fn subscribe(&self, listener: SessionListener) {
        self.listeners
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .push(listener);
    }

    fn publish(&self, ev: &SessionEvent) {
        for l in self.listeners.read().unwrap_or_else(|e| e.into_inner()).iter() {
            l(ev);
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn taxonomy(&self) -> &TaxonomyTable {
        &self.taxonomy
    }

    pub fn settings(&self) -> &NarrationSettings {
        &self.settings
    }

    pub fn counters(&self) -> Counters {
        lock(&self.state).counters
    }

    pub fn note_duplicate(&self) {
        let mut st = lock(&self.state);
        st.counters.captured += 1;
        st.counters.deduplicated += 1;
    }

    pub fn note_malformed(&self) {
        let mut st = lock(&self.state);
        st.counters.captured += 1;
        st.counters.malformed += 1;
    }

    /// Runs a committed event through classify, ledger append, recurrence
    /// check, render, dashboard notification and speech submission.
    pub fn process(&self, mut event: ExceptionEvent) -> Processed {
        let mut st = lock(&self.state);
        st.counters.captured += 1;
        st.counters.committed += 1;

        let id = st.next_event_id.max(st.ledger.next_id());
        st.next_event_id = id + 1;
        event.event_id = id;
        let t_captured = event.captured_at;

        let cls = classify(&event, &self.taxonomy);
        let t_classified = self.clock.now().max(t_captured);

        let sig = Signature::of(&event);
        let (record, persisted) = match st.ledger.append(&event, &cls) {
            Ok(r) => (r, true),
            Err(e) => {
                log::warn!("event {id} not persisted: {e}");
                st.counters.persist_failures += 1;
                let freq = st.ledger.frequency(&sig) + 1;
                (LedgerRecord::new(&event, &cls, id, freq), false)
            }
        };

        let now_ms = t_captured.timestamp_millis().max(st.last_now_ms);
        st.last_now_ms = now_ms;
        let now = DateTime::from_timestamp_millis(now_ms).unwrap_or(t_captured);
        let suggestion_text = if persisted && st.ledger.recurrence_check(&sig, now) {
            Some(render_suggestion(&SignatureStats {
                exception_type: event.exception_type.clone(),
                count: st.ledger.window_count(&sig, now),
                window: Duration::from_secs(st.ledger.window_secs()),
            }))
        } else {
            None
        };

        let text = render_message(&event, &cls, self.settings.mode, &self.templates);
        let plan = plan_prosody(&text, &cls, self.settings.mode, self.settings.base_rate_wpm)
            .for_event(&event);

        let t_render_notified = self.clock.now().max(t_classified);
        lock(&self.timings).insert(
            id,
            PipelineTimings {
                event_id: id,
                t_captured,
                t_classified,
                t_render_notified,
                t_first_chunk: None,
            },
        );

        let narration = self.gateway.submit(plan).ok();
        self.publish(&SessionEvent::Error {
            record: Box::new(record.clone()),
            classification: cls,
            doc_url: gen_doc_url(&event.exception_type, &origin_for(&event, &self.taxonomy)),
            persisted,
            narration: narration.clone(),
        });

        let suggestion = suggestion_text.and_then(|s| {
            let plan = plan_suggestion(&s, self.settings.mode, self.settings.base_rate_wpm)
                .for_event(&event);
            self.gateway.submit(plan).ok()
        });

        Processed {
            record,
            classification: cls,
            persisted,
            narration,
            suggestion,
        }
    }

    /// Feeds ingested items through the pipeline and tallies the outcome.
    pub fn ingest(&self, items: impl IntoIterator<Item = IngestItem>) -> IngestSummary {
        let mut s = IngestSummary::default();
        for item in items {
            match item {
                IngestItem::Event(ev) => {
                    s.events += 1;
                    if self.process(ev).narration.is_some_and(|u| u.status != UtteranceStatus::Muted) {
                        s.narrated += 1;
                    }
                }
                IngestItem::Malformed(_) => {
                    s.malformed += 1;
                    self.note_malformed();
                }
            }
        }
        s
    }

    /// Re-injects recorded events at their original spacing divided by `speed`.
    /// Each event is stamped with its injection time.
    pub fn replay(&self, events: Vec<ExceptionEvent>, speed: f64) -> Result<IngestSummary, ReplayError> {
        let offsets = crate::ingest::replay_offsets(&events, speed)?;
        let start = Instant::now();
        let mut s = IngestSummary::default();
        for (mut ev, off) in events.into_iter().zip(offsets) {
            let wait = off.saturating_sub(start.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
            ev.captured_at = self.clock.now();
            s.events += 1;
            if self.process(ev).narration.is_some() {
                s.narrated += 1;
            }
        }
        Ok(s)
    }

    pub fn timings(&self) -> Vec<PipelineTimings> {
        let mut v: Vec<PipelineTimings> = lock(&self.timings).values().cloned().collect();
        v.sort_by_key(|t| t.event_id);
        v
    }

    pub fn get(&self, id: u64) -> Option<LedgerRecord> {
        lock(&self.state).ledger.get(id).cloned()
    }

    pub fn query(&self, q: &LedgerQuery) -> QueryPage {
        lock(&self.state).ledger.query(q)
    }

    pub fn set_resolution(&self, id: u64, text: &str) -> Result<LedgerRecord, LedgerError> {
        lock(&self.state).ledger.set_resolution(id, text).cloned()
    }

    pub fn ledger_path(&self) -> Option<PathBuf> {
        lock(&self.state).ledger.path().map(Path::to_path_buf)
    }

    /// Source lines around the innermost frame plus doc links for the
    /// exception and each cause.
    pub fn context(&self, id: u64) -> Option<ContextView> {
        let record = self.get(id)?;
        let event = record.to_event();
        let snippet = match event.innermost() {
            Some(f) => extract_context(f, &self.settings.source_root),
            None => ContextSnippet {
                lines: Vec::new(),
                reason: Some(crate::trace::REASON_UNAVAILABLE.to_string()),
            },
        };
        let mut docs = Vec::new();
        for ev in std::iter::once(&event).chain(event.cause_chain.iter()) {
            if docs.iter().any(|d: &DocLink| d.exception == ev.exception_type) {
                continue;
            }
            docs.push(DocLink {
                exception: ev.exception_type.clone(),
                url: gen_doc_url(&ev.exception_type, &origin_for(ev, &self.taxonomy)),
            });
        }
        Some(ContextView {
            id,
            file: record.file,
            line: record.line,
            snippet,
            docs,
        })
    }

    /// Speaks a stored record again.
    pub fn narrate_record(&self, id: u64) -> Result<UtteranceRecord, LedgerError> {
        let record = self.get(id).ok_or(LedgerError::NotFound(id))?;
        let mut event = record.to_event();
        event.captured_at = self.clock.now();
        let cls = record.classification();
        let text = render_message(&event, &cls, self.settings.mode, &self.templates);
        let plan = plan_prosody(&text, &cls, self.settings.mode, self.settings.base_rate_wpm)
            .for_event(&event);
        self.gateway
            .submit(plan)
            .map_err(|e| LedgerError::StorageFailure(std::io::Error::other(e)))
    }

    pub fn stats(&self) -> SessionStats {
        let now = self.clock.now();
        let mut st = lock(&self.state);
        let now = now.max(DateTime::from_timestamp_millis(st.last_now_ms).unwrap_or(now));
        let hotspots = st
            .ledger
            .hotspots(now)
            .into_iter()
            .map(|(s, count)| Hotspot {
                exception: s.exception,
                file: s.file,
                line: s.line,
                count,
            })
            .collect();
        SessionStats {
            window_secs: st.ledger.window_secs(),
            hotspots,
            latency: self.gateway.latency_report().ok(),
            counters: st.counters,
            records: st.ledger.len(),
        }
    }

    /// Waits for queued speech, then stops the gateway.
    pub fn finish(&self, timeout: Duration) {
        self.gateway.wait_idle(timeout);
        self.gateway.shutdown(false);
    }
}
