use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::backend::SpeechBackend;
use super::latency::{latency_report, LatencyReport, NoData};
use crate::classify::Severity;
use crate::clock::{Clock, SystemClock};
use crate::narrate::{NarrationPlan, PlanKind};

/// Queued plans beyond this bound push out the oldest non-Critical plan.
pub const QUEUE_BOUND: usize = 8;
pub const REASON_COALESCED: &str = "coalesced";
pub const REASON_SHUTDOWN: &str = "shutdown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceStatus {
    Queued,
    Speaking,
    Spoken,
    Dropped,
    Muted,
}

impl UtteranceStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            UtteranceStatus::Spoken | UtteranceStatus::Dropped | UtteranceStatus::Muted
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: u64,
    pub event_id: u64,
    pub kind: PlanKind,
    pub severity: Severity,
    pub submitted_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub status: UtteranceStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<String>,
    #[serde(skip)]
    pub captured_at: Option<DateTime<Utc>>,
    #[serde(skip)]
    pub frame_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("speech gateway is closed")]
    GatewayClosed,
}

pub type StatusListener = Box<dyn Fn(&UtteranceRecord) + Send + Sync>;

struct Queued {
    plan: NarrationPlan,
    idx: usize,
}

#[derive(Default)]
struct QueueState {
    queue: VecDeque<Queued>,
    records: Vec<UtteranceRecord>,
    in_flight: Option<usize>,
    closed: bool,
    drain: bool,
    muted: bool,
}

struct Inner {
    state: Mutex<QueueState>,
    wake: Condvar,
    idle: Condvar,
    clock: Arc<dyn Clock>,
    listener: RwLock<Option<StatusListener>>,
}

impl Inner {
    fn lock(&self) -> MutexGuard<'_, QueueState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn notify(&self, records: &[UtteranceRecord]) {
        if records.is_empty() {
            return;
        }
        if let Some(l) = self.listener.read().unwrap_or_else(|e| e.into_inner()).as_ref() {
            for r in records {
                l(r);
            }
        }
    }
}

/// Serializes narration plans into one utterance stream over a single backend.
///
/// Critical plans jump ahead of queued non-Critical plans but never interrupt
/// the utterance in flight.
pub struct Gateway {
    inner: Arc<Inner>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl Gateway {
    pub fn start(backend: Box<dyn SpeechBackend>) -> Self {
        Self::with_clock(backend, Arc::new(SystemClock))
    }

    pub fn with_clock(mut backend: Box<dyn SpeechBackend>, clock: Arc<dyn Clock>) -> Self {
        let inner = Arc::new(Inner {
            state: Mutex::new(QueueState::default()),
            wake: Condvar::new(),
            idle: Condvar::new(),
            clock,
            listener: RwLock::new(None),
        });
        let loop_inner = Arc::clone(&inner);
        let worker = std::thread::Builder::new()
            .name("speech-playback".into())
            .spawn(move || playback_loop(&loop_inner, backend.as_mut()))
            .expect("spawn playback thread");
        Gateway {
            inner,
            worker: Mutex::new(Some(worker)),
        }
    }

    pub fn set_listener(&self, listener: StatusListener) {
        *self.inner.listener.write().unwrap_or_else(|e| e.into_inner()) = Some(listener);
    }

    pub fn set_muted(&self, muted: bool) {
        self.inner.lock().muted = muted;
    }

    pub fn is_muted(&self) -> bool {
        self.inner.lock().muted
    }

    pub fn submit(&self, plan: NarrationPlan) -> Result<UtteranceRecord, GatewayError> {
        let now = self.inner.clock.now();
        let mut notes = Vec::new();
        let record = {
            let mut st = self.inner.lock();
            if st.closed {
                return Err(GatewayError::GatewayClosed);
            }
            let idx = st.records.len();
            let mut record = UtteranceRecord {
                utterance_id: idx as u64 + 1,
                event_id: plan.event_id,
                kind: plan.kind,
                severity: plan.severity,
                submitted_at: now,
                started_at: None,
                finished_at: None,
                status: UtteranceStatus::Queued,
                drop_reason: None,
                captured_at: plan.captured_at,
                frame_count: plan.frame_count,
            };
            if st.muted {
                record.status = UtteranceStatus::Muted;
                st.records.push(record.clone());
                notes.push(record.clone());
                record
            } else {
                st.records.push(record.clone());
                let critical = plan.severity == Severity::Critical;
                let entry = Queued { plan, idx };
                if critical {
                    let pos = st
                        .queue
                        .iter()
                        .take_while(|q| q.plan.severity == Severity::Critical)
                        .count();
                    st.queue.insert(pos, entry);
                } else {
                    st.queue.push_back(entry);
                }
                while st.queue.len() > QUEUE_BOUND {
                    let Some(pos) = st
                        .queue
                        .iter()
                        .position(|q| q.plan.severity != Severity::Critical)
                    else {
                        break;
                    };
                    let dropped = st.queue.remove(pos).expect("position in range");
                    let r = &mut st.records[dropped.idx];
                    r.status = UtteranceStatus::Dropped;
                    r.drop_reason = Some(REASON_COALESCED.into());
                    notes.push(r.clone());
                }
                self.inner.wake.notify_all();
                st.records[idx].clone()
            }
        };
        self.inner.notify(&notes);
        Ok(record)
    }

    pub fn records(&self) -> Vec<UtteranceRecord> {
        self.inner.lock().records.clone()
    }

    pub fn record(&self, utterance_id: u64) -> Option<UtteranceRecord> {
        let st = self.inner.lock();
        st.records.get(utterance_id.checked_sub(1)? as usize).cloned()
    }

    pub fn queue_len(&self) -> usize {
        self.inner.lock().queue.len()
    }

    /// Blocks until nothing is queued or in flight. Returns false on timeout.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut st = self.inner.lock();
        while !st.queue.is_empty() || st.in_flight.is_some() {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return false;
            }
            st = self
                .inner
                .idle
                .wait_timeout(st, left)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        true
    }

    pub fn latency_report(&self) -> Result<LatencyReport, NoData> {
        latency_report(&self.records())
    }

    /// Stops accepting plans. With `drain`, queued plans are still spoken;
    /// otherwise they are dropped. Blocks until the playback thread exits.
    pub fn shutdown(&self, drain: bool) {
        let mut notes = Vec::new();
        {
            let mut st = self.inner.lock();
            st.closed = true;
            st.drain = drain;
            if !drain {
                while let Some(q) = st.queue.pop_front() {
                    let r = &mut st.records[q.idx];
                    r.status = UtteranceStatus::Dropped;
                    r.drop_reason = Some(REASON_SHUTDOWN.into());
                    notes.push(r.clone());
                }
            }
            self.inner.wake.notify_all();
        }
        self.inner.notify(&notes);
        if let Some(h) = self.worker.lock().unwrap_or_else(|e| e.into_inner()).take() {
            let _ = h.join();
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.shutdown(false);
    }
}

fn playback_loop(inner: &Inner, backend: &mut dyn SpeechBackend) {
    loop {
        let (plan, idx, started) = {
            let mut st = inner.lock();
            loop {
                if !st.queue.is_empty() && !(st.closed && !st.drain) {
                    break;
                }
                if st.closed {
                    return;
                }
                st = inner.wake.wait(st).unwrap_or_else(|e| e.into_inner());
            }
            let q = st.queue.pop_front().expect("queue non-empty");
            let now = inner.clock.now();
            st.in_flight = Some(q.idx);
            let r = &mut st.records[q.idx];
            r.started_at = Some(now);
            r.status = UtteranceStatus::Speaking;
            (q.plan, q.idx, r.clone())
        };
        inner.notify(&[started]);

        let result = (|| {
            if plan.has_alert_tone() {
                backend.alert_tone(&plan)?;
            }
            for chunk in &plan.chunks {
                backend.speak_chunk(&plan, chunk)?;
            }
            Ok::<_, super::backend::BackendFailure>(())
        })();
        if let Err(e) = &result {
            log::warn!("narration of event {} failed: {e}", plan.event_id);
        }

        let finished = {
            let mut st = inner.lock();
            let now = inner.clock.now();
            st.in_flight = None;
            let r = &mut st.records[idx];
            r.finished_at = Some(now);
            match result {
                Ok(()) => r.status = UtteranceStatus::Spoken,
                Err(e) => {
                    r.status = UtteranceStatus::Dropped;
                    r.drop_reason = Some(e.0);
                }
            }
            let out = r.clone();
            if st.queue.is_empty() {
                inner.idle.notify_all();
            }
            out
        };
        inner.notify(&[finished]);
    }
}
