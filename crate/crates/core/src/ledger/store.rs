use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::record::{Amendment, LedgerLine, LedgerRecord, Signature};
use super::recurrence::RecurrenceWindow;
use crate::classify::Classification;
use crate::event::ExceptionEvent;

pub const DEFAULT_PAGE_LIMIT: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("storage failure: {0}")]
    StorageFailure(#[from] std::io::Error),
    #[error("no record with id {0}")]
    NotFound(u64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LedgerQuery {
    pub exception_type: Option<String>,
    /// Matches the recorded path exactly or by trailing path components.
    pub file: Option<String>,
    pub since: Option<DateTime<Utc>>,
    pub resolved: Option<bool>,
    pub offset: usize,
    pub limit: Option<usize>,
}

impl LedgerQuery {
    fn matches(&self, r: &LedgerRecord) -> bool {
        if self.exception_type.as_deref().is_some_and(|t| t != r.exception) {
            return false;
        }
        if let Some(f) = self.file.as_deref() {
            let tail = r.file.strip_suffix(f);
            let ok = tail.is_some_and(|t| t.is_empty() || t.ends_with('/') || t.ends_with('\\'));
            if !ok {
                return false;
            }
        }
        if self.since.is_some_and(|s| r.x.captured_at < s) {
            return false;
        }
        if self.resolved.is_some_and(|want| want != r.resolution.is_some()) {
            return false;
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryPage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub records: Vec<LedgerRecord>,
}

/// Append-only JSON-lines error history with an in-memory index.
#[derive(Debug)]
pub struct Ledger {
    path: Option<PathBuf>,
    file: Option<File>,
    records: Vec<LedgerRecord>,
    index: HashMap<u64, usize>,
    frequencies: HashMap<Signature, u64>,
    recurrence: RecurrenceWindow,
    next_id: u64,
    skipped_lines: usize,
}

impl Ledger {
    /// A ledger that keeps records in memory only.
    pub fn in_memory(window_secs: u64) -> Self {
        Ledger {
            path: None,
            file: None,
            records: Vec::new(),
            index: HashMap::new(),
            frequencies: HashMap::new(),
            recurrence: RecurrenceWindow::new(window_secs),
            next_id: 1,
            skipped_lines: 0,
        }
    }

    /// Opens or creates the file at `path`, loading any existing history.
    /// Lines that do not parse are skipped and counted.
    pub fn open(path: impl AsRef<Path>, window_secs: u64) -> Result<Self, LedgerError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut ledger = Ledger::in_memory(window_secs);
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.split(b'\n').enumerate() {
                let line = line?;
                let text = String::from_utf8_lossy(&line);
                let text = text.trim();
                if text.is_empty() {
                    continue;
                }
                match serde_json::from_str::<LedgerLine>(text) {
                    Ok(LedgerLine::Record(r)) => ledger.insert(*r),
                    Ok(LedgerLine::Amend(a)) => {
                        if ledger.apply_amendment(&a).is_err() {
                            log::warn!("ledger line {}: amendment for unknown id {}", n + 1, a.amend);
                            ledger.skipped_lines += 1;
                        }
                    }
                    Err(e) => {
                        log::warn!("ledger line {}: {e}", n + 1);
                        ledger.skipped_lines += 1;
                    }
                }
            }
        }
        ledger.file = Some(OpenOptions::new().create(true).append(true).open(path)?);
        ledger.path = Some(path.to_path_buf());
        Ok(ledger)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    /// The id the next appended record receives unless the event carries a larger one.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&LedgerRecord> {
        self.index.get(&id).map(|&i| &self.records[i])
    }

    pub fn frequency(&self, sig: &Signature) -> u64 {
        self.frequencies.get(sig).copied().unwrap_or(0)
    }

    fn insert(&mut self, r: LedgerRecord) {
        let sig = r.signature();
        let count = self.frequencies.entry(sig.clone()).or_insert(0);
        *count = (*count).max(r.frequency);
        self.recurrence.record(&sig, r.x.captured_at.timestamp_millis());
        self.next_id = self.next_id.max(r.x.id + 1);
        self.index.insert(r.x.id, self.records.len());
        self.records.push(r);
    }

    fn apply_amendment(&mut self, a: &Amendment) -> Result<(), LedgerError> {
        let i = *self.index.get(&a.amend).ok_or(LedgerError::NotFound(a.amend))?;
        self.records[i].resolution = Some(a.resolution.clone());
        Ok(())
    }

    fn write_line(&mut self, line: &str) -> Result<(), LedgerError> {
        if let Some(f) = self.file.as_mut() {
            let mut buf = Vec::with_capacity(line.len() + 1);
            buf.extend_from_slice(line.as_bytes());
            buf.push(b'\n');
            f.write_all(&buf)?;
            f.flush()?;
        }
        Ok(())
    }

    /// Writes one record and returns it. The id is `event.event_id` when that
    /// is unused and non-zero, otherwise the next free id. Nothing is kept in
    /// memory if the write fails.
    pub fn append(
        &mut self,
        event: &ExceptionEvent,
        cls: &Classification,
    ) -> Result<LedgerRecord, LedgerError> {
        let id = if event.event_id != 0 && !self.index.contains_key(&event.event_id) {
            event.event_id
        } else {
            self.next_id
        };
        let sig = Signature::of(event);
        let frequency = self.frequency(&sig) + 1;
        let record = LedgerRecord::new(event, cls, id, frequency);
        let line = serde_json::to_string(&record).map_err(std::io::Error::from)?;
        self.write_line(&line)?;
        self.insert(record.clone());
        Ok(record)
    }

    /// Records a resolution by appending an amendment line; the latest one wins.
    pub fn set_resolution(&mut self, id: u64, text: &str) -> Result<&LedgerRecord, LedgerError> {
        if !self.index.contains_key(&id) {
            return Err(LedgerError::NotFound(id));
        }
        let a = Amendment {
            amend: id,
            resolution: text.to_string(),
        };
        let line = serde_json::to_string(&a).map_err(std::io::Error::from)?;
        self.write_line(&line)?;
        self.apply_amendment(&a)?;
        Ok(self.get(id).expect("indexed"))
    }

    /// Matching records, newest first.
    pub fn query(&self, q: &LedgerQuery) -> QueryPage {
        let limit = q.limit.unwrap_or(DEFAULT_PAGE_LIMIT);
        let matching: Vec<&LedgerRecord> =
            self.records.iter().rev().filter(|r| q.matches(r)).collect();
        QueryPage {
            total: matching.len(),
            offset: q.offset,
            limit,
            records: matching
                .into_iter()
                .skip(q.offset)
                .take(limit)
                .cloned()
                .collect(),
        }
    }

    /// Whether `sig` recurs often enough within the window to warrant a suggestion.
    pub fn recurrence_check(&mut self, sig: &Signature, now: DateTime<Utc>) -> bool {
        self.recurrence.check(sig, now.timestamp_millis())
    }

    pub fn window_count(&mut self, sig: &Signature, now: DateTime<Utc>) -> usize {
        self.recurrence.count(sig, now.timestamp_millis())
    }

    pub fn window_secs(&self) -> u64 {
        self.recurrence.window_secs()
    }

    pub fn hotspots(&mut self, now: DateTime<Utc>) -> Vec<(Signature, usize)> {
        self.recurrence.hotspots(now.timestamp_millis())
    }
}
