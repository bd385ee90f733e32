use std::collections::{HashMap, VecDeque};

use super::record::Signature;

pub const DEFAULT_WINDOW_SECS: u64 = 600;
/// Occurrences within the window needed to fire: more than three.
pub const TRIGGER_COUNT: usize = 4;

#[derive(Debug, Default, Clone)]
struct SignatureWindow {
    /// Occurrence times in ms, ascending.
    times: VecDeque<i64>,
    last_fired: Option<i64>,
}

/// Per-signature occurrence times over a sliding window `(now - window, now]`.
///
/// Queries must use non-decreasing `now`; entries at or before `now - window`
/// are purged on query.
#[derive(Debug, Clone)]
pub struct RecurrenceWindow {
    window_ms: i64,
    entries: HashMap<Signature, SignatureWindow>,
}

impl Default for RecurrenceWindow {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW_SECS)
    }
}

impl RecurrenceWindow {
    pub fn new(window_secs: u64) -> Self {
        RecurrenceWindow {
            window_ms: window_secs as i64 * 1000,
            entries: HashMap::new(),
        }
    }

    pub fn window_secs(&self) -> u64 {
        (self.window_ms / 1000) as u64
    }

    pub fn record(&mut self, sig: &Signature, at_ms: i64) {
        let w = self.entries.entry(sig.clone()).or_default();
        // Keep ascending order even if a late event arrives out of order.
        let pos = w.times.partition_point(|&t| t <= at_ms);
        w.times.insert(pos, at_ms);
    }

    /// Occurrences of `sig` in `(now - window, now]`.
    pub fn count(&mut self, sig: &Signature, now_ms: i64) -> usize {
        let window_ms = self.window_ms;
        let Some(w) = self.entries.get_mut(sig) else {
            return 0;
        };
        purge(w, now_ms - window_ms);
        w.times.iter().take_while(|&&t| t <= now_ms).count()
    }

    /// True when the signature has reached the trigger count inside the window
    /// and has not already fired within the last window length.
    pub fn check(&mut self, sig: &Signature, now_ms: i64) -> bool {
        let count = self.count(sig, now_ms);
        let window_ms = self.window_ms;
        let Some(w) = self.entries.get_mut(sig) else {
            return false;
        };
        let cooling = w.last_fired.is_some_and(|f| f > now_ms - window_ms);
        if count >= TRIGGER_COUNT && !cooling {
            w.last_fired = Some(now_ms);
            true
        } else {
            false
        }
    }

    /// Signatures with at least one occurrence in the window, busiest first.
    pub fn hotspots(&mut self, now_ms: i64) -> Vec<(Signature, usize)> {
        let sigs: Vec<Signature> = self.entries.keys().cloned().collect();
        let mut out: Vec<(Signature, usize)> = sigs
            .into_iter()
            .map(|s| {
                let c = self.count(&s, now_ms);
                (s, c)
            })
            .filter(|(_, c)| *c > 0)
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

fn purge(w: &mut SignatureWindow, cutoff: i64) {
    while w.times.front().is_some_and(|&t| t <= cutoff) {
        w.times.pop_front();
    }
}
