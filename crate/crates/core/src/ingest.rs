//! Reading captured events from logs, event files and recordings.

use std::io::{self, BufRead, Read};
use std::path::Path;
use std::time::Duration;

use crate::event::ExceptionEvent;
use crate::trace::{parse_structured_line, parse_traceback, BoundaryDetector};

#[derive(Debug, Clone, PartialEq)]
pub enum IngestItem {
    Event(ExceptionEvent),
    /// Raw input that looked like an event but could not be read as one.
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct IngestSummary {
    pub events: usize,
    pub narrated: usize,
    pub malformed: usize,
}

/// Finds and parses every traceback block in a text stream.
pub fn for_each_text_event<R: Read>(mut reader: R, mut f: impl FnMut(IngestItem)) -> io::Result<()> {
    let mut detector = BoundaryDetector::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut emit = |spans: Vec<crate::trace::TracebackSpan>| {
        for span in spans {
            let text = span.text_lossy();
            match parse_traceback(&text) {
                Ok(ev) => f(IngestItem::Event(ev)),
                Err(_) => f(IngestItem::Malformed(text)),
            }
        }
    };
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        emit(detector.feed(&buf[..n]));
    }
    emit(detector.finish());
    Ok(())
}

/// Reads one structured event per non-blank line.
pub fn for_each_jsonl_event<R: BufRead>(reader: R, mut f: impl FnMut(IngestItem)) -> io::Result<()> {
    for line in reader.split(b'\n') {
        let line = line?;
        let text = String::from_utf8_lossy(&line);
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        match parse_structured_line(text) {
            Ok(ev) => f(IngestItem::Event(ev)),
            Err(e) => {
                log::warn!("skipping event line: {e}: {text}");
                f(IngestItem::Malformed(text.to_string()));
            }
        }
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("cannot read recording: {0}")]
    FileUnreadable(#[from] io::Error),
    #[error("speed must be a positive finite number, got {0}")]
    InvalidSpeed(f64),
}

/// A recorded session: structured events in file order, malformed lines skipped.
pub fn load_recording(path: &Path) -> Result<(Vec<ExceptionEvent>, usize), ReplayError> {
    let file = std::fs::File::open(path)?;
    let mut events = Vec::new();
    let mut malformed = 0;
    for_each_jsonl_event(io::BufReader::new(file), |item| match item {
        IngestItem::Event(e) => events.push(e),
        IngestItem::Malformed(_) => malformed += 1,
    })?;
    Ok((events, malformed))
}

/// Injection offsets from the start of a replay: recorded gaps divided by `speed`.
/// Out-of-order timestamps inject immediately after their predecessor.
pub fn replay_offsets(events: &[ExceptionEvent], speed: f64) -> Result<Vec<Duration>, ReplayError> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(ReplayError::InvalidSpeed(speed));
    }
    let Some(first) = events.first() else {
        return Ok(Vec::new());
    };
    let t0 = first.captured_at;
    let mut last = 0.0f64;
    Ok(events
        .iter()
        .map(|e| {
            let gap = (e.captured_at - t0).num_milliseconds() as f64 / 1000.0 / speed;
            last = last.max(gap);
            Duration::from_secs_f64(last)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::CaptureSource;
    use chrono::DateTime;

    const TB: &str = "Traceback (most recent call last):\n  File \"a.py\", line 3, in <module>\n    1/0\nZeroDivisionError: division by zero\n";

    #[test]
    fn two_tracebacks_in_a_log() {
        let input = format!("starting\n{TB}log line\n{TB}");
        let mut n = 0;
        for_each_text_event(input.as_bytes(), |i| {
            assert!(matches!(i, IngestItem::Event(_)));
            n += 1;
        })
        .unwrap();
        assert_eq!(n, 2);
    }

    #[test]
    fn empty_input() {
        let mut n = 0;
        for_each_text_event(&b""[..], |_| n += 1).unwrap();
        for_each_jsonl_event(&b""[..], |_| n += 1).unwrap();
        assert_eq!(n, 0);
    }

    #[test]
    fn jsonl_with_bad_line() {
        let good = r#"{"schema_version":1,"type":"KeyError","message":"'a'","frames":[{"file":"a.py","line":1,"function":"f"}]}"#;
        let input = format!("{good}\nnot json\n{good}\n");
        let (mut ok, mut bad) = (0, 0);
        for_each_jsonl_event(input.as_bytes(), |i| match i {
            IngestItem::Event(_) => ok += 1,
            IngestItem::Malformed(_) => bad += 1,
        })
        .unwrap();
        assert_eq!((ok, bad), (2, 1));
    }

    #[test]
    fn offsets_scale_with_speed() {
        let evs: Vec<ExceptionEvent> = (0..3)
            .map(|i| {
                let mut e = ExceptionEvent::new("E", "", vec![], CaptureSource::StructuredHook);
                e.captured_at = DateTime::from_timestamp_millis(1_000_000 + i * 1000).unwrap();
                e
            })
            .collect();
        let offs = replay_offsets(&evs, 2.0).unwrap();
        assert_eq!(offs, [0, 500, 1000].map(Duration::from_millis));
        assert!(matches!(replay_offsets(&evs, 0.0), Err(ReplayError::InvalidSpeed(_))));
    }
}
