//! Streaming detection of traceback blocks inside an interleaved error stream.

use super::grammar::{self, LineKind};

/// Blocks longer than this are abandoned rather than buffered without bound.
const MAX_BLOCK_BYTES: usize = 8 << 20;

/// A headerless syntax-error block must show its `Type: message` line within this many lines.
const HEADERLESS_LOOKAHEAD: usize = 4;

/// A traceback block located in a byte stream. Offsets are absolute byte
/// positions since the start of the stream; `text` holds exactly the bytes
/// in `start_offset..end_offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracebackSpan {
    pub start_offset: u64,
    pub end_offset: u64,
    pub text: Vec<u8>,
}

impl TracebackSpan {
    pub fn text_lossy(&self) -> String {
        String::from_utf8_lossy(&self.text).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum State {
    #[default]
    Idle,
    /// Saw an indented `File "...", line N` record with no header above it.
    Candidate { start: u64, seen: usize },
    /// Inside a block, reading frame records.
    Frames { start: u64 },
    /// Just read the `Type: message` line; the block may still continue with a chain.
    AfterException { start: u64, end: u64 },
    AfterBlank { start: u64, end: u64 },
    /// Read a chain separator sentence; waiting for the next header.
    ChainSep { start: u64, end: u64 },
}

/// Carry state for [`detect_boundaries`]. One detector per stream.
#[derive(Debug, Clone, Default)]
pub struct BoundaryDetector {
    buf: Vec<u8>,
    buf_start: u64,
    /// Offset of the first byte of the line currently being accumulated.
    line_start: u64,
    state: State,
}

/// Functional form: feed one chunk, get the completed spans and the updated state.
pub fn detect_boundaries(
    chunk: &[u8],
    mut state: BoundaryDetector,
) -> (Vec<TracebackSpan>, BoundaryDetector) {
    let spans = state.feed(chunk);
    (spans, state)
}

impl BoundaryDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total bytes consumed so far.
    pub fn position(&self) -> u64 {
        self.buf_start + self.buf.len() as u64
    }

    /// True while a block is open and waiting for more lines.
    pub fn is_pending(&self) -> bool {
        self.state != State::Idle
    }

    pub fn feed(&mut self, chunk: &[u8]) -> Vec<TracebackSpan> {
        let mut out = Vec::new();
        let mut search_from = (self.line_start - self.buf_start) as usize;
        self.buf.extend_from_slice(chunk);
        while let Some(nl) = self.buf[search_from..].iter().position(|&b| b == b'\n') {
            let line_end = search_from + nl;
            let start = self.line_start;
            let end = self.buf_start + line_end as u64;
            self.process_line(start, end, &mut out);
            self.line_start = end + 1;
            search_from = line_end + 1;
        }
        self.compact();
        out
    }

    /// Completes any block that is only waiting to see whether a chain follows.
    /// Used when the stream goes quiet; an incomplete trailing line is left alone.
    pub fn flush_idle(&mut self) -> Vec<TracebackSpan> {
        let mut out = Vec::new();
        if self.line_start == self.position() {
            self.close_pending(&mut out);
            self.compact();
        }
        out
    }

    /// End of stream: treats a trailing unterminated line as complete and closes open blocks.
    pub fn finish(&mut self) -> Vec<TracebackSpan> {
        let mut out = Vec::new();
        let end = self.position();
        if self.line_start < end {
            let start = self.line_start;
            self.process_line(start, end, &mut out);
            self.line_start = end;
        }
        self.close_pending(&mut out);
        self.compact();
        out
    }

    fn close_pending(&mut self, out: &mut Vec<TracebackSpan>) {
        match self.state {
            State::AfterException { start, end }
            | State::AfterBlank { start, end }
            | State::ChainSep { start, end } => self.emit(start, end, out),
            _ => {}
        }
        self.state = State::Idle;
    }

    fn slice(&self, start: u64, end: u64) -> &[u8] {
        let a = (start - self.buf_start) as usize;
        let b = (end - self.buf_start) as usize;
        &self.buf[a..b]
    }

    fn emit(&self, start: u64, end: u64, out: &mut Vec<TracebackSpan>) {
        if start < end {
            out.push(TracebackSpan {
                start_offset: start,
                end_offset: end,
                text: self.slice(start, end).to_vec(),
            });
        }
    }

    fn process_line(&mut self, start: u64, end: u64, out: &mut Vec<TracebackSpan>) {
        let raw = self.slice(start, end);
        let (raw, end) = match raw.strip_suffix(b"\r") {
            Some(r) => (r, end - 1),
            None => (raw, end),
        };
        let line = String::from_utf8_lossy(raw);
        let kind = grammar::classify_line(&line);
        // A line may need a second look after the state machine falls back to idle.
        for _ in 0..2 {
            let (next, reprocess) = self.transition(kind, start, end, out);
            self.state = next;
            if !reprocess {
                break;
            }
        }
        if let Some(block_start) = self.block_start() {
            if end - block_start > MAX_BLOCK_BYTES as u64 {
                self.state = State::Idle;
            }
        }
    }

    fn transition(
        &self,
        kind: LineKind,
        start: u64,
        end: u64,
        out: &mut Vec<TracebackSpan>,
    ) -> (State, bool) {
        use LineKind::*;
        match self.state {
            State::Idle => match kind {
                Header => (State::Frames { start }, false),
                FileRecord => (State::Candidate { start, seen: 0 }, false),
                _ => (State::Idle, false),
            },
            State::Candidate { start: cstart, seen } => match kind {
                Header => (State::Frames { start }, false),
                FileRecord => (State::Candidate { start, seen: 0 }, false),
                Exception { headerless_trigger: true } => {
                    (State::AfterException { start: cstart, end }, false)
                }
                _ if seen + 1 >= HEADERLESS_LOOKAHEAD => (State::Idle, false),
                _ => (
                    State::Candidate {
                        start: cstart,
                        seen: seen + 1,
                    },
                    false,
                ),
            },
            State::Frames { start: bstart } => match kind {
                Header => (State::Frames { start }, false),
                FileRecord | Indented => (State::Frames { start: bstart }, false),
                Exception { .. } => (State::AfterException { start: bstart, end }, false),
                Blank => (State::Idle, false),
                Separator | Other => (State::Idle, true),
            },
            State::AfterException { start: bstart, end: bend } => match kind {
                Blank => (State::AfterBlank { start: bstart, end: bend }, false),
                Separator => (State::ChainSep { start: bstart, end: bend }, false),
                _ => {
                    self.emit(bstart, bend, out);
                    (State::Idle, true)
                }
            },
            State::AfterBlank { start: bstart, end: bend } => match kind {
                Separator => (State::ChainSep { start: bstart, end: bend }, false),
                Blank => {
                    self.emit(bstart, bend, out);
                    (State::Idle, false)
                }
                _ => {
                    self.emit(bstart, bend, out);
                    (State::Idle, true)
                }
            },
            State::ChainSep { start: bstart, end: bend } => match kind {
                Blank => (State::ChainSep { start: bstart, end: bend }, false),
                Header => (State::Frames { start: bstart }, false),
                _ => {
                    self.emit(bstart, bend, out);
                    (State::Idle, true)
                }
            },
        }
    }

    fn block_start(&self) -> Option<u64> {
        match self.state {
            State::Idle => None,
            State::Candidate { start, .. }
            | State::Frames { start }
            | State::AfterException { start, .. }
            | State::AfterBlank { start, .. }
            | State::ChainSep { start, .. } => Some(start),
        }
    }

    /// Drops buffered bytes that no open block can still need.
    fn compact(&mut self) {
        let keep_from = self.block_start().unwrap_or(self.line_start).min(self.line_start);
        let drop = (keep_from - self.buf_start) as usize;
        if drop > 0 {
            self.buf.drain(..drop);
            self.buf_start = keep_from;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZDE: &str = "Traceback (most recent call last):\n  File \"data_processor.py\", line 188, in process\n    ratio = a / b\nZeroDivisionError: float division by zero";

    fn run_all(stream: &[u8], cuts: &[usize]) -> Vec<TracebackSpan> {
        let mut d = BoundaryDetector::new();
        let mut spans = Vec::new();
        let mut prev = 0;
        for &c in cuts.iter().chain(std::iter::once(&stream.len())) {
            spans.extend(d.feed(&stream[prev..c]));
            prev = c;
        }
        spans.extend(d.finish());
        spans
    }

    #[test]
    fn single_block_among_log_lines() {
        let stream = format!("log one\nlog two\nlog three\n{ZDE}\nafter one\nafter two\n");
        let spans = run_all(stream.as_bytes(), &[]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].text_lossy(), ZDE);
        let s = spans[0].start_offset as usize;
        let e = spans[0].end_offset as usize;
        assert_eq!(&stream.as_bytes()[s..e], ZDE.as_bytes());
    }

    #[test]
    fn nothing_to_find() {
        assert!(run_all(b"hello\nworld\n  indented line\nValueError: not in a block\n", &[]).is_empty());
    }

    #[test]
    fn back_to_back_blocks() {
        let stream = format!("{ZDE}\n\n{ZDE}\n");
        let spans = run_all(stream.as_bytes(), &[]);
        assert_eq!(spans.len(), 2);
        assert!(spans[0].end_offset < spans[1].start_offset);
    }

    #[test]
    fn chained_block_is_one_span() {
        let stream = "Traceback (most recent call last):\n  File \"a.py\", line 2, in <module>\n    d['x']\nKeyError: 'x'\n\nDuring handling of the above exception, another exception occurred:\n\nTraceback (most recent call last):\n  File \"a.py\", line 4, in <module>\n    1/0\nZeroDivisionError: division by zero\nnext\n";
        let spans = run_all(stream.as_bytes(), &[]);
        assert_eq!(spans.len(), 1);
        assert!(spans[0].text_lossy().ends_with("ZeroDivisionError: division by zero"));
        assert!(spans[0].text_lossy().starts_with("Traceback"));
    }

    #[test]
    fn headerless_syntax_error() {
        let stream = "  File \"/tmp/x.py\", line 3\n    def f(:\n          ^\nSyntaxError: invalid syntax\n";
        let spans = run_all(stream.as_bytes(), &[]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].start_offset, 0);
        assert!(spans[0].text_lossy().ends_with("SyntaxError: invalid syntax"));
    }

    #[test]
    fn headerless_needs_trigger_within_lookahead() {
        let stream = "  File \"/tmp/x.py\", line 3\na\nb\nc\nd\nSyntaxError: invalid syntax\n";
        assert!(run_all(stream.as_bytes(), &[]).is_empty());
    }

    #[test]
    fn pending_block_waits_for_next_line_until_flushed() {
        let mut d = BoundaryDetector::new();
        assert!(d.feed(format!("{ZDE}\n").as_bytes()).is_empty());
        assert!(d.is_pending());
        let spans = d.flush_idle();
        assert_eq!(spans.len(), 1);
        assert!(!d.is_pending());
    }

    #[test]
    fn crlf_lines() {
        let stream = ZDE.replace('\n', "\r\n") + "\r\nmore\r\n";
        let spans = run_all(stream.as_bytes(), &[]);
        assert_eq!(spans.len(), 1);
        assert!(spans[0].text_lossy().ends_with("float division by zero"));
    }

    #[test]
    fn aborted_block_does_not_swallow_next() {
        let stream = format!("Traceback (most recent call last):\n  File \"a.py\", line 1, in f\n\n{ZDE}\n");
        let spans = run_all(stream.as_bytes(), &[]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].text_lossy(), ZDE);
    }
}
