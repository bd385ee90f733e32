use super::grammar::{self, LineKind};
use super::TraceError;
use crate::event::{CaptureSource, ExceptionEvent, StackFrame};

/// Module-level frames carry this function name when the record omits `, in <fn>`.
pub const MODULE_FUNCTION: &str = "<module>";

/// Parses one traceback block (possibly chained) into an event.
///
/// The last-printed exception is returned; earlier exceptions in the chain
/// land in `cause_chain`, earliest first. Frame records that cannot be split
/// are dropped and counted in `malformed_frames`.
pub fn parse_traceback(text: &str) -> Result<ExceptionEvent, TraceError> {
    let lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();

    let mut segments: Vec<&[&str]> = Vec::new();
    let mut seg_start = 0;
    for (i, line) in lines.iter().enumerate() {
        if grammar::is_separator(line) {
            segments.push(&lines[seg_start..i]);
            seg_start = i + 1;
        }
    }
    segments.push(&lines[seg_start..]);

    let chained = segments.len() > 1;
    let mut parsed = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        // Causes that were never raised print without a header or frames.
        let allow_bare = chained && i + 1 < segments.len();
        match parse_segment(seg, allow_bare) {
            Some(ev) => parsed.push(ev),
            None if i + 1 == segments.len() => return Err(TraceError::NoTracebackFound),
            None => {}
        }
    }
    let mut last = parsed.pop().ok_or(TraceError::NoTracebackFound)?;
    last.cause_chain = parsed;
    Ok(last)
}

fn parse_segment(lines: &[&str], allow_bare: bool) -> Option<ExceptionEvent> {
    let start = lines
        .iter()
        .position(|l| matches!(grammar::classify_line(l), LineKind::Header | LineKind::FileRecord));

    let Some(start) = start else {
        if !allow_bare {
            return None;
        }
        let line = lines.iter().find(|l| !l.trim().is_empty())?;
        let (ty, msg) = grammar::parse_exception_line(line)?;
        return Some(ExceptionEvent::new(ty, msg, Vec::new(), CaptureSource::ParsedText));
    };

    let body_from = if lines[start] == grammar::HEADER {
        start + 1
    } else {
        start
    };

    let mut frames: Vec<StackFrame> = Vec::new();
    let mut malformed = 0usize;
    let mut expect_code = false;
    let mut exception: Option<(String, String)> = None;

    for line in &lines[body_from..] {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            expect_code = false;
            continue;
        }
        if grammar::is_file_record_like(line) {
            match grammar::parse_file_record(line) {
                Some((file, lineno, function)) => {
                    frames.push(StackFrame::new(
                        file,
                        lineno,
                        function.unwrap_or_else(|| MODULE_FUNCTION.to_string()),
                    ));
                    expect_code = true;
                }
                None => {
                    malformed += 1;
                    expect_code = false;
                }
            }
            continue;
        }
        if line.starts_with([' ', '\t']) {
            if let Some(n) = grammar::parse_repeat_marker(trimmed) {
                if let Some(last) = frames.last().cloned() {
                    frames.extend(std::iter::repeat_n(last, n));
                }
            } else if expect_code && !grammar::is_caret_line(trimmed) {
                if let Some(f) = frames.last_mut() {
                    f.code_line = Some(trimmed.to_string());
                }
            }
            expect_code = false;
            continue;
        }
        expect_code = false;
        if let Some(parts) = grammar::parse_exception_line(line) {
            exception = Some(parts);
            break;
        }
    }

    let (ty, msg) = exception?;
    let mut ev = ExceptionEvent::new(ty, msg, frames, CaptureSource::ParsedText);
    ev.malformed_frames = malformed;
    Some(ev)
}
