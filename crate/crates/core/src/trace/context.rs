use std::path::Path;

use serde::Serialize;

use crate::event::StackFrame;

/// Lines shown on each side of the error line.
pub const CONTEXT_RADIUS: u32 = 2;

pub const REASON_UNAVAILABLE: &str = "source unavailable";
pub const REASON_OUT_OF_RANGE: &str = "line out of range";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextLine {
    pub number: u32,
    pub text: String,
    pub is_error: bool,
}

/// Source lines around a frame. Empty with a `reason` when the source cannot be shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct ContextSnippet {
    pub lines: Vec<ContextLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ContextSnippet {
    fn unavailable(reason: &str) -> Self {
        ContextSnippet {
            lines: Vec::new(),
            reason: Some(reason.to_string()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

pub fn extract_context(frame: &StackFrame, source_root: &Path) -> ContextSnippet {
    // Pseudo-files such as "<stdin>" or "<string>" have no source on disk.
    if frame.file.starts_with('<') && frame.file.ends_with('>') {
        return ContextSnippet::unavailable(REASON_UNAVAILABLE);
    }
    let path = Path::new(&frame.file);
    let path = if path.is_absolute() {
        path.to_path_buf()
    } else {
        source_root.join(path)
    };
    let Ok(bytes) = std::fs::read(&path) else {
        return ContextSnippet::unavailable(REASON_UNAVAILABLE);
    };
    let source = String::from_utf8_lossy(&bytes);
    let total = source.lines().count() as u32;
    if frame.line == 0 || frame.line > total {
        return ContextSnippet::unavailable(REASON_OUT_OF_RANGE);
    }
    let first = frame.line.saturating_sub(CONTEXT_RADIUS).max(1);
    let last = (frame.line + CONTEXT_RADIUS).min(total);
    let lines = source
        .lines()
        .enumerate()
        .map(|(i, text)| (i as u32 + 1, text))
        .skip_while(|&(n, _)| n < first)
        .take_while(|&(n, _)| n <= last)
        .map(|(number, text)| ContextLine {
            number,
            text: text.to_string(),
            is_error: number == frame.line,
        })
        .collect();
    ContextSnippet {
        lines,
        reason: None,
    }
}
