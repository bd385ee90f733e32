//! Line-level grammar of the interpreter's default traceback renderer.

use std::sync::LazyLock;

use regex::Regex;

pub const HEADER: &str = "Traceback (most recent call last):";
pub const CONTEXT_SEPARATOR: &str =
    "During handling of the above exception, another exception occurred:";
pub const CAUSE_SEPARATOR: &str =
    "The above exception was the direct cause of the following exception:";

static FILE_RECORD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"^[ \t]+File "(.+)", line (\d+)(?:, in (.+))?$"#).unwrap()
});

static EXCEPTION_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^([A-Za-z_]\w*(?:\.(?:<locals>|[A-Za-z_]\w*))*)(?::(?: (.*))?)?$").unwrap()
});

static HEADERLESS_TRIGGER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_][\w.]*(?:Error|Warning):").unwrap());

static REPEATED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\[Previous line repeated (\d+) more times?\]$").unwrap()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Header,
    FileRecord,
    Separator,
    Blank,
    /// Indented line that is not a file record: source text, carets, repeat markers.
    Indented,
    /// A column-zero `Type: message` line.
    Exception { headerless_trigger: bool },
    Other,
}

pub fn classify_line(line: &str) -> LineKind {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() {
        return LineKind::Blank;
    }
    if line == HEADER {
        return LineKind::Header;
    }
    if is_separator(line) {
        return LineKind::Separator;
    }
    if line.starts_with([' ', '\t']) {
        if FILE_RECORD.is_match(line) {
            return LineKind::FileRecord;
        }
        return LineKind::Indented;
    }
    if EXCEPTION_LINE.is_match(line) {
        return LineKind::Exception {
            headerless_trigger: HEADERLESS_TRIGGER.is_match(line),
        };
    }
    LineKind::Other
}

pub fn is_separator(line: &str) -> bool {
    let t = line.trim();
    t == CONTEXT_SEPARATOR || t == CAUSE_SEPARATOR
}

/// Looks like a frame record, whether or not it parses.
pub fn is_file_record_like(line: &str) -> bool {
    line.starts_with([' ', '\t']) && line.trim_start().starts_with("File \"")
}

/// Splits a frame record into (file, line, function). `None` when malformed.
pub fn parse_file_record(line: &str) -> Option<(String, u32, Option<String>)> {
    let caps = FILE_RECORD.captures(line)?;
    let lineno: u32 = caps[2].parse().ok().filter(|&n| n >= 1)?;
    Some((
        caps[1].to_string(),
        lineno,
        caps.get(3).map(|m| m.as_str().to_string()),
    ))
}

/// Splits `Type: message` into its parts; the message is empty when the colon form is absent.
pub fn parse_exception_line(line: &str) -> Option<(String, String)> {
    let caps = EXCEPTION_LINE.captures(line)?;
    Some((
        caps[1].to_string(),
        caps.get(2).map_or(String::new(), |m| m.as_str().to_string()),
    ))
}

pub fn parse_repeat_marker(trimmed: &str) -> Option<usize> {
    REPEATED.captures(trimmed)?.get(1)?.as_str().parse().ok()
}

pub fn is_caret_line(trimmed: &str) -> bool {
    !trimmed.is_empty() && trimmed.chars().all(|c| matches!(c, '^' | '~' | ' '))
}
