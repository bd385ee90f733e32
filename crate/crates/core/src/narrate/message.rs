use std::sync::LazyLock;

use regex::Regex;

use super::template::{Fields, TemplateSet};
use super::NarrationMode;
use crate::classify::Classification;
use crate::event::ExceptionEvent;

static AT_ADDRESS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r" at 0[xX][0-9a-fA-F]+").unwrap());
static BARE_ADDRESS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"0[xX][0-9a-fA-F]+").unwrap());

/// Removes hexadecimal addresses and collapses whitespace to single spaces.
///
/// Deletion repeats to a fixpoint because removing one token can join its
/// neighbours into a new one.
pub fn filter_text(text: &str) -> String {
    let mut cur = AT_ADDRESS.replace_all(text, "").into_owned();
    loop {
        let next = BARE_ADDRESS.replace_all(&cur, "");
        if next.len() == cur.len() {
            break;
        }
        cur = next.into_owned();
    }
    cur.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Message pattern → plain phrase, for the dyslexia profile.
static SIMPLIFICATIONS: LazyLock<Vec<(Regex, &'static str)>> = LazyLock::new(|| {
    [
        (
            r"^unsupported operand type\(s\) for \+: '(?:int|float|complex)' and 'str'$",
            "Cannot add text to number",
        ),
        (
            r#"^can only concatenate str \(not "(?:int|float|complex)"\) to str$"#,
            "Cannot add number to text",
        ),
        (
            r"^(?:float |integer |complex )?(?:division|modulo)(?: or modulo)? by zero$|^float (?:modulo|divmod\(\))$",
            "Cannot divide by zero",
        ),
        (r"^(?:list|tuple|string) index out of range$", "That position does not exist"),
        (r"^name '(\w+)' is not defined$", "The name $1 is not defined"),
    ]
    .into_iter()
    .map(|(p, r)| (Regex::new(p).unwrap(), r))
    .collect()
});

/// Plain-language replacement for a message, if the table has one.
pub fn simplify(message: &str) -> Option<String> {
    SIMPLIFICATIONS.iter().find_map(|(re, phrase)| {
        re.captures(message).map(|caps| {
            let mut out = String::new();
            caps.expand(phrase, &mut out);
            out
        })
    })
}

fn file_name(path: &str) -> &str {
    path.rsplit(['/', '\\']).next().filter(|s| !s.is_empty()).unwrap_or(path)
}

/// Renders the spoken message for an event.
///
/// Location comes from the innermost frame, spoken as the file name only.
/// In dyslexia mode a message covered by the simplification table replaces
/// the template entirely.
pub fn render_message(
    event: &ExceptionEvent,
    cls: &Classification,
    mode: NarrationMode,
    templates: &TemplateSet,
) -> String {
    let (filename, lineno) = event
        .innermost()
        .map_or(("<unknown>", 0), |f| (file_name(&f.file), f.line));

    let simplified = match mode {
        NarrationMode::Dyslexia => simplify(&event.message),
        NarrationMode::Standard => None,
    };

    let body = match simplified {
        Some(plain) => plain,
        None => templates.select(&event.exception_type, cls.severity).render(&Fields {
            exc_type: &event.exception_type,
            details: &event.message,
            filename,
            lineno,
            key: &event.message,
        }),
    };

    let text = match templates.prefix(cls.severity) {
        Some(prefix) if !body.starts_with(prefix.trim_end()) => format!("{prefix}{body}"),
        _ => body,
    };
    filter_text(&text)
}
