use std::collections::BTreeMap;
use std::fmt;

use crate::classify::{ConfigError, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placeholder {
    ExcType,
    Details,
    Filename,
    Lineno,
    Key,
}

impl Placeholder {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "exc_type" => Placeholder::ExcType,
            "details" => Placeholder::Details,
            "filename" => Placeholder::Filename,
            "lineno" => Placeholder::Lineno,
            "key" => Placeholder::Key,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Placeholder::ExcType => "exc_type",
            Placeholder::Details => "details",
            Placeholder::Filename => "filename",
            Placeholder::Lineno => "lineno",
            Placeholder::Key => "key",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(Placeholder),
}

/// A `{placeholder}` template. `{{` and `}}` are literal braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    segments: Vec<Segment>,
}

/// Values substituted into a template.
#[derive(Debug, Clone, Default)]
pub struct Fields<'a> {
    pub exc_type: &'a str,
    pub details: &'a str,
    pub filename: &'a str,
    pub lineno: u32,
    pub key: &'a str,
}

impl Template {
    pub fn parse(name: &str, source: &str) -> Result<Self, ConfigError> {
        let mut segments = Vec::new();
        let mut lit = String::new();
        let mut chars = source.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    lit.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    lit.push('}');
                }
                '{' => {
                    let mut ident = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(ch) => ident.push(ch),
                            None => {
                                return Err(ConfigError::Malformed(format!(
                                    "unclosed placeholder in template {name:?}"
                                )))
                            }
                        }
                    }
                    let slot = Placeholder::parse(&ident).ok_or_else(|| {
                        ConfigError::UnknownPlaceholder {
                            name: name.to_string(),
                            placeholder: ident.clone(),
                        }
                    })?;
                    if !lit.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut lit)));
                    }
                    segments.push(Segment::Slot(slot));
                }
                '}' => {
                    return Err(ConfigError::Malformed(format!(
                        "unmatched '}}' in template {name:?}"
                    )))
                }
                _ => lit.push(c),
            }
        }
        if !lit.is_empty() {
            segments.push(Segment::Literal(lit));
        }
        Ok(Template {
            source: source.to_string(),
            segments,
        })
    }

    pub fn render(&self, fields: &Fields<'_>) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(Placeholder::ExcType) => out.push_str(fields.exc_type),
                Segment::Slot(Placeholder::Details) => out.push_str(fields.details),
                Segment::Slot(Placeholder::Filename) => out.push_str(fields.filename),
                Segment::Slot(Placeholder::Lineno) => out.push_str(&fields.lineno.to_string()),
                Segment::Slot(Placeholder::Key) => out.push_str(fields.key),
            }
        }
        out
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(p) => Some(p.name()),
            Segment::Literal(_) => None,
        })
    }

    /// True when no location placeholder comes before the first type designation,
    /// i.e. the template opens with `{exc_type}` or with literal text.
    pub fn leads_with_type(&self) -> bool {
        match self.segments.first() {
            Some(Segment::Slot(Placeholder::ExcType)) | Some(Segment::Literal(_)) => {
                let first_loc = self.segments.iter().position(|s| {
                    matches!(s, Segment::Slot(Placeholder::Filename | Placeholder::Lineno))
                });
                first_loc != Some(0)
            }
            _ => false,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

pub const DEFAULT_TEMPLATE: &str = "{exc_type}: {details} in {filename} line {lineno}";
/// The terse fallback kept for compatibility; see [`TemplateSet::with_compat_fallback`].
pub const COMPAT_FALLBACK_TEMPLATE: &str = "{exc_type} occurred: {details}";
pub const CRITICAL_KEY: &str = "Critical";
pub const CRITICAL_PREFIX: &str = "Immediate attention needed: ";

const SHIPPED: &[(&str, &str)] = &[
    ("SyntaxError", "Syntax violation in {filename} line {lineno}: {details}"),
    ("TypeError", "Type mismatch: {details}"),
    (CRITICAL_KEY, "Immediate attention needed: {exc_type} - {details}"),
    (
        "KeyError",
        "{exc_type}: {details} key missing in dictionary at {filename} line {lineno}",
    ),
];

/// Narration templates keyed by exception name, with a default and per-severity prefixes.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, Template>,
    default_template: Template,
    severity_prefix: BTreeMap<Severity, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let templates = SHIPPED
            .iter()
            .map(|(k, v)| (k.to_string(), Template::parse(k, v).expect("shipped template")))
            .collect();
        TemplateSet {
            templates,
            default_template: Template::parse("default", DEFAULT_TEMPLATE).unwrap(),
            severity_prefix: BTreeMap::from([(Severity::Critical, CRITICAL_PREFIX.to_string())]),
        }
    }
}

impl TemplateSet {
    pub fn with_compat_fallback(mut self) -> Self {
        self.default_template = Template::parse("default", COMPAT_FALLBACK_TEMPLATE).unwrap();
        self
    }

    /// Applies a `name = "template"` table. The key `default` replaces the default template.
    pub fn with_overrides(mut self, overrides: &toml::Table) -> Result<Self, ConfigError> {
        for (name, value) in overrides {
            let text = value.as_str().ok_or_else(|| ConfigError::InvalidEntry {
                name: name.clone(),
                reason: "template must be a string".into(),
            })?;
            let t = Template::parse(name, text)?;
            if name == "default" {
                self.default_template = t;
            } else {
                self.templates.insert(name.clone(), t);
            }
        }
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&Template> {
        self.templates.get(name)
    }

    pub fn default_template(&self) -> &Template {
        &self.default_template
    }

    pub fn prefix(&self, severity: Severity) -> Option<&str> {
        self.severity_prefix.get(&severity).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Template)> {
        self.templates
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain(std::iter::once(("default", &self.default_template)))
    }

    /// Template for an exception: exact name, then the Critical template for critical
    /// events, then the default.
    pub fn select(&self, exception_type: &str, severity: Severity) -> &Template {
        self.templates
            .get(exception_type)
            .or_else(|| {
                (severity == Severity::Critical)
                    .then(|| self.templates.get(CRITICAL_KEY))
                    .flatten()
            })
            .unwrap_or(&self.default_template)
    }
}
