//! Diagnostic families and severity tiers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::event::ExceptionEvent;

const BUILTIN_TAXONOMY: &str = include_str!("../data/taxonomy.toml");

/// A Warning-tier classification with at least this many frames is raised to High.
pub const DEPTH_BUMP_FRAMES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    SystemErrors,
    CodeDefects,
    TypeIssues,
    ResourceProblems,
    LogicalFlaws,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::SystemErrors,
        Family::CodeDefects,
        Family::TypeIssues,
        Family::ResourceProblems,
        Family::LogicalFlaws,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::SystemErrors => "SystemErrors",
            Family::CodeDefects => "CodeDefects",
            Family::TypeIssues => "TypeIssues",
            Family::ResourceProblems => "ResourceProblems",
            Family::LogicalFlaws => "LogicalFlaws",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '_' | '-' | ' '))
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for Family {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize(s);
        Family::ALL
            .into_iter()
            .find(|f| normalize(f.as_str()) == n)
            .ok_or_else(|| ConfigError::UnknownFamily(s.to_string()))
    }
}

/// Ordered so that `Critical > High > Warning > Info`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Warning,
    High,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Critical,
        Severity::High,
        Severity::Warning,
        Severity::Info,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "Critical",
            Severity::High => "High",
            Severity::Warning => "Warning",
            Severity::Info => "Info",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize(s);
        Severity::ALL
            .into_iter()
            .find(|v| normalize(v.as_str()) == n)
            .ok_or_else(|| ConfigError::UnknownSeverity(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchedBy {
    ExactName,
    BaseClass,
    SuffixRule,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub family: Family,
    pub severity: Severity,
    pub matched_by: MatchedBy,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("unknown severity {0:?}")]
    UnknownSeverity(String),
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("invalid entry for {name:?}: {reason}")]
    InvalidEntry { name: String, reason: String },
    #[error("unknown template placeholder {{{placeholder}}} in {name:?}")]
    UnknownPlaceholder { name: String, placeholder: String },
    #[error("malformed document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    family: Family,
    severity: Severity,
    builtin: bool,
}

/// Name → (family, severity) map plus the set of always-critical names.
/// Immutable once loaded.
#[derive(Debug, Clone)]
pub struct TaxonomyTable {
    entries: BTreeMap<String, Entry>,
    critical_names: BTreeSet<String>,
}

#[derive(Deserialize)]
struct EntryDoc {
    family: String,
    severity: String,
}

#[derive(Deserialize)]
struct BuiltinDoc {
    critical: Vec<String>,
    exceptions: toml::Table,
}

fn parse_entries(table: &toml::Table) -> Result<Vec<(String, Family, Severity)>, ConfigError> {
    let mut out = Vec::with_capacity(table.len());
    for (name, value) in table {
        let doc: EntryDoc = value
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::InvalidEntry {
                name: name.clone(),
                reason: e.message().to_string(),
            })?;
        out.push((name.clone(), doc.family.parse()?, doc.severity.parse()?));
    }
    Ok(out)
}

fn parse_document(text: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| {
        let msg = e.message().to_string();
        if msg.contains("duplicate key") {
            ConfigError::DuplicateKey(msg)
        } else {
            ConfigError::Malformed(msg)
        }
    })
}

impl TaxonomyTable {
    /// The shipped table.
    pub fn builtin() -> Self {
        let doc: BuiltinDoc = toml::from_str(BUILTIN_TAXONOMY).expect("shipped taxonomy parses");
        let entries = parse_entries(&doc.exceptions)
            .expect("shipped taxonomy is valid")
            .into_iter()
            .map(|(name, family, severity)| {
                (
                    name,
                    Entry {
                        family,
                        severity,
                        builtin: true,
                    },
                )
            })
            .collect();
        TaxonomyTable {
            entries,
            critical_names: doc.critical.into_iter().collect(),
        }
    }

    /// Applies a flat `name = { family, severity }` table on top of this one.
    pub fn with_overrides(mut self, overrides: &toml::Table) -> Result<Self, ConfigError> {
        for (name, family, severity) in parse_entries(overrides)? {
            let builtin = self.entries.get(&name).is_some_and(|e| e.builtin);
            if severity == Severity::Critical {
                self.critical_names.insert(name.clone());
            } else {
                self.critical_names.remove(&name);
            }
            self.entries.insert(
                name,
                Entry {
                    family,
                    severity,
                    builtin,
                },
            );
        }
        Ok(self)
    }

    pub fn lookup(&self, name: &str) -> Option<(Family, Severity)> {
        self.entries.get(name).map(|e| (e.family, e.severity))
    }

    /// True for names that ship in the built-in table, regardless of overrides.
    pub fn is_builtin(&self, name: &str) -> bool {
        self.entries.get(name).is_some_and(|e| e.builtin)
    }

    pub fn builtin_names(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|(_, e)| e.builtin)
            .map(|(n, _)| n.as_str())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn critical_names(&self) -> &BTreeSet<String> {
        &self.critical_names
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for TaxonomyTable {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Built-in table merged with an optional override document.
pub fn load_taxonomy(overrides: Option<&str>) -> Result<TaxonomyTable, ConfigError> {
    let table = TaxonomyTable::builtin();
    match overrides {
        None => Ok(table),
        Some(text) => table.with_overrides(&parse_document(text)?),
    }
}

/// Classifies from the exception name, the hook-reported base classes and the frame count.
pub fn classify(event: &ExceptionEvent, table: &TaxonomyTable) -> Classification {
    classify_parts(
        &event.exception_type,
        event.base_classes.as_deref(),
        event.frames.len(),
        table,
    )
}

pub fn classify_parts(
    name: &str,
    base_classes: Option<&[String]>,
    frame_count: usize,
    table: &TaxonomyTable,
) -> Classification {
    let resolved = table
        .lookup(name)
        .map(|(f, s)| (f, s, MatchedBy::ExactName))
        .or_else(|| {
            base_classes?
                .iter()
                .find_map(|b| table.lookup(b))
                .map(|(f, s)| (f, s, MatchedBy::BaseClass))
        })
        .or_else(|| {
            name.ends_with("Warning")
                .then_some((Family::LogicalFlaws, Severity::Info, MatchedBy::SuffixRule))
        })
        .unwrap_or((Family::LogicalFlaws, Severity::Warning, MatchedBy::Default));

    let (family, mut severity, matched_by) = resolved;
    if table.critical_names.contains(name) {
        severity = Severity::Critical;
    }
    if severity == Severity::Warning && frame_count >= DEPTH_BUMP_FRAMES {
        severity = Severity::High;
    }
    Classification {
        family,
        severity,
        matched_by,
    }
}
