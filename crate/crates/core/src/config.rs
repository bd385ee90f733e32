//! Session settings and the TOML config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{ConfigError, TaxonomyTable};
use crate::ledger::DEFAULT_WINDOW_SECS;
use crate::narrate::{NarrationMode, TemplateSet, DEFAULT_RATE_WPM};
use crate::speech::{Backend, BackendKind};

pub const DEFAULT_LEDGER_PATH: &str = "audible_trace_errors.jsonl";
pub const DEFAULT_VOICE: &str = "female";
pub const DEFAULT_COMMAND: &str = "espeak-ng -v {voice} -s {rate} -p 50 {text}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureMode {
    #[default]
    Text,
    Structured,
    Both,
}

impl CaptureMode {
    pub fn reads_text(self) -> bool {
        matches!(self, CaptureMode::Text | CaptureMode::Both)
    }

    pub fn reads_structured(self) -> bool {
        matches!(self, CaptureMode::Structured | CaptureMode::Both)
    }
}

impl FromStr for CaptureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(CaptureMode::Text),
            "structured" => Ok(CaptureMode::Structured),
            "both" => Ok(CaptureMode::Both),
            other => Err(format!("unknown capture mode {other:?}")),
        }
    }
}

impl fmt::Display for CaptureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaptureMode::Text => "text",
            CaptureMode::Structured => "structured",
            CaptureMode::Both => "both",
        })
    }
}

/// Resolved settings for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub mode: NarrationMode,
    pub backend: Backend,
    pub base_rate_wpm: u32,
    pub voice: String,
    /// `None` keeps history in memory only.
    pub ledger_path: Option<PathBuf>,
    pub serve_port: Option<u16>,
    pub capture: CaptureMode,
    pub mute: bool,
    pub window_secs: u64,
    pub source_root: PathBuf,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mode: NarrationMode::Standard,
            backend: Backend::Transcript {
                path: None,
                sleep_scale: 1.0,
            },
            base_rate_wpm: DEFAULT_RATE_WPM,
            voice: DEFAULT_VOICE.to_string(),
            ledger_path: Some(PathBuf::from(DEFAULT_LEDGER_PATH)),
            serve_port: None,
            capture: CaptureMode::Text,
            mute: false,
            window_secs: DEFAULT_WINDOW_SECS,
            source_root: PathBuf::from("."),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |name: &str, reason: &str| ConfigError::InvalidEntry {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if self.base_rate_wpm == 0 {
            return Err(bad("rate", "must be positive"));
        }
        if self.serve_port == Some(0) {
            return Err(bad("serve", "port must be between 1 and 65535"));
        }
        if self.window_secs == 0 {
            return Err(bad("window", "must be positive"));
        }
        if let Backend::Transcript { sleep_scale, .. } = &self.backend {
            if !(sleep_scale.is_finite() && *sleep_scale >= 0.0) {
                return Err(bad("sleep_scale", "must be a non-negative number"));
            }
        }
        Ok(())
    }
}

/// The `[session]` table. Every key is optional so layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    pub mode: Option<NarrationMode>,
    pub backend: Option<String>,
    pub command: Option<String>,
    pub transcript: Option<PathBuf>,
    pub sleep_scale: Option<f64>,
    pub rate: Option<u32>,
    pub voice: Option<String>,
    pub log: Option<PathBuf>,
    pub serve: Option<u16>,
    pub capture: Option<CaptureMode>,
    pub mute: Option<bool>,
    pub window: Option<u64>,
    pub source_root: Option<PathBuf>,
}

impl SessionSection {
    /// Fields set in `over` take precedence.
    pub fn merged_with(self, over: SessionSection) -> SessionSection {
        SessionSection {
            mode: over.mode.or(self.mode),
            backend: over.backend.or(self.backend),
            command: over.command.or(self.command),
            transcript: over.transcript.or(self.transcript),
            sleep_scale: over.sleep_scale.or(self.sleep_scale),
            rate: over.rate.or(self.rate),
            voice: over.voice.or(self.voice),
            log: over.log.or(self.log),
            serve: over.serve.or(self.serve),
            capture: over.capture.or(self.capture),
            mute: over.mute.or(self.mute),
            window: over.window.or(self.window),
            source_root: over.source_root.or(self.source_root),
        }
    }

    pub fn resolve(self) -> Result<SessionConfig, ConfigError> {
        let d = SessionConfig::default();
        let voice = self.voice.unwrap_or(d.voice);
        let kind = match self.backend.as_deref() {
            Some(s) => s.parse::<BackendKind>().map_err(|reason| ConfigError::InvalidEntry {
                name: "backend".into(),
                reason,
            })?,
            None => BackendKind::Transcript,
        };
        let backend = match kind {
            BackendKind::Transcript => Backend::Transcript {
                path: self.transcript,
                sleep_scale: self.sleep_scale.unwrap_or(1.0),
            },
            BackendKind::ExternalCommand => Backend::ExternalCommand {
                command: self.command.unwrap_or_else(|| DEFAULT_COMMAND.to_string()),
                voice: voice.clone(),
            },
            BackendKind::Null => Backend::Null,
        };
        let cfg = SessionConfig {
            mode: self.mode.unwrap_or(d.mode),
            backend,
            base_rate_wpm: self.rate.unwrap_or(d.base_rate_wpm),
            voice,
            ledger_path: self.log.or(d.ledger_path),
            serve_port: self.serve,
            capture: self.capture.unwrap_or(d.capture),
            mute: self.mute.unwrap_or(d.mute),
            window_secs: self.window.unwrap_or(d.window_secs),
            source_root: self.source_root.unwrap_or(d.source_root),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One config document with `[session]`, `[taxonomy]` and `[templates]` sections.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub session: SessionSection,
    #[serde(default)]
    pub taxonomy: toml::Table,
    #[serde(default)]
    pub templates: toml::Table,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Malformed(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn taxonomy_table(&self) -> Result<TaxonomyTable, ConfigError> {
        TaxonomyTable::builtin().with_overrides(&self.taxonomy)
    }

    pub fn template_set(&self) -> Result<TemplateSet, ConfigError> {
        TemplateSet::default().with_overrides(&self.templates)
    }
}
