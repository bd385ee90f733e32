use std::path::PathBuf;

use anyhow::Context;
use audible_trace_core::config::{CaptureMode, ConfigFile, SessionSection};
use audible_trace_core::narrate::{NarrationMode, TemplateSet};
use audible_trace_core::{SessionConfig, TaxonomyTable};
use clap::Args;

/// Flags shared by every command that runs a session.
#[derive(Debug, Clone, Default, Args)]
pub struct SessionArgs {
    /// Config file with [session], [taxonomy] and [templates] sections.
    #[arg(long, env = "AUDIBLE_TRACE_CONFIG")]
    pub config: Option<PathBuf>,

    #[arg(long, env = "AUDIBLE_TRACE_MODE", value_parser = ["standard", "dyslexia"])]
    pub mode: Option<String>,

    #[arg(long, env = "AUDIBLE_TRACE_BACKEND", value_parser = ["transcript", "command", "null"])]
    pub backend: Option<String>,

    /// Command run per chunk by the command backend; supports {text}, {rate},
    /// {rate_multiplier}, {pitch} and {voice}.
    #[arg(long, env = "AUDIBLE_TRACE_COMMAND")]
    pub command: Option<String>,

    /// Where the transcript backend writes its lines.
    #[arg(long, env = "AUDIBLE_TRACE_TRANSCRIPT")]
    pub transcript: Option<PathBuf>,

    /// Multiplier on simulated speaking time for the transcript backend.
    #[arg(long, env = "AUDIBLE_TRACE_SLEEP_SCALE")]
    pub sleep_scale: Option<f64>,

    /// Base speaking rate in words per minute.
    #[arg(long, env = "AUDIBLE_TRACE_RATE")]
    pub rate: Option<u32>,

    #[arg(long, env = "AUDIBLE_TRACE_VOICE")]
    pub voice: Option<String>,

    #[arg(long, env = "AUDIBLE_TRACE_MUTE")]
    pub mute: bool,

    /// Error history file (JSON lines).
    #[arg(long, env = "AUDIBLE_TRACE_LOG")]
    pub log: Option<PathBuf>,

    /// Serve the dashboard on this port.
    #[arg(long, env = "AUDIBLE_TRACE_SERVE")]
    pub serve: Option<u16>,

    /// Listen on all interfaces instead of loopback.
    #[arg(long)]
    pub external: bool,

    /// Keep serving the dashboard after the work is done, until interrupted.
    #[arg(long)]
    pub linger: bool,

    /// Recurrence window in seconds.
    #[arg(long, env = "AUDIBLE_TRACE_WINDOW")]
    pub window: Option<u64>,

    /// Directory that relative frame paths resolve against.
    #[arg(long)]
    pub source_root: Option<PathBuf>,

    /// Directory of dashboard assets to serve at /.
    #[arg(long, env = "AUDIBLE_TRACE_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
}

pub struct Resolved {
    pub config: SessionConfig,
    pub taxonomy: TaxonomyTable,
    pub templates: TemplateSet,
}

impl SessionArgs {
    fn section(&self, capture: Option<CaptureMode>) -> anyhow::Result<SessionSection> {
        let mode = self
            .mode
            .as_deref()
            .map(str::parse::<NarrationMode>)
            .transpose()
            .map_err(anyhow::Error::msg)?;
        Ok(SessionSection {
            mode,
            backend: self.backend.clone(),
            command: self.command.clone(),
            transcript: self.transcript.clone(),
            sleep_scale: self.sleep_scale,
            rate: self.rate,
            voice: self.voice.clone(),
            log: self.log.clone(),
            serve: self.serve,
            capture,
            mute: self.mute.then_some(true),
            window: self.window,
            source_root: self.source_root.clone(),
        })
    }

    /// Flags and environment over the config file over defaults.
    pub fn resolve(&self, capture: Option<CaptureMode>) -> anyhow::Result<Resolved> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ConfigFile::default(),
        };
        let config = file.session.clone().merged_with(self.section(capture)?).resolve()?;
        Ok(Resolved {
            config,
            taxonomy: file.taxonomy_table()?,
            templates: file.template_set()?,
        })
    }
}
