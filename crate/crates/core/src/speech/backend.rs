use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::Duration;

use crate::clock::{Clock, SystemClock};
use crate::narrate::{Chunk, NarrationPlan};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BackendFailure(pub String);

/// Plays one chunk at a time. Owned by the gateway's playback thread.
pub trait SpeechBackend: Send {
    fn speak_chunk(&mut self, plan: &NarrationPlan, chunk: &Chunk) -> Result<(), BackendFailure>;

    /// Called before the first chunk of plans that carry an alert tone.
    fn alert_tone(&mut self, _plan: &NarrationPlan) -> Result<(), BackendFailure> {
        Ok(())
    }

    fn kind(&self) -> BackendKind;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Transcript,
    ExternalCommand,
    Null,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transcript" => Ok(BackendKind::Transcript),
            "command" | "external_command" => Ok(BackendKind::ExternalCommand),
            "null" | "none" => Ok(BackendKind::Null),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

/// Settings for building a backend.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    /// Writes one tab-separated line per chunk. `sleep_scale` multiplies the
    /// simulated speaking time; zero disables sleeping.
    Transcript {
        path: Option<PathBuf>,
        sleep_scale: f64,
    },
    /// Runs `command` once per chunk after placeholder substitution.
    ExternalCommand { command: String, voice: String },
    Null,
}

impl Backend {
    pub fn kind(&self) -> BackendKind {
        match self {
            Backend::Transcript { .. } => BackendKind::Transcript,
            Backend::ExternalCommand { .. } => BackendKind::ExternalCommand,
            Backend::Null => BackendKind::Null,
        }
    }

    pub fn build(&self) -> io::Result<Box<dyn SpeechBackend>> {
        Ok(match self {
            Backend::Transcript { path, sleep_scale } => {
                let out: Box<dyn Write + Send> = match path {
                    Some(p) => Box::new(OpenOptions::new().create(true).append(true).open(p)?),
                    None => Box::new(io::sink()),
                };
                Box::new(TranscriptBackend::new(out, Arc::new(SystemClock), *sleep_scale))
            }
            Backend::ExternalCommand { command, voice } => {
                Box::new(CommandBackend::new(command, voice.clone()).map_err(io::Error::other)?)
            }
            Backend::Null => Box::new(NullBackend),
        })
    }
}

pub struct NullBackend;

impl SpeechBackend for NullBackend {
    fn speak_chunk(&mut self, _: &NarrationPlan, _: &Chunk) -> Result<(), BackendFailure> {
        Ok(())
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Null
    }
}

/// Formats a rate multiplier without trailing zeros: 1.25, 1.1, 1, 0.85.
pub fn format_rate(rate: f64) -> String {
    let s = format!("{rate:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

pub struct TranscriptBackend {
    out: Box<dyn Write + Send>,
    clock: Arc<dyn Clock>,
    sleep_scale: f64,
}

impl TranscriptBackend {
    pub fn new(out: Box<dyn Write + Send>, clock: Arc<dyn Clock>, sleep_scale: f64) -> Self {
        TranscriptBackend {
            out,
            clock,
            sleep_scale,
        }
    }

    pub fn to_file(path: &std::path::Path, sleep_scale: f64) -> io::Result<Self> {
        let f: File = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self::new(Box::new(f), Arc::new(SystemClock), sleep_scale))
    }

    fn pause(&self, ms: f64) {
        let ms = ms * self.sleep_scale;
        if ms > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(ms / 1000.0));
        }
    }
}

/// One transcript line: `<timestamp>\t<event_id>\t<pitch_cents>\t<rate_multiplier>\t<text>`.
pub fn transcript_line(
    ts: chrono::DateTime<chrono::Utc>,
    plan: &NarrationPlan,
    chunk: &Chunk,
) -> String {
    let text: String = chunk
        .text
        .chars()
        .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
        .collect();
    format!(
        "{}\t{}\t{}\t{}\t{}\n",
        ts.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        plan.event_id,
        chunk.pitch_shift_cents,
        format_rate(chunk.rate_multiplier),
        text
    )
}

impl SpeechBackend for TranscriptBackend {
    fn speak_chunk(&mut self, plan: &NarrationPlan, chunk: &Chunk) -> Result<(), BackendFailure> {
        let line = transcript_line(self.clock.now(), plan, chunk);
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| BackendFailure(format!("transcript write failed: {e}")))?;
        self.pause(chunk.speech_ms(plan.base_rate_wpm) + chunk.pause_after_ms as f64);
        Ok(())
    }

    fn alert_tone(&mut self, plan: &NarrationPlan) -> Result<(), BackendFailure> {
        self.pause(plan.alert_tone_ms as f64);
        Ok(())
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Transcript
    }
}

/// Runs an external speech command per chunk.
///
/// Placeholders in the command template: `{text}`, `{rate}` (effective words
/// per minute), `{rate_multiplier}`, `{pitch}` (cents), `{voice}`. The
/// template is split into arguments shell-style and run without a shell.
pub struct CommandBackend {
    argv: Vec<String>,
    voice: String,
}

impl CommandBackend {
    pub fn new(template: &str, voice: String) -> Result<Self, String> {
        let argv = shell_words::split(template).map_err(|e| format!("bad command template: {e}"))?;
        if argv.is_empty() {
            return Err("empty command template".into());
        }
        Ok(CommandBackend { argv, voice })
    }

    pub fn expand(&self, plan: &NarrationPlan, chunk: &Chunk) -> Vec<String> {
        let rate = (plan.base_rate_wpm as f64 * chunk.rate_multiplier).round() as i64;
        self.argv
            .iter()
            .map(|arg| {
                arg.replace("{text}", &chunk.text)
                    .replace("{rate_multiplier}", &format_rate(chunk.rate_multiplier))
                    .replace("{rate}", &rate.to_string())
                    .replace("{pitch}", &chunk.pitch_shift_cents.to_string())
                    .replace("{voice}", &self.voice)
            })
            .collect()
    }
}

impl SpeechBackend for CommandBackend {
    fn speak_chunk(&mut self, plan: &NarrationPlan, chunk: &Chunk) -> Result<(), BackendFailure> {
        let argv = self.expand(plan, chunk);
        let status = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map_err(|e| BackendFailure(format!("backend spawn failed: {e}")))?;
        match status.code() {
            Some(0) => {
                if chunk.pause_after_ms > 0 {
                    std::thread::sleep(Duration::from_millis(chunk.pause_after_ms as u64));
                }
                Ok(())
            }
            Some(code) => Err(BackendFailure(format!("backend exit {code}"))),
            None => Err(BackendFailure("backend killed by signal".into())),
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::ExternalCommand
    }
}
