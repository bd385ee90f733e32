use std::ffi::OsString;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

pub const SITECUSTOMIZE: &str = include_str!("../shim/sitecustomize.py");
pub const SHIM_MODULE: &str = include_str!("../shim/audible_trace_shim.py");

pub const ENV_EVENT_PATH: &str = "AUDIBLE_TRACE_EVENT_PATH";

/// The hook files and the event channel for one supervised run.
pub struct ShimInstall {
    dir: TempDir,
    channel: PathBuf,
}

impl ShimInstall {
    pub fn create() -> io::Result<Self> {
        let dir = tempfile::Builder::new().prefix("audible-trace-").tempdir()?;
        std::fs::write(dir.path().join("sitecustomize.py"), SITECUSTOMIZE)?;
        std::fs::write(dir.path().join("audible_trace_shim.py"), SHIM_MODULE)?;
        let channel = dir.path().join("events.jsonl");
        std::fs::File::create(&channel)?;
        Ok(ShimInstall { dir, channel })
    }

    pub fn channel(&self) -> &Path {
        &self.channel
    }

    /// Puts the hook first on the child's module path and points it at the channel.
    pub fn apply(&self, cmd: &mut Command) {
        let mut path = OsString::from(self.dir.path());
        if let Some(existing) = std::env::var_os("PYTHONPATH").filter(|p| !p.is_empty()) {
            path.push(if cfg!(windows) { ";" } else { ":" });
            path.push(existing);
        }
        cmd.env("PYTHONPATH", path);
        cmd.env(ENV_EVENT_PATH, &self.channel);
    }
}
