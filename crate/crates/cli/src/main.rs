use std::ffi::OsString;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use audible_trace_core::config::{CaptureMode, DEFAULT_LEDGER_PATH};
use audible_trace_core::ingest::{for_each_jsonl_event, for_each_text_event, load_recording, IngestItem};
use audible_trace_core::ledger::{gen_doc_url, origin_for_name, Ledger, DEFAULT_WINDOW_SECS};
use audible_trace_core::{Session, TaxonomyTable};
use audible_trace_dashboard::ServeError;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

mod options;
mod server;
mod shim;
mod supervise;

use options::{Resolved, SessionArgs};
use server::Dashboard;
use supervise::{ChildExit, Supervisor};

/// Upper bound on waiting for queued speech before exiting.
const DRAIN_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Parser)]
#[command(name = "audible-trace", version, about = "Speak Python exceptions as they happen")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program and narrate the exceptions it reports.
    Run {
        #[arg(long, value_enum, env = "AUDIBLE_TRACE_CAPTURE")]
        capture: Option<CaptureArg>,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(required = true, trailing_var_arg = true, allow_hyphen_values = true)]
        cmd: Vec<OsString>,
    },
    /// Narrate tracebacks or structured events read from standard input.
    Ingest {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Re-inject a recorded event file at its original pace.
    Replay {
        file: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Write per-event pipeline timings here as JSON lines.
        #[arg(long)]
        timings: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Print the documentation link for an exception name.
    Docs {
        name: String,
        /// Path of the innermost frame, used to spot third-party packages.
        #[arg(long)]
        file: Option<String>,
    },
    /// Summarize the error history.
    Stats {
        #[arg(long, env = "AUDIBLE_TRACE_LOG", default_value = DEFAULT_LEDGER_PATH)]
        log: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW_SECS)]
        window: u64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CaptureArg {
    Text,
    Structured,
    Both,
}

impl From<CaptureArg> for CaptureMode {
    fn from(c: CaptureArg) -> Self {
        match c {
            CaptureArg::Text => CaptureMode::Text,
            CaptureArg::Structured => CaptureMode::Structured,
            CaptureArg::Both => CaptureMode::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

fn open_session(r: &Resolved) -> anyhow::Result<Arc<Session>> {
    let session = Session::from_config(&r.config, r.taxonomy.clone(), r.templates.clone())
        .context("opening error history")?;
    Ok(Arc::new(session))
}

fn start_dashboard(args: &SessionArgs, r: &Resolved, session: &Arc<Session>) -> Result<Option<Dashboard>, ServeError> {
    let Some(port) = r.config.serve_port else {
        return Ok(None);
    };
    let d = Dashboard::start(Arc::clone(session), port, args.external, args.ui_dir.clone())?;
    eprintln!("audible-trace: dashboard at http://{}", d.addr());
    Ok(Some(d))
}

fn close_dashboard(d: Option<Dashboard>, linger: bool) {
    let Some(d) = d else { return };
    if linger {
        eprintln!("audible-trace: dashboard still serving at http://{}, interrupt to stop", d.addr());
        supervise::ignore_interrupts(false);
        loop {
            std::thread::park();
        }
    }
    d.stop();
}

fn print_json(v: &serde_json::Value) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run(capture: Option<CaptureMode>, args: SessionArgs, cmd: Vec<OsString>) -> anyhow::Result<i32> {
    let r = args.resolve(capture)?;
    let session = open_session(&r)?;
    let dashboard = match start_dashboard(&args, &r, &session) {
        Ok(d) => d,
        Err(ServeError::PortBusy(e)) => {
            eprintln!("audible-trace: {e}");
            return Ok(2);
        }
        Err(e) => return Err(e.into()),
    };
    let sup = Supervisor {
        capture: r.config.capture,
        session: Arc::clone(&session),
    };
    let exit = match sup.run(&cmd) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("audible-trace: cannot run {}: {e}", cmd[0].to_string_lossy());
            ChildExit::Code(supervise::spawn_failure_code(&e))
        }
    };
    session.finish(DRAIN_TIMEOUT);
    let c = session.counters();
    log::info!(
        "captured {} committed {} deduplicated {} malformed {}",
        c.captured,
        c.committed,
        c.deduplicated,
        c.malformed
    );
    close_dashboard(dashboard, args.linger);
    if let ChildExit::Signal(sig) = exit {
        supervise::reraise(sig);
    }
    Ok(exit.shell_code())
}

fn ingest(format: Format, args: SessionArgs) -> anyhow::Result<i32> {
    let r = args.resolve(None)?;
    let session = open_session(&r)?;
    let mut items: Vec<IngestItem> = Vec::new();
    let stdin = io::stdin().lock();
    match format {
        Format::Text => for_each_text_event(stdin, |i| items.push(i))?,
        Format::Jsonl => for_each_jsonl_event(BufReader::new(stdin), |i| items.push(i))?,
    }
    let summary = session.ingest(items);
    session.finish(DRAIN_TIMEOUT);
    print_json(&serde_json::to_value(summary)?)?;
    Ok(0)
}

fn replay(file: PathBuf, speed: f64, timings: Option<PathBuf>, args: SessionArgs) -> anyhow::Result<i32> {
    let r = args.resolve(None)?;
    let (events, malformed) = load_recording(&file)?;
    let session = open_session(&r)?;
    let dashboard = start_dashboard(&args, &r, &session)?;
    let mut summary = session.replay(events, speed)?;
    summary.malformed = malformed;
    session.finish(DRAIN_TIMEOUT);
    if let Some(path) = timings {
        let mut out = io::BufWriter::new(
            std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        for t in session.timings() {
            serde_json::to_writer(&mut out, &t)?;
            writeln!(out)?;
        }
        out.flush()?;
    }
    print_json(&json!({
        "events": summary.events,
        "narrated": summary.narrated,
        "malformed": summary.malformed,
        "latency": session.gateway().latency_report().ok(),
    }))?;
    close_dashboard(dashboard, args.linger);
    Ok(0)
}

fn docs(name: &str, file: Option<&str>) -> i32 {
    let origin = origin_for_name(name, file, &TaxonomyTable::builtin());
    println!("{}", gen_doc_url(name, &origin));
    0
}

fn stats(log: PathBuf, window: u64, as_json: bool) -> anyhow::Result<i32> {
    if window == 0 {
        anyhow::bail!("window must be positive");
    }
    let mut ledger = Ledger::open(&log, window).with_context(|| format!("reading {}", log.display()))?;
    let unresolved = ledger.records().iter().filter(|r| r.resolution.is_none()).count();
    let now = chrono::Utc::now();
    let hotspots = ledger.hotspots(now);
    if as_json {
        let hot: Vec<_> = hotspots
            .iter()
            .map(|(s, n)| json!({"exception": s.exception, "file": s.file, "line": s.line, "count": n}))
            .collect();
        print_json(&json!({
            "records": ledger.len(),
            "unresolved": unresolved,
            "skipped_lines": ledger.skipped_lines(),
            "window_secs": window,
            "hotspots": hot,
        }))?;
        return Ok(0);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "{} records, {} unresolved", ledger.len(), unresolved)?;
    if hotspots.is_empty() {
        writeln!(out, "no errors in the last {window} s")?;
    }
    for (s, n) in hotspots {
        writeln!(out, "{n:>5}  {}  {}:{}", s.exception, s.file, s.line)?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run {
            capture,
            session,
            cmd,
        } => run(capture.map(Into::into), session, cmd),
        Cmd::Ingest { format, session } => ingest(format, session),
        Cmd::Replay {
            file,
            speed,
            timings,
            session,
        } => replay(file, speed, timings, session),
        Cmd::Docs { name, file } => Ok(docs(&name, file.as_deref())),
        Cmd::Stats { log, window, json } => stats(log, window, json),
    };
    match result {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(e) => {
            eprintln!("audible-trace: {e:#}");
            ExitCode::from(2)
        }
    }
}
