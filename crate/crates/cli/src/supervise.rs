use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Read, Write};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use audible_trace_core::config::CaptureMode;
use audible_trace_core::dedup::{Deduper, TEXT_HOLD_MS};
use audible_trace_core::event::{now_ms, ExceptionEvent};
use audible_trace_core::trace::{
    parse_structured_line, parse_traceback, BoundaryDetector, TracebackSpan, SENTINEL_PREFIX,
};
use audible_trace_core::Session;

use crate::shim::ShimInstall;

/// Quiet time after which a finished-looking traceback is closed without
/// waiting for a possible chained continuation.
const IDLE_FLUSH: Duration = Duration::from_millis(50);
const CHANNEL_POLL: Duration = Duration::from_millis(10);
const SEQUENCER_TICK: Duration = Duration::from_millis(25);
const READ_BUF: usize = 16 * 1024;

pub enum Capture {
    Event(ExceptionEvent),
    Malformed,
}

pub struct Supervisor {
    pub capture: CaptureMode,
    pub session: Arc<Session>,
}

/// How the child ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChildExit {
    Code(i32),
    Signal(i32),
}

impl ChildExit {
    pub fn from_status(status: ExitStatus) -> Self {
        #[cfg(unix)]
        {
            use std::os::unix::process::ExitStatusExt;
            if let Some(sig) = status.signal() {
                return ChildExit::Signal(sig);
            }
        }
        ChildExit::Code(status.code().unwrap_or(1))
    }

    /// The status as a shell reports it: the code, or 128 plus the signal.
    pub fn shell_code(self) -> i32 {
        match self {
            ChildExit::Code(c) => c,
            ChildExit::Signal(s) => 128 + s,
        }
    }
}

/// Ends this process by the same signal that ended the child.
/// Returns only if the signal did not terminate us.
#[cfg(unix)]
pub fn reraise(sig: i32) {
    let _ = io::stdout().flush();
    let _ = io::stderr().flush();
    // SAFETY: resetting a disposition and raising a signal have no preconditions.
    unsafe {
        libc::signal(sig, libc::SIG_DFL);
        libc::raise(sig);
    }
}

#[cfg(not(unix))]
pub fn reraise(_sig: i32) {}

pub fn spawn_failure_code(e: &io::Error) -> i32 {
    match e.kind() {
        io::ErrorKind::PermissionDenied => 126,
        _ => 127,
    }
}

#[cfg(unix)]
pub fn ignore_interrupts(ignore: bool) {
    let action = if ignore { libc::SIG_IGN } else { libc::SIG_DFL };
    // SAFETY: installing a disposition constant for SIGINT has no preconditions.
    unsafe {
        libc::signal(libc::SIGINT, action);
    }
}

#[cfg(not(unix))]
pub fn ignore_interrupts(_ignore: bool) {}

fn forward<R: Read, W: Write>(mut from: R, mut to: W, tap: Option<Sender<Vec<u8>>>) {
    let mut buf = vec![0u8; READ_BUF];
    let mut to_ok = true;
    loop {
        let n = match from.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(_) => break,
        };
        if to_ok {
            to_ok = to.write_all(&buf[..n]).and_then(|_| to.flush()).is_ok();
        }
        if let Some(tx) = &tap {
            let _ = tx.send(buf[..n].to_vec());
        }
    }
}

fn emit_spans(spans: Vec<TracebackSpan>, out: &Sender<Capture>) {
    for span in spans {
        match parse_traceback(&span.text_lossy()) {
            Ok(ev) => {
                let _ = out.send(Capture::Event(ev));
            }
            Err(e) => {
                log::warn!("unparseable traceback block at byte {}: {e}", span.start_offset);
                let _ = out.send(Capture::Malformed);
            }
        }
    }
}

/// Turns error-stream bytes into events: traceback blocks in text capture,
/// sentinel lines in structured capture.
fn analyze_stderr(rx: Receiver<Vec<u8>>, out: Sender<Capture>, text: bool, sentinels: bool) {
    let mut detector = BoundaryDetector::new();
    let mut line = Vec::new();
    let scan = |chunk: &[u8], line: &mut Vec<u8>| {
        for &b in chunk {
            if b != b'\n' {
                line.push(b);
                continue;
            }
            if line.starts_with(SENTINEL_PREFIX.as_bytes()) {
                let s = String::from_utf8_lossy(line);
                match parse_structured_line(&s) {
                    Ok(ev) => {
                        let _ = out.send(Capture::Event(ev));
                    }
                    Err(_) => {
                        let _ = out.send(Capture::Malformed);
                    }
                }
            }
            line.clear();
        }
    };
    loop {
        match rx.recv_timeout(IDLE_FLUSH) {
            Ok(chunk) => {
                if sentinels {
                    scan(&chunk, &mut line);
                }
                if text {
                    emit_spans(detector.feed(&chunk), &out);
                }
            }
            Err(RecvTimeoutError::Timeout) => {
                if text && detector.is_pending() {
                    emit_spans(detector.flush_idle(), &out);
                }
            }
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    if sentinels {
        scan(b"\n", &mut line);
    }
    if text {
        emit_spans(detector.finish(), &out);
    }
}

/// Follows the event channel file until `done` is set and no bytes remain.
fn tail_channel(mut file: File, out: Sender<Capture>, done: Arc<AtomicBool>) {
    let mut pending = Vec::new();
    loop {
        let finished = done.load(Ordering::SeqCst);
        let before = pending.len();
        if let Err(e) = file.read_to_end(&mut pending) {
            log::warn!("event channel read failed: {e}");
        }
        while let Some(nl) = pending.iter().position(|&b| b == b'\n') {
            let line: Vec<u8> = pending.drain(..=nl).collect();
            let s = String::from_utf8_lossy(&line);
            if s.trim().is_empty() {
                continue;
            }
            match parse_structured_line(&s) {
                Ok(ev) => {
                    let _ = out.send(Capture::Event(ev));
                }
                Err(e) => {
                    log::warn!("bad event on channel: {e}");
                    let _ = out.send(Capture::Malformed);
                }
            }
        }
        if finished && pending.len() == before {
            break;
        }
        thread::sleep(CHANNEL_POLL);
    }
    if !pending.is_empty() {
        let _ = out.send(Capture::Malformed);
    }
}

/// Orders, deduplicates and commits captured events.
fn sequence(rx: Receiver<Capture>, session: Arc<Session>, hold_ms: i64) {
    let mut dedup = Deduper::new(hold_ms);
    let mut seen_dups = 0;
    let commit = |evs: Vec<ExceptionEvent>, dedup: &Deduper, seen_dups: &mut usize| {
        for ev in evs {
            session.process(ev);
        }
        while *seen_dups < dedup.duplicates() {
            session.note_duplicate();
            *seen_dups += 1;
        }
    };
    loop {
        match rx.recv_timeout(SEQUENCER_TICK) {
            Ok(Capture::Event(ev)) => {
                let ready = dedup.push(ev, now_ms().timestamp_millis());
                commit(ready, &dedup, &mut seen_dups);
            }
            Ok(Capture::Malformed) => session.note_malformed(),
            Err(RecvTimeoutError::Timeout) => {
                let ready = dedup.poll(now_ms().timestamp_millis());
                commit(ready, &dedup, &mut seen_dups);
            }
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    let ready = dedup.drain();
    commit(ready, &dedup, &mut seen_dups);
}

impl Supervisor {
    /// Runs the child to completion and reports how it ended.
    pub fn run(&self, cmd: &[OsString]) -> io::Result<ChildExit> {
        let (program, args) = cmd
            .split_first()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no command given"))?;
        let shim = if self.capture.reads_structured() {
            Some(ShimInstall::create()?)
        } else {
            None
        };

        let mut command = Command::new(program);
        command
            .args(args)
            .stdin(Stdio::inherit())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(s) = &shim {
            s.apply(&mut command);
        }
        let mut child: Child = command.spawn()?;
        ignore_interrupts(true);

        let (cap_tx, cap_rx) = mpsc::channel::<Capture>();
        let child_out = child.stdout.take().expect("piped stdout");
        let child_err = child.stderr.take().expect("piped stderr");

        let stdout_thread = thread::spawn(move || forward(child_out, io::stdout(), None));

        let text = self.capture.reads_text();
        let sentinels = self.capture.reads_structured();
        let (chunk_tx, chunk_rx) = mpsc::channel::<Vec<u8>>();
        let analyzer = {
            let out = cap_tx.clone();
            thread::spawn(move || analyze_stderr(chunk_rx, out, text, sentinels))
        };
        let stderr_thread = thread::spawn(move || forward(child_err, io::stderr(), Some(chunk_tx)));

        let done = Arc::new(AtomicBool::new(false));
        let tail: Option<JoinHandle<()>> = match &shim {
            Some(s) => {
                let file = File::open(s.channel())?;
                let out = cap_tx.clone();
                let done = Arc::clone(&done);
                Some(thread::spawn(move || tail_channel(file, out, done)))
            }
            None => None,
        };
        drop(cap_tx);

        let hold = if self.capture == CaptureMode::Both { TEXT_HOLD_MS } else { 0 };
        let sequencer = {
            let session = Arc::clone(&self.session);
            thread::spawn(move || sequence(cap_rx, session, hold))
        };

        let status = child.wait();
        done.store(true, Ordering::SeqCst);
        let _ = stdout_thread.join();
        let _ = stderr_thread.join();
        let _ = analyzer.join();
        if let Some(t) = tail {
            let _ = t.join();
        }
        let _ = sequencer.join();
        Ok(ChildExit::from_status(status?))
    }
}
