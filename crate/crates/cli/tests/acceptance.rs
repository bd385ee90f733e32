//! Acceptance gate. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use audible_trace_core::clock::SystemClock;
use audible_trace_core::ledger::{
    gen_doc_url, origin_for_name, Ledger, LedgerRecord, Signature, CORE_KEYS,
};
use audible_trace_core::narrate::{plan_prosody, NarrationMode, TemplateSet};
use audible_trace_core::session::NarrationSettings;
use audible_trace_core::speech::{Gateway, TranscriptBackend};
use audible_trace_core::{
    classify, CaptureSource, Classification, ExceptionEvent, Session, Severity, StackFrame,
    TaxonomyTable,
};
use chrono::{DateTime, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_audible-trace");
const PYTHON: &str = "python3";

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Child processes

fn scratch() -> &'static tempfile::TempDir {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().expect("scratch dir"))
}

fn output(mut cmd: Command) -> Output {
    cmd.stdin(Stdio::null())
        .env_remove("AUDIBLE_TRACE_CONFIG")
        .env_remove("AUDIBLE_TRACE_SERVE")
        .env_remove("AUDIBLE_TRACE_CAPTURE")
        .env_remove("AUDIBLE_TRACE_LOG")
        .output()
        .expect("spawn")
}

fn bare(dir: &Path, script: &str) -> Output {
    let mut c = Command::new(PYTHON);
    c.current_dir(dir).arg(script);
    output(c)
}

fn supervised(dir: &Path, script: &str, capture: &str, log: &Path) -> Output {
    let mut c = Command::new(BIN);
    c.current_dir(dir)
        .args(["run", "--capture", capture, "--backend", "null", "--log"])
        .arg(log)
        .args(["--", PYTHON, script]);
    output(c)
}

fn read_jsonl(p: &Path) -> Vec<Value> {
    std::fs::read_to_string(p)
        .unwrap_or_default()
        .lines()
        .map(|l| serde_json::from_str(l).expect("ledger line is JSON"))
        .collect()
}

// ---------------------------------------------------------------------------
// Failure corpus

#[derive(Clone, Copy, PartialEq)]
enum Variant {
    Top,
    Nested,
    Thread,
    Chained,
    Implicit,
    ThreadAndMain,
}

use Variant::*;

const ALL: &[Variant] = &[Top, Nested, Thread, Chained, Implicit];

struct Case {
    ty: &'static str,
    prelude: &'static str,
    body: &'static str,
    variants: &'static [Variant],
}

const fn case(ty: &'static str, body: &'static str, variants: &'static [Variant]) -> Case {
    Case {
        ty,
        prelude: "",
        body,
        variants,
    }
}

const CASES: &[Case] = &[
    case("ZeroDivisionError", "ratio = 1.0 / 0", ALL),
    case("KeyError", "settings = {}\nreturn settings['invalid']", ALL),
    case("IndexError", "rows = [1, 2, 3]\nreturn rows[10]", ALL),
    case("ValueError", "return int('abc')", ALL),
    case("TypeError", "return 'total: ' + 5", ALL),
    case("AttributeError", "value = None\nreturn value.upper()", ALL),
    case("NameError", "return undefined_total", &[Top, Nested, Thread]),
    case("UnboundLocalError", "counter += 1", &[Top, Nested]),
    case("FileNotFoundError", "open('missing-input.csv')", &[Top, Thread, Chained, ThreadAndMain]),
    case("ModuleNotFoundError", "import no_such_module_xyz", &[Top, Nested]),
    case("ImportError", "from os import no_such_name", &[Top, Implicit]),
    case("RecursionError", "def walk(n):\n    return walk(n + 1)\nwalk(0)", &[Top, Nested]),
    case("AssertionError", "assert 1 == 2, 'totals differ'", &[Top, Thread, Chained]),
    case("OverflowError", "import math\nreturn math.exp(1000)", &[Top, Nested]),
    case("UnicodeDecodeError", "return b'\\xff\\xfe'.decode('utf-8')", &[Top, Implicit]),
    case("UnicodeEncodeError", "return 'caf\\u00e9'.encode('ascii')", &[Top]),
    case("NotImplementedError", "raise NotImplementedError('subclass must implement load')", &[Top, Nested]),
    case("RuntimeError", "raise RuntimeError('bad state')", &[Top, Thread]),
    case("StopIteration", "return next(iter([]))", &[Top]),
    case("IsADirectoryError", "open('.')", &[Top]),
    case("NotADirectoryError", "import os\nos.listdir(__file__)", &[Top]),
    case("FileExistsError", "import os\nos.mkdir('.')", &[Top]),
    case("PermissionError", "raise PermissionError(13, 'Permission denied', 'locked.db')", &[Top]),
    case("EOFError", "return input()", &[Top]),
    case("LookupError", "raise LookupError('no match for id 42')", &[Top]),
    case("MemoryError", "raise MemoryError('cache allocation failed')", &[Top]),
    case("TimeoutError", "raise TimeoutError('deadline passed')", &[Top, Thread, ThreadAndMain]),
    case("ProcessLookupError", "import os\nos.kill(2 ** 30, 0)", &[Top]),
    case("KeyboardInterrupt", "raise KeyboardInterrupt", &[Top]),
    case("SyntaxError", "exec('value = (')", &[Top, Nested]),
    case("json.decoder.JSONDecodeError", "import json\nreturn json.loads('{')", &[Top, Chained]),
    case(
        "ValueError",
        "try:\n    {}['a']\nexcept KeyError:\n    raise ValueError('config missing') from None",
        &[Top],
    ),
    Case {
        ty: "ConfigError",
        prelude: "class ConfigError(Exception):\n    pass\n",
        body: "raise ConfigError('no database url')",
        variants: &[Top],
    },
];

struct Script {
    name: String,
    source: String,
    extra: Vec<(String, String)>,
    expected: Vec<String>,
}

fn indent(body: &str, by: usize) -> String {
    let pad = " ".repeat(by);
    body.lines().map(|l| format!("{pad}{l}\n")).collect()
}

fn render_case(c: &Case, v: Variant) -> (String, Vec<String>) {
    let mut s = String::from("import threading\n\n");
    s.push_str(c.prelude);
    s.push_str("\ndef trigger():\n");
    s.push_str(&indent(c.body, 4));
    s.push('\n');
    let expected = match v {
        Top => {
            s.push_str("print('start')\ntrigger()\n");
            vec![c.ty]
        }
        Nested => {
            s.push_str(
                "def load():\n    return parse()\n\ndef parse():\n    return validate()\n\n\
                 def validate():\n    return trigger()\n\nload()\n",
            );
            vec![c.ty]
        }
        Thread => {
            s.push_str(
                "print('starting worker')\nt = threading.Thread(target=trigger, name='worker-7')\n\
                 t.start()\nt.join()\nprint('main finished')\n",
            );
            vec![c.ty]
        }
        ThreadAndMain => {
            s.push_str(
                "t = threading.Thread(target=trigger, name='loader')\nt.start()\nt.join()\n\
                 raise ValueError('main failed after loader')\n",
            );
            vec![c.ty, "ValueError"]
        }
        Chained => {
            s.push_str(
                "def run():\n    try:\n        trigger()\n    except BaseException as exc:\n\
                 \x20       raise RuntimeError('step failed') from exc\n\nrun()\n",
            );
            vec!["RuntimeError"]
        }
        Implicit => {
            s.push_str("try:\n    trigger()\nexcept BaseException:\n    cleanup = {}\n    cleanup['handle']\n");
            vec!["KeyError"]
        }
    };
    (s, expected.into_iter().map(String::from).collect())
}

fn corpus_scripts() -> Vec<Script> {
    let mut out = Vec::new();
    for c in CASES {
        for &v in c.variants {
            let (source, expected) = render_case(c, v);
            out.push(Script {
                name: String::new(),
                source,
                extra: Vec::new(),
                expected,
            });
        }
    }
    let headerless: [(&str, &str); 4] = [
        ("SyntaxError", "print('never runs')\ntotal = (1 +\n"),
        ("IndentationError", "def f():\nreturn 1\n"),
        ("TabError", "def f():\n\tif True:\n        return 1\n"),
        ("SyntaxError", "values = [1, 2\nprint(values)\n"),
    ];
    for (ty, source) in headerless {
        out.push(Script {
            name: String::new(),
            source: source.to_string(),
            extra: Vec::new(),
            expected: vec![ty.to_string()],
        });
    }
    out.push(Script {
        name: String::new(),
        source: "import broken_helper\nbroken_helper.run()\n".to_string(),
        extra: vec![("broken_helper.py".into(), "def run():\n    x = = 1\n".into())],
        expected: vec!["SyntaxError".to_string()],
    });
    for (i, s) in out.iter_mut().enumerate() {
        s.name = format!("case_{i:03}.py");
    }
    out
}

struct Run {
    out: Output,
    records: Vec<Value>,
}

struct ScriptRuns {
    script: Script,
    bare: Output,
    text: Run,
    structured: Run,
    both: Run,
}

struct Corpus {
    dir: PathBuf,
    runs: Vec<ScriptRuns>,
    elapsed: Duration,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let start = Instant::now();
        let dir = scratch().path().join("corpus");
        std::fs::create_dir_all(dir.join("ledgers")).unwrap();
        let mut runs = Vec::new();
        for script in corpus_scripts() {
            std::fs::write(dir.join(&script.name), &script.source).unwrap();
            for (name, text) in &script.extra {
                std::fs::write(dir.join(name), text).unwrap();
            }
            let mode = |m: &str| {
                let log = dir.join("ledgers").join(format!("{}.{m}.jsonl", script.name));
                let out = supervised(&dir, &script.name, m, &log);
                Run {
                    out,
                    records: read_jsonl(&log),
                }
            };
            let bare = bare(&dir, &script.name);
            let text = mode("text");
            let structured = mode("structured");
            let both = mode("both");
            runs.push(ScriptRuns {
                script,
                bare,
                text,
                structured,
                both,
            });
        }
        Corpus {
            dir,
            runs,
            elapsed: start.elapsed(),
        }
    })
}

fn fingerprint(r: &Value) -> Value {
    let frames = r["x"]["frames"].as_array().cloned().unwrap_or_default();
    let inner = frames.last().cloned().unwrap_or(Value::Null);
    json!({
        "type": r["exception"],
        "message": r["message"],
        "frames": frames.len(),
        "innermost": [inner["file"], inner["line"], inner["function"]],
    })
}

fn capture_fidelity() -> Outcome {
    let c = corpus();
    let table = TaxonomyTable::builtin();
    let mut builtin_types = BTreeSet::new();
    let (mut chained, mut threaded, mut headerless) = (0, 0, 0);
    let mut problems = Vec::new();
    let mut compared = 0;
    for r in &c.runs {
        let name = &r.script.name;
        // Classes defined in the script are named the way this interpreter prints them.
        let printed = String::from_utf8_lossy(&r.bare.stderr);
        let expected: Vec<String> = r
            .script
            .expected
            .iter()
            .map(|e| {
                let main = format!("__main__.{e}");
                if !e.contains('.') && printed.lines().any(|l| l.starts_with(&format!("{main}:"))) {
                    main
                } else {
                    e.clone()
                }
            })
            .collect();
        for (mode, run) in [("text", &r.text), ("structured", &r.structured), ("both", &r.both)] {
            let got: Vec<&str> = run.records.iter().map(|v| v["exception"].as_str().unwrap_or("")).collect();
            if got != expected {
                problems.push(format!("{name} {mode}: expected {expected:?}, ledger has {got:?}"));
            }
        }
        for (t, s) in r.text.records.iter().zip(&r.structured.records) {
            compared += 1;
            let (ft, fs) = (fingerprint(t), fingerprint(s));
            if ft != fs {
                problems.push(format!("{name}: text {ft} vs structured {fs}"));
            }
        }
        for rec in &r.structured.records {
            for ty in std::iter::once(&rec["exception"])
                .chain(rec["x"]["causes"].as_array().into_iter().flatten().map(|c| &c["type"]))
            {
                if let Some(ty) = ty.as_str().filter(|t| table.is_builtin(t)) {
                    builtin_types.insert(ty.to_string());
                }
            }
            if rec["x"]["causes"].as_array().is_some_and(|c| !c.is_empty()) {
                chained += 1;
            }
            if rec["x"]["thread"].as_str().is_some_and(|t| t != "MainThread") {
                threaded += 1;
            }
        }
        if !r.script.source.contains("def trigger") && r.bare.stderr.starts_with(b"  File") {
            headerless += 1;
        }
    }
    let scripts = c.runs.len();
    let secs = c.elapsed.as_secs_f64();
    let detail = format!(
        "{scripts} scripts, {} built-in types, {chained} chained, {threaded} threaded, \
         {headerless} headerless, {compared} text/structured pairs agree, {secs:.1} s",
        builtin_types.len()
    );
    ensure(scripts >= 60, || format!("only {scripts} scripts"))?;
    ensure(builtin_types.len() >= 20, || format!("only {} built-in types", builtin_types.len()))?;
    ensure(chained > 0 && threaded > 0 && headerless > 0, || format!("coverage gap: {detail}"))?;
    ensure(problems.is_empty(), || format!("{} mismatches: {}", problems.len(), problems.join("; ")))?;
    ensure(secs < 120.0, || format!("took {secs:.1} s"))?;
    Ok(detail)
}

fn describe(out: &Output) -> String {
    use std::os::unix::process::ExitStatusExt;
    match (out.status.code(), out.status.signal()) {
        (Some(c), _) => c.to_string(),
        (None, Some(sig)) => format!("signal {sig}"),
        _ => "unknown".into(),
    }
}

fn transparency() -> Outcome {
    let c = corpus();
    let mut problems = Vec::new();
    let mut n = 0;
    let mut check = |name: &str, bare: &Output, sup: &Output| {
        n += 1;
        if bare.stdout != sup.stdout {
            problems.push(format!("{name}: stdout differs"));
        }
        if bare.stderr != sup.stderr {
            problems.push(format!("{name}: stderr differs"));
        }
        if bare.status != sup.status {
            problems.push(format!("{name}: exit {} vs {}", describe(bare), describe(sup)));
        }
    };
    let mut codes = BTreeSet::new();
    for r in &c.runs {
        check(&r.script.name, &r.bare, &r.text.out);
        codes.insert(describe(&r.bare));
    }
    let dir = scratch().path().join("clean");
    std::fs::create_dir_all(&dir).unwrap();
    for (name, src) in CLEAN {
        std::fs::write(dir.join(name), src).unwrap();
        let b = bare(&dir, name);
        let s = supervised(&dir, name, "text", &dir.join("ledger.jsonl"));
        codes.insert(describe(&b));
        check(name, &b, &s);
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(format!("{n} programs byte-identical on both streams, exit statuses {codes:?} preserved"))
}

// ---------------------------------------------------------------------------
// Clean corpus and overhead

const CLEAN: &[(&str, &str)] = &[
    (
        "sieve.py",
        "limit = 6_000_000\nflags = bytearray([1]) * (limit + 1)\nflags[0] = flags[1] = 0\n\
         for i in range(2, int(limit ** 0.5) + 1):\n    if flags[i]:\n        flags[i*i::i] = bytes(len(flags[i*i::i]))\n\
         total = 0\nfor i in range(limit + 1):\n    total += flags[i]\nprint('primes', total)\n",
    ),
    (
        "records.py",
        "import json\nrows = [{'id': i, 'name': f'user{i}', 'tags': [i % 7, i % 11]} for i in range(200000)]\n\
         text = json.dumps(rows)\nback = json.loads(text)\nprint(len(text), len(back))\n",
    ),
    (
        "chatty.py",
        "for i in range(120000):\n    print(f'line {i}: processed batch of {i % 97} items')\n",
    ),
    (
        "warnings.py",
        "import sys\nfor i in range(4000):\n    print(f'warning: slow query {i} took {i % 50} ms', file=sys.stderr)\n\
         total = sum(i * i for i in range(6_000_000))\nprint(total)\n",
    ),
    (
        "sorting.py",
        "import random\nrng = random.Random(7)\nvalues = [rng.random() for _ in range(1_500_000)]\n\
         values.sort()\nprint(round(values[len(values) // 2], 6))\n",
    ),
    (
        "strings.py",
        "import re\nwords = ' '.join(f'token{i}' for i in range(800000))\n\
         found = re.findall(r'token(\\d+)7\\b', words)\nprint(len(found))\n",
    ),
];

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn overhead() -> Outcome {
    const ROUNDS: usize = 7;
    let dir = scratch().path().join("overhead");
    std::fs::create_dir_all(&dir).unwrap();
    for (name, src) in CLEAN {
        std::fs::write(dir.join(name), src).unwrap();
    }
    let log = dir.join("ledger.jsonl");
    let timed = |f: &dyn Fn() -> Output| {
        let t = Instant::now();
        let out = f();
        (t.elapsed().as_secs_f64(), out)
    };
    // Warm caches once before measuring.
    for (name, _) in CLEAN {
        bare(&dir, name);
        supervised(&dir, name, "text", &log);
    }
    let mut bare_t: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut sup_t: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for round in 0..ROUNDS {
        for (name, _) in CLEAN {
            let mut pair = [
                (false, timed(&|| bare(&dir, name))),
                (true, timed(&|| supervised(&dir, name, "text", &log))),
            ];
            if round % 2 == 1 {
                pair.swap(0, 1);
            }
            for (sup, (secs, out)) in pair {
                if !out.status.success() {
                    return Err(format!("{name} failed: {}", String::from_utf8_lossy(&out.stderr)));
                }
                let slot = if sup { &mut sup_t } else { &mut bare_t };
                slot.entry(name).or_default().push(secs);
            }
        }
    }
    let b: f64 = bare_t.values_mut().map(|v| median(v)).sum();
    let s: f64 = sup_t.values_mut().map(|v| median(v)).sum();
    let pct = (s / b - 1.0) * 100.0;
    let detail = format!(
        "supervised {s:.3} s vs bare {b:.3} s over {} programs (median of {ROUNDS}): {pct:+.2}%",
        CLEAN.len()
    );
    ensure(pct <= 5.0, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// Latency

const LATENCY_SPEED: f64 = 40.0;

fn latency() -> Outcome {
    let start = Instant::now();
    let dir = scratch().path().join("latency");
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = StdRng::seed_from_u64(0x1a7e);
    let types = [
        "KeyError", "ValueError", "TypeError", "ZeroDivisionError", "IndexError",
        "AttributeError", "FileNotFoundError", "RuntimeError", "MemoryError", "ImportError",
    ];
    let mut at = Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap();
    let mut lines = String::new();
    for i in 0..200 {
        let gap_ms = if rng.random_bool(0.05) {
            rng.random_range(200..1500)
        } else {
            rng.random_range(8_000..20_000)
        };
        if i > 0 {
            at += chrono::Duration::milliseconds(gap_ms);
        }
        let depth = match i % 3 {
            0 => rng.random_range(1..=2),
            1 => rng.random_range(3..=9),
            _ => rng.random_range(10..=30),
        };
        let file = format!("service/module_{}.py", rng.random_range(0..25));
        let frames: Vec<Value> = (0..depth)
            .map(|d| json!({"file": file, "line": 10 + d * 3, "function": format!("step_{d}")}))
            .collect();
        let ty = types[rng.random_range(0..types.len())];
        let ev = json!({
            "schema_version": 1,
            "type": ty,
            "message": format!("failure {i} while handling request"),
            "frames": frames,
            "ts": at.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        });
        lines.push_str(&ev.to_string());
        lines.push('\n');
    }
    let rec = dir.join("recording.jsonl");
    std::fs::write(&rec, lines).unwrap();
    let mut c = Command::new(BIN);
    c.current_dir(&dir)
        .args(["replay", "--speed", &LATENCY_SPEED.to_string()])
        .args(["--sleep-scale", &(1.0 / LATENCY_SPEED).to_string()])
        .args(["--log", "ledger.jsonl", "--transcript", "speech.txt"])
        .arg(&rec);
    let out = output(c);
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    ensure(v["events"] == 200, || format!("replayed {}", v["events"]))?;
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for b in v["latency"]["buckets"].as_array().ok_or("no latency report")? {
        let name = b["name"].as_str().unwrap_or("?");
        let n = b["count"].as_u64().unwrap_or(0);
        let m = b["median_s"].as_f64().ok_or_else(|| format!("{name}: no samples"))?;
        ensure(n > 0, || format!("{name}: no samples"))?;
        worst = worst.max(m);
        parts.push(format!("{} median {:.3} s (n={n})", name.to_lowercase(), m));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{} at {LATENCY_SPEED}x with speech time scaled to match, {secs:.0} s",
        parts.join(", ")
    );
    ensure(worst <= 0.7, || detail.clone())?;
    ensure(secs < 300.0, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// In-process criteria

#[derive(Clone, Default)]
struct Shared(Arc<Mutex<Vec<u8>>>);

impl Write for Shared {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

impl Shared {
    /// (event id, pitch, rate, text) per transcript line.
    fn lines(&self) -> Vec<(u64, i32, String, String)> {
        String::from_utf8(self.0.lock().unwrap().clone())
            .unwrap()
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.splitn(5, '\t').collect();
                (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].to_string(), f[4].to_string())
            })
            .collect()
    }

    fn spoken(&self, id: u64) -> String {
        self.lines()
            .into_iter()
            .filter(|l| l.0 == id)
            .map(|l| l.3)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn transcript_session(mode: NarrationMode) -> (Session, Shared) {
    let buf = Shared::default();
    let backend = TranscriptBackend::new(Box::new(buf.clone()), Arc::new(SystemClock), 0.0);
    let session = Session::new(
        Ledger::in_memory(600),
        Gateway::start(Box::new(backend)),
        TaxonomyTable::builtin(),
        TemplateSet::default(),
        NarrationSettings {
            mode,
            base_rate_wpm: 160,
            source_root: ".".into(),
        },
    );
    (session, buf)
}

fn event(ty: &str, msg: &str, file: &str, line: u32) -> ExceptionEvent {
    ExceptionEvent::new(
        ty,
        msg,
        vec![
            StackFrame::new("main.py", 12, "<module>"),
            StackFrame::new(file, line, "process"),
        ],
        CaptureSource::ParsedText,
    )
}

fn goldens() -> Outcome {
    let goldens = [
        "ZeroDivisionError: float division in data_processor.py line 188",
        "KeyError: 'invalid' key missing in dictionary at data_processor.py line 88",
        "Recurring error: Consider adding try-except block",
    ];
    let (session, buf) = transcript_session(NarrationMode::Standard);
    let zde = session.process(event("ZeroDivisionError", "float division", "data_processor.py", 188));
    let key = session.process(event("KeyError", "'invalid'", "data_processor.py", 88));
    let mut last = None;
    for _ in 0..4 {
        last = Some(session.process(event("ValueError", "bad row", "loader.py", 40)));
    }
    let last = last.unwrap();
    ensure(last.suggestion.is_some(), || "no suggestion on the fourth recurrence".into())?;
    ensure(session.gateway().wait_idle(Duration::from_secs(10)), || "speech did not drain".into())?;

    let got_zde = buf.spoken(zde.record.x.id);
    let got_key = buf.spoken(key.record.x.id);
    let spoken_last = buf.spoken(last.record.x.id);
    let mut problems = Vec::new();
    for (want, got) in [(goldens[0], got_zde.as_str()), (goldens[1], got_key.as_str())] {
        if want.as_bytes() != got.as_bytes() {
            problems.push(format!("spoke {got:?}, want {want:?}"));
        }
    }
    if !spoken_last.ends_with(&format!(" {}", goldens[2])) {
        problems.push(format!("spoke {spoken_last:?}, want suffix {:?}", goldens[2]));
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok("3 of 3 byte-exact".into())
}

fn prosody() -> Outcome {
    let table = [
        (Severity::Critical, 150, "1.25"),
        (Severity::High, 75, "1.1"),
        (Severity::Warning, 0, "1"),
        (Severity::Info, -50, "0.85"),
    ];
    let taxonomy = TaxonomyTable::builtin();
    let (session, buf) = transcript_session(NarrationMode::Standard);
    let mut checked = Vec::new();
    for (sev, cents, rate) in table {
        let ty = taxonomy
            .builtin_names()
            .find(|n| taxonomy.lookup(n).is_some_and(|(_, s)| s == sev))
            .ok_or_else(|| format!("no built-in with severity {sev:?}"))?
            .to_string();
        let p = session.process(event(&ty, "sample failure", "svc.py", 10));
        checked.push((p.record.x.id, ty, cents, rate));
    }
    ensure(session.gateway().wait_idle(Duration::from_secs(10)), || "speech did not drain".into())?;
    let lines = buf.lines();
    let mut problems = Vec::new();
    for (id, ty, cents, rate) in &checked {
        let mine: Vec<_> = lines.iter().filter(|l| l.0 == *id).collect();
        if mine.is_empty() || mine.iter().any(|l| l.1 != *cents || l.2 != *rate) {
            problems.push(format!("{ty}: {mine:?}"));
        }
    }

    let cls = Classification {
        family: audible_trace_core::Family::LogicalFlaws,
        severity: Severity::High,
        matched_by: audible_trace_core::classify::MatchedBy::ExactName,
    };
    for base in [160, 200, 100, 145] {
        let plan = plan_prosody(
            "KeyError: 'invalid' key missing in dictionary at data_processor.py line 88",
            &cls,
            NarrationMode::Dyslexia,
            base,
        );
        let n = plan.chunks.len();
        for (i, c) in plan.chunks.iter().enumerate() {
            let wpm = base as f64 * c.rate_multiplier;
            let pause = if i + 1 == n { 0 } else { 500 };
            if (wpm - 120.0).abs() > 1e-9 || c.pause_after_ms != pause {
                problems.push(format!("dyslexia base {base}: chunk {i} at {wpm} wpm, pause {}", c.pause_after_ms));
            }
        }
    }
    let (session, buf) = transcript_session(NarrationMode::Dyslexia);
    let p = session.process(event("KeyError", "'invalid'", "data_processor.py", 88));
    session.gateway().wait_idle(Duration::from_secs(10));
    let rates: BTreeSet<String> = buf.lines().into_iter().filter(|l| l.0 == p.record.x.id).map(|l| l.2).collect();
    if rates != BTreeSet::from(["0.75".to_string()]) {
        problems.push(format!("dyslexia transcript rates {rates:?} at 160 wpm base"));
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok("4 severities spoken with table pitch and rate; dyslexia 120 wpm with 500 ms pauses".into())
}

fn recurrence_oracle() -> Outcome {
    const WINDOW_MS: i64 = 600_000;
    let mut rng = StdRng::seed_from_u64(600);
    let sigs = [("KeyError", "a.py", 3), ("KeyError", "a.py", 4), ("IndexError", "b.py", 3)];
    let taxonomy = TaxonomyTable::builtin();
    let base = Utc.with_ymd_and_hms(2023, 11, 20, 14, 0, 0).unwrap().timestamp_millis();
    let (mut checks, mut fires, mut edges) = (0usize, 0usize, 0usize);
    for seq in 0..1000 {
        let mut ledger = Ledger::in_memory(600);
        let mut history: Vec<(usize, i64)> = Vec::new();
        let mut last_fire: [Option<i64>; 3] = [None; 3];
        let mut t = base;
        for _ in 0..rng.random_range(1..40) {
            t += match rng.random_range(0..8) {
                0 => 0,
                1 => 1,
                2 => WINDOW_MS,
                3 => WINDOW_MS - 1,
                4 => WINDOW_MS + 1,
                5 => WINDOW_MS / 4,
                _ => rng.random_range(0..120_000),
            };
            let s = rng.random_range(0..sigs.len());
            let (ty, file, line) = sigs[s];
            let mut ev = ExceptionEvent::new(ty, "m", vec![StackFrame::new(file, line, "f")], CaptureSource::StructuredHook);
            ev.captured_at = DateTime::from_timestamp_millis(t).unwrap();
            ledger.append(&ev, &classify(&ev, &taxonomy)).map_err(|e| e.to_string())?;
            history.push((s, t));

            let expect_count = history.iter().filter(|(hs, ht)| *hs == s && *ht > t - WINDOW_MS && *ht <= t).count();
            edges += history.iter().filter(|(hs, ht)| *hs == s && *ht == t - WINDOW_MS).count();
            let expect_fire = expect_count >= 4 && last_fire[s].is_none_or(|f| t - f >= WINDOW_MS);
            if expect_fire {
                last_fire[s] = Some(t);
                fires += 1;
            }
            let sig = Signature::of(&ev);
            let now = ev.captured_at;
            let got_fire = ledger.recurrence_check(&sig, now);
            let got_count = ledger.window_count(&sig, now);
            checks += 1;
            ensure(got_fire == expect_fire && got_count == expect_count, || {
                format!("sequence {seq} at +{} ms: fired {got_fire} count {got_count}, oracle {expect_fire} {expect_count}", t - base)
            })?;
        }
    }
    ensure(edges > 0, || "no exact 600 s edges generated".into())?;
    Ok(format!("1000 sequences, {checks} checks, {fires} triggers, {edges} events exactly 600 s old excluded"))
}

fn timestamp_shape(s: &str) -> bool {
    let pattern = "dddd-dd-ddTdd:dd:ddZ";
    s.len() == pattern.len()
        && s.chars().zip(pattern.chars()).all(|(c, p)| match p {
            'd' => c.is_ascii_digit(),
            _ => c == p,
        })
}

fn ledger_format() -> Outcome {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus().dir.join("ledgers"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();

    let amended = scratch().path().join("amended.jsonl");
    {
        let mut ledger = Ledger::open(&amended, 600).map_err(|e| e.to_string())?;
        let taxonomy = TaxonomyTable::builtin();
        for i in 0..3 {
            let ev = event("KeyError", "'invalid'", "data_processor.py", 88 + i);
            ledger.append(&ev, &classify(&ev, &taxonomy)).map_err(|e| e.to_string())?;
        }
        ledger.set_resolution(2, "first try").map_err(|e| e.to_string())?;
        ledger.set_resolution(2, "Added try-except block").map_err(|e| e.to_string())?;
    }
    files.push(amended.clone());

    let core: BTreeSet<&str> = ["timestamp", "exception", "message", "file", "line", "frequency", "resolution"].into();
    let (mut records, mut problems) = (0, Vec::new());
    for path in &files {
        let lines = read_jsonl(path);
        let mut record_lines = Vec::new();
        for v in &lines {
            let obj = v.as_object().ok_or("line is not an object")?;
            if obj.contains_key("amend") {
                continue;
            }
            let keys: BTreeSet<&str> = obj.keys().map(String::as_str).filter(|k| *k != "x").collect();
            if keys != core {
                problems.push(format!("{}: keys {keys:?}", path.display()));
            }
            if !v["timestamp"].as_str().is_some_and(timestamp_shape) {
                problems.push(format!("{}: timestamp {}", path.display(), v["timestamp"]));
            }
            let rec: LedgerRecord = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
            if serde_json::to_value(&rec).unwrap() != *v {
                problems.push(format!("{}: record {} does not re-serialize identically", path.display(), rec.x.id));
            }
            record_lines.push(rec);
        }
        records += record_lines.len();
        let reopened = Ledger::open(path, 600).map_err(|e| e.to_string())?;
        if reopened.skipped_lines() != 0 || reopened.len() != record_lines.len() {
            problems.push(format!("{}: reopened {} records, skipped {}", path.display(), reopened.len(), reopened.skipped_lines()));
        }
        for r in &record_lines {
            let back = reopened.get(r.x.id).map(|b| (&b.exception, &b.message, &b.file, b.line, b.frequency));
            if back != Some((&r.exception, &r.message, &r.file, r.line, r.frequency)) {
                problems.push(format!("{}: record {} changed on reload", path.display(), r.x.id));
            }
        }
    }
    let reopened = Ledger::open(&amended, 600).map_err(|e| e.to_string())?;
    if reopened.get(2).and_then(|r| r.resolution.as_deref()) != Some("Added try-except block") {
        problems.push("latest resolution not kept on reload".into());
    }
    if CORE_KEYS.iter().copied().collect::<BTreeSet<_>>() != core {
        problems.push(format!("declared core keys {CORE_KEYS:?}"));
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(format!("{records} records in {} files round-trip with exact core keys", files.len()))
}

fn doc_links() -> Outcome {
    let table = TaxonomyTable::builtin();
    let mut n = 0;
    for name in table.builtin_names() {
        n += 1;
        let want = format!("https://docs.python.org/3/library/exceptions.html#{}", name.to_lowercase());
        let got = gen_doc_url(name, &origin_for_name(name, None, &table));
        ensure(got == want, || format!("{name}: {got}"))?;
    }
    let out = output({
        let mut c = Command::new(PYTHON);
        c.args([
            "-c",
            "import builtins\nfor n in dir(builtins):\n    o = getattr(builtins, n)\n    \
             if isinstance(o, type) and issubclass(o, BaseException): print(n)",
        ]);
        c
    });
    let python: BTreeSet<String> = String::from_utf8_lossy(&out.stdout).lines().map(String::from).collect();
    let newer: Vec<&str> = table.builtin_names().filter(|n| !python.contains(*n)).collect();
    let mut c = Command::new(BIN);
    c.args(["docs", "KeyError"]);
    let cli = String::from_utf8_lossy(&output(c).stdout).trim().to_string();
    ensure(cli == "https://docs.python.org/3/library/exceptions.html#keyerror", || format!("cli printed {cli}"))?;
    Ok(format!(
        "{n} built-in names linked; {} also exist in this interpreter, newer ones: {newer:?}",
        n - newer.len()
    ))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("capture fidelity", capture_fidelity),
        ("transparency", transparency),
        ("ledger format", ledger_format),
        ("narration goldens", goldens),
        ("prosody table", prosody),
        ("recurrence oracle", recurrence_oracle),
        ("doc links", doc_links),
        ("latency", latency),
        ("overhead", overhead),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
