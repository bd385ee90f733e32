"""Unhandled-exception hook that reports each failure as one JSON line.

The interpreter's own traceback printing runs first and is left untouched.
Events go to the file named by AUDIBLE_TRACE_EVENT_PATH, or to standard
error behind a sentinel prefix when no channel is configured.
"""

import datetime
import io
import json
import linecache
import os
import sys
import threading
import traceback

SCHEMA_VERSION = 1
SENTINEL = "##AUDIBLE-TRACE-EVENT## "

_lock = threading.RLock()
_installed = False
_meta = {}
_orig_excepthook = None
_orig_threading_hook = None
_naming = None


def _probe_naming():
    """How the interpreter's own display names an exception class.

    Returns (prefixes __main__, uses qualified name). Versions differ on both.
    """
    probe = type("ProbeError", (Exception,), {"__module__": "__main__"})
    probe.__qualname__ = "Outer.ProbeError"
    buf = io.StringIO()
    saved = sys.stderr
    try:
        sys.stderr = buf
        sys.__excepthook__(probe, probe("x"), None)
    except Exception:
        pass
    finally:
        sys.stderr = saved
    lines = buf.getvalue().strip().splitlines()
    last = lines[-1] if lines else ""
    return last.startswith("__main__."), "Outer.ProbeError" in last


def _type_name(cls):
    global _naming
    if _naming is None:
        _naming = _probe_naming()
    main_prefixed, qualified = _naming
    name = getattr(cls, "__name__", None) or "Exception"
    if qualified:
        name = getattr(cls, "__qualname__", None) or name
    module = getattr(cls, "__module__", None)
    if module not in (None, "builtins") and (module != "__main__" or main_prefixed):
        name = module + "." + name
    return name


def _some_str(value):
    try:
        return str(value)
    except Exception:
        return "<exception str() failed>"


def _frames(tb):
    out = []
    for fs in traceback.extract_tb(tb):
        out.append({
            "file": fs.filename,
            "line": fs.lineno or 1,
            "function": fs.name,
            "code_line": (fs.line or "").strip() or None,
        })
    return out


def _event(exc_type, exc, tb, seen):
    seen.add(id(exc))
    frames = _frames(tb)
    message = _some_str(exc)
    if isinstance(exc, SyntaxError):
        message = exc.msg or "<no detail available>"
        if exc.lineno is not None:
            text = exc.text
            if text is None:
                text = linecache.getline(exc.filename or "", exc.lineno)
            frames.append({
                "file": exc.filename or "<string>",
                "line": exc.lineno,
                "function": "<module>",
                "code_line": (text or "").strip() or None,
            })
        elif exc.filename is not None:
            message += " ({})".format(exc.filename)
    causes = []
    if exc is not None:
        cause = exc.__cause__
        if cause is None and not exc.__suppress_context__:
            cause = exc.__context__
        if cause is not None and id(cause) not in seen:
            causes.append(_event(type(cause), cause, cause.__traceback__, seen))
    return {
        "schema_version": SCHEMA_VERSION,
        "type": _type_name(exc_type),
        "message": message,
        "frames": frames,
        "base_classes": [_type_name(c) for c in exc_type.__mro__[1:] if c is not object],
        "cause_chain": causes,
    }


def _now():
    t = datetime.datetime.now(datetime.timezone.utc)
    return t.isoformat(timespec="milliseconds").replace("+00:00", "Z")


def _emit(exc_type, exc, tb, thread_name):
    try:
        doc = _event(exc_type, exc, tb, set())
        doc["thread"] = thread_name
        doc["ts"] = _now()
        if _meta:
            doc["meta"] = dict(_meta)
        line = json.dumps(doc, ensure_ascii=False) + "\n"
    except Exception:
        return
    with _lock:
        path = os.environ.get("AUDIBLE_TRACE_EVENT_PATH")
        if path:
            try:
                fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o600)
                try:
                    os.write(fd, line.encode("utf-8"))
                finally:
                    os.close(fd)
                return
            except OSError:
                pass
        try:
            sys.stderr.write(SENTINEL + line)
            sys.stderr.flush()
        except Exception:
            pass


def _excepthook(exc_type, exc, tb):
    _orig_excepthook(exc_type, exc, tb)
    _emit(exc_type, exc, tb, threading.current_thread().name)


def _threading_hook(args):
    _orig_threading_hook(args)
    if args.exc_type is SystemExit:
        return
    name = args.thread.name if args.thread is not None else None
    _emit(args.exc_type, args.exc_value, args.exc_traceback, name)


def enable_voice_errors(speech_rate=160, voice_gender="female", channel=None):
    """Installs the process and thread hooks. Repeat calls only update options."""
    global _installed, _orig_excepthook, _orig_threading_hook
    _meta["speech_rate"] = speech_rate
    _meta["voice_gender"] = voice_gender
    if channel is not None:
        os.environ["AUDIBLE_TRACE_EVENT_PATH"] = str(channel)
    if os.environ.get("AUDIBLE_TRACE_DISABLE") == "1":
        return
    with _lock:
        if _installed:
            return
        _orig_excepthook = sys.excepthook
        _orig_threading_hook = threading.excepthook
        sys.excepthook = _excepthook
        threading.excepthook = _threading_hook
        _installed = True


def auto_inject():
    if os.environ.get("AUDIBLE_TRACE_DISABLE") == "1":
        return
    enable_voice_errors()
    _meta.clear()
