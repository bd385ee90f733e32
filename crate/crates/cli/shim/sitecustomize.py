import os
import sys


def _chain_shadowed():
    # Run the sitecustomize this file hides further down the path.
    import importlib.machinery
    import importlib.util

    here = os.path.dirname(os.path.abspath(__file__))
    rest = [p for p in sys.path if os.path.abspath(p or os.curdir) != here]
    spec = importlib.machinery.PathFinder.find_spec("sitecustomize", rest)
    if spec is not None and spec.loader is not None:
        spec.loader.exec_module(importlib.util.module_from_spec(spec))


try:
    _chain_shadowed()
except Exception:
    pass

if os.environ.get("AUDIBLE_TRACE_DISABLE") != "1":
    try:
        import audible_trace_shim

        audible_trace_shim.auto_inject()
    except Exception:
        pass
