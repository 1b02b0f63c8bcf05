"""Flow-kernel selection: the compiled extension when importable, else pure Python.

Set ``MODELBENCH_PURE_PYTHON=1`` to force the fallback.
"""
import importlib
import os

_NAMES = {"compiled": "modelbench.pointflow._flowcore", "python": "modelbench.pointflow._flowpy"}


def load(name: str):
    return importlib.import_module(_NAMES[name])


def available() -> list[str]:
    out = []
    for name in _NAMES:
        try:
            load(name)
        except ImportError:
            continue
        out.append(name)
    return out


if os.environ.get("MODELBENCH_PURE_PYTHON"):
    BACKEND = "python"
else:
    BACKEND = "compiled" if "compiled" in available() else "python"

kernel = load(BACKEND)
