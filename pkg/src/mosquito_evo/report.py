"""JSON report assembly with 17-significant-digit numbers."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np

SCHEMA_VERSION = 1


def _num(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognisable as floats
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _emit(obj, out: list[str], indent: int, level: int):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, enum.Enum):
        out.append(json.dumps(obj.value))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_num(float(obj)))
    elif isinstance(obj, (complex, np.complexfloating)):
        _emit({"re": obj.real, "im": obj.imag}, out, indent, level)
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out, indent, level)
    elif is_dataclass(obj):
        _emit(asdict(obj), out, indent, level)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for k, (key, v) in enumerate(items):
            out.append(pad + json.dumps(str(key)) + ": ")
            _emit(v, out, indent, level + 1)
            out.append(",\n" if k < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, set, frozenset)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for k, v in enumerate(seq):
            out.append(pad)
            _emit(v, out, indent, level + 1)
            out.append(",\n" if k < len(seq) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON; floats carry 17 significant digits, NaN/inf become null."""
    out: list[str] = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def vector(v) -> list:
    v = np.asarray(v)
    return [complex(x) if np.iscomplexobj(v) and x.imag != 0 else float(np.real(x)) for x in v]


def envelope(command: str, config: dict, results, warnings: list[str]) -> dict:
    from . import __version__

    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "mosquito_evo", "version": __version__},
        "command": command,
        "config": config,
        "results": results,
        "warnings": list(warnings),
    }
