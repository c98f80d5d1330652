"""Plain-text run configuration.

Format: ``key = value`` lines, ``#`` starts a comment, ``[section]``
headers group keys. Sections:

* ``[parameters]`` condensed constants (b, theta, e, ..., theta_hat)
* ``[raw]`` continuous-model rates (b, rho_E, ..., mu_Ao)
* ``[run]`` steps, epsilon, tol, seed, clamp, T, dt, period, out
* ``[initial]`` E, L, P, H, R, O (missing coordinates default to 0)
* ``[sweep]`` comma-separated values for condensed parameters; every
  list must have the same length and run k uses the k-th entries

Keys placed before any header are routed by name. Exactly one of the
raw and condensed blocks must be present.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import dynamics as dyn
from .errors import InvalidParameter, ParseError, ValidationError

DEFAULT_SEED = 20190101

CONDENSED = tuple(dyn.PARAM_KEYS)
RAW = tuple(f.name for f in fields(dyn.RawRates))
RUN_KEYS = {
    "steps": int, "epsilon": str, "tol": float, "seed": int, "clamp": bool,
    "T": float, "dt": float, "period": int, "out": str,
}
SECTIONS = ("parameters", "raw", "run", "initial", "sweep")


@dataclass
class RunConfig:
    params: dyn.ParameterSet
    raw: dyn.RawRates | None = None
    initial: np.ndarray = field(default_factory=lambda: np.zeros(6))
    steps: int | None = None
    epsilon: str = "zero"
    tol: float = dyn.FIXED_POINT_TOL
    seed: int = DEFAULT_SEED
    clamp: bool = False
    T: float = 10.0
    dt: float = 0.01
    period: int = 1
    out: str | None = None
    sweep: list[dict[str, float]] = field(default_factory=list)
    source: str | None = None

    def echo(self) -> dict:
        d = {
            "source": self.source,
            "parameters": self.params.as_dict(),
            "initial": dict(zip(dyn.STATE_NAMES, map(float, self.initial))),
            "steps": self.steps, "epsilon": self.epsilon, "tol": self.tol,
            "seed": self.seed, "clamp": self.clamp, "T": self.T, "dt": self.dt,
            "period": self.period,
        }
        if self.raw is not None:
            d["raw"] = {f.name: getattr(self.raw, f.name) for f in fields(self.raw)}
        if self.sweep:
            d["sweep"] = self.sweep
        return d


def _number(text: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"value must be finite: {text!r}", line)
    return v


def _bool(text: str, line: int) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"not a boolean: {text!r}", line)


def _route(key: str) -> str | None:
    if key in CONDENSED and key in RAW:
        return None  # b is shared; resolved later
    if key in CONDENSED:
        return "parameters"
    if key in RAW:
        return "raw"
    if key in RUN_KEYS:
        return "run"
    if key in dyn.STATE_NAMES:
        return "initial"
    return "?"


def parse_text(text: str, source: str | None = None) -> RunConfig:
    blocks: dict[str, dict[str, tuple[str, int]]] = {s: {} for s in SECTIONS}
    loose: dict[str, tuple[str, int]] = {}
    section = None
    for n, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"malformed section header: {line!r}", n)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]", n)
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", n)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ParseError("empty key or value", n)
        target = blocks[section] if section else loose
        if key in target:
            raise ParseError(f"duplicate key {key!r}", n)
        allowed = {
            "parameters": CONDENSED, "raw": RAW, "run": tuple(RUN_KEYS),
            "initial": dyn.STATE_NAMES, "sweep": CONDENSED, None: None,
        }[section]
        if allowed is not None and key not in allowed:
            raise ParseError(f"unknown key {key!r} in [{section}]", n)
        if section is None and _route(key) == "?":
            raise ParseError(f"unknown key {key!r}", n)
        target[key] = (value, n)

    # keys before any header: route by name; a bare b follows the other keys
    for key, (value, n) in loose.items():
        dest = _route(key)
        if dest is None:
            has_raw = any(k in RAW and k not in CONDENSED for k in loose) or blocks["raw"]
            dest = "raw" if has_raw else "parameters"
        if key in blocks[dest]:
            raise ParseError(f"duplicate key {key!r}", n)
        blocks[dest][key] = (value, n)

    cond, raw = blocks["parameters"], blocks["raw"]
    problems = []
    if cond and raw:
        raise ValidationError("both raw and condensed parameter blocks are present; use one")
    if not cond and not raw:
        raise ValidationError("no parameters given")
    chosen, names = (cond, CONDENSED) if cond else (raw, RAW)
    values = {k: _number(v, n) for k, (v, n) in chosen.items()}
    missing = [k for k in names if k not in chosen]
    if missing:
        problems.append("missing parameter(s): " + ", ".join(missing))
    if problems:
        raise ValidationError(problems)
    rates = None
    try:
        if cond:
            params = dyn.ParameterSet(**values)
        else:
            rates = dyn.RawRates(**values)
            params = dyn.condense(rates)
    except InvalidParameter as exc:
        raise ValidationError(str(exc).split("; ")) from None

    cfg = RunConfig(params=params, raw=rates, source=source)
    for key, (value, n) in blocks["run"].items():
        kind = RUN_KEYS[key]
        if kind is bool:
            setattr(cfg, key, _bool(value, n))
        elif kind is int:
            v = _number(value, n)
            if v != int(v):
                raise ParseError(f"{key} must be an integer", n)
            setattr(cfg, key, int(v))
        elif kind is float:
            setattr(cfg, key, _number(value, n))
        else:
            setattr(cfg, key, value)
    for key, (value, n) in blocks["initial"].items():
        cfg.initial[dyn.STATE_NAMES.index(key)] = _number(value, n)

    if blocks["sweep"]:
        lists = {k: [_number(x.strip(), n) for x in v.split(",")]
                 for k, (v, n) in blocks["sweep"].items()}
        lengths = {len(v) for v in lists.values()}
        if len(lengths) != 1:
            raise ValidationError("sweep lists must all have the same length")
        cfg.sweep = [{k: v[i] for k, v in lists.items()} for i in range(lengths.pop())]
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    problems = []
    if cfg.steps is not None and cfg.steps < 0:
        problems.append("steps must be >= 0")
    if not cfg.tol > 0:
        problems.append("tol must be > 0")
    if not cfg.dt > 0:
        problems.append("dt must be > 0")
    if cfg.T < 0:
        problems.append("T must be >= 0")
    if cfg.period < 1:
        problems.append("period must be >= 1")
    try:
        parse_epsilon(cfg.epsilon)
    except ValueError as exc:
        problems.append(str(exc))
    for k, over in enumerate(cfg.sweep):
        bad = cfg.params.replace(**over, strict=False).hard_violations()
        problems += [f"sweep[{k}]: {m}" for m in bad]
    if problems:
        raise ValidationError(problems)


def parse_epsilon(text) -> str | float:
    """'zero', 'lstar' or a finite number."""
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("zero", "lstar"):
        return t
    try:
        v = float(t)
    except ValueError:
        raise ValueError(f"epsilon must be zero, lstar or a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ValueError("epsilon must be finite")
    return v


def parse_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text, str(path))


BASELINE_CONFIG = """\
# baseline condensed constants
[parameters]
b = 100
theta = 3
e = 0.5
a = 0.14
p = 0.5
h = 0.46
r = 0.43
e_hat = 1.06
l1_hat = 0.58
l2_hat = 0.05
p_hat = 0.87
h_hat = 0.64
r_hat = 0.4343
theta_hat = 3.41
"""


def baseline_config() -> RunConfig:
    return parse_text(BASELINE_CONFIG, "<baseline>")
