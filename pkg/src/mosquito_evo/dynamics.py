"""Discrete-time mosquito map: orbits, fixed points, Jacobians, stability.

State vectors are length-6 numpy arrays ordered (E, L, P, H, R, O): eggs,
larvae, pupae, host-seeking, resting and oviposition-seeking adults.
"""
from __future__ import annotations

import enum
import io
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import numerics as nm
from .errors import (
    DegenerateParameters,
    InvalidParameter,
    NoConvergence,
    NotAFixedPoint,
    Overflow,
    SingularJacobian,
)

log = logging.getLogger(__name__)

STATE_NAMES = ("E", "L", "P", "H", "R", "O")
OVERFLOW_LIMIT = 1e300
FIXED_POINT_TOL = 1e-10
HYPERBOLIC_BAND = 1e-9
REFERENCE_L_STAR = 209.2580821


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

# Typical published rate ranges; used for advisory warnings and random draws only.
RATE_RANGES = {
    "b": (50.0, 300.0),
    "rho_E": (0.33, 1.0),
    "rho_L": (0.08, 0.17),
    "rho_P": (0.33, 1.0),
    "mu_E": (0.32, 0.80),
    "mu_1L": (0.30, 0.58),
    "mu_2L": (0.0, 1.0),
    "mu_P": (0.22, 0.52),
    "rho_Ah": (0.322, 0.598),
    "rho_Ar": (0.30, 0.56),
    "rho_Ao": (3.0, 4.0),
    "mu_Ah": (0.125, 0.233),
    "mu_Ar": (0.0034, 0.01),
    "mu_Ao": (0.41, 0.56),
}


@dataclass(frozen=True)
class RawRates:
    """Rates of the continuous model (day^-1; ``b`` is a count)."""

    b: float
    rho_E: float
    rho_L: float
    rho_P: float
    rho_Ah: float
    rho_Ar: float
    rho_Ao: float
    mu_E: float
    mu_1L: float
    mu_2L: float
    mu_P: float
    mu_Ah: float
    mu_Ar: float
    mu_Ao: float

    def __post_init__(self):
        bad = [f.name for f in fields(self)
               if not (math.isfinite(getattr(self, f.name)) and getattr(self, f.name) >= 0)]
        if bad:
            raise InvalidParameter(f"rates must be finite and >= 0: {', '.join(bad)}")

    def range_warnings(self) -> list[str]:
        out = []
        for name, (lo, hi) in RATE_RANGES.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                out.append(f"{name}={v:g} outside typical range [{lo:g}, {hi:g}]")
        return out


# condensed-name -> config key
PARAM_KEYS = {
    "b": "b", "theta": "theta", "e": "e", "a": "a", "p": "p", "h": "h", "r": "r",
    "e_hat": "e_hat", "l1_hat": "l1_hat", "l2_hat": "l2_hat", "p_hat": "p_hat",
    "h_hat": "h_hat", "r_hat": "r_hat", "theta_hat": "theta_hat",
}

# advisory ranges of the condensed combinations
CONDENSED_RANGES = {
    "1-e_hat": (-0.8, 0.33),
    "theta": (3.0, 4.0),
    "e": (0.33, 1.0),
    "1-r_hat": (0.43, 0.697),
    "1-p_hat": (-0.52, 0.45),
    "1-theta_hat": (-3.56, -2.41),
    "1-h_hat": (0.169, 0.553),
    "p": (0.33, 1.0),
    "b*theta": (150.0, 1200.0),
    "h": (0.322, 0.598),
    "r": (0.3, 0.56),
    "a": (0.08, 0.17),
}


@dataclass(frozen=True)
class ParameterSet:
    """The fourteen condensed constants of the map.

    Unhatted symbols are transition rates, hatted ones are total exit
    rates (transition plus mortality). ``strict=False`` skips the
    positivity checks, for deliberately degenerate experiments.
    """

    b: float
    theta: float
    e: float
    a: float
    p: float
    h: float
    r: float
    e_hat: float
    l1_hat: float
    l2_hat: float
    p_hat: float
    h_hat: float
    r_hat: float
    theta_hat: float
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        for f in fields(self):
            if f.name != "strict" and not math.isfinite(getattr(self, f.name)):
                raise InvalidParameter(f"{f.name} must be finite")
        if self.strict:
            problems = self.hard_violations()
            if problems:
                raise InvalidParameter("; ".join(problems))

    def hard_violations(self) -> list[str]:
        out = [f"{n} must be > 0" for n in ("b", "theta", "e", "a", "p", "h", "r")
               if not getattr(self, n) > 0]
        if self.l2_hat < 0:
            out.append("l2_hat must be >= 0")
        return out

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("strict")
        return d

    def replace(self, **changes) -> "ParameterSet":
        d = self.as_dict()
        d["strict"] = self.strict
        d.update(changes)
        return ParameterSet(**d)

    def combination(self, name: str) -> float:
        if name.startswith("1-"):
            return 1.0 - getattr(self, name[2:])
        if name == "b*theta":
            return self.b * self.theta
        return getattr(self, name)

    def range_warnings(self) -> list[str]:
        out = []
        for name, (lo, hi) in CONDENSED_RANGES.items():
            v = self.combination(name)
            if not lo <= v <= hi:
                out.append(f"{name}={v:g} outside advisory range [{lo:g}, {hi:g}]")
        return out

    @property
    def egg_cycle_product(self) -> float:
        """a*b*e*h*p*r*theta, the weight of the full 6-cycle."""
        return self.a * self.b * self.e * self.h * self.p * self.r * self.theta

    def survivals(self, L: float = 0.0) -> np.ndarray:
        """Diagonal of the Jacobian at larval density L."""
        return np.array([
            1 - self.e_hat,
            1 - self.l1_hat - 2 * self.l2_hat * L,
            1 - self.p_hat,
            1 - self.h_hat,
            1 - self.r_hat,
            1 - self.theta_hat,
        ])


BASELINE = ParameterSet(
    a=0.14, b=100.0, e=0.5, e_hat=1.06, h=0.46, h_hat=0.64, p=0.5, p_hat=0.87,
    r=0.43, r_hat=0.4343, theta=3.0, theta_hat=3.41, l1_hat=0.58, l2_hat=0.05,
)

# Raw rates that condense exactly to BASELINE
BASELINE_RAW = RawRates(
    b=100.0, rho_E=0.5, rho_L=0.14, rho_P=0.5, rho_Ah=0.46, rho_Ar=0.43, rho_Ao=3.0,
    mu_E=0.56, mu_1L=0.44, mu_2L=0.05, mu_P=0.37, mu_Ah=0.18, mu_Ar=0.0043, mu_Ao=0.41,
)


def condense(raw: RawRates) -> ParameterSet:
    return ParameterSet(
        b=raw.b,
        theta=raw.rho_Ao,
        e=raw.rho_E,
        a=raw.rho_L,
        p=raw.rho_P,
        h=raw.rho_Ah,
        r=raw.rho_Ar,
        e_hat=raw.mu_E + raw.rho_E,
        l1_hat=raw.mu_1L + raw.rho_L,
        l2_hat=raw.mu_2L,
        p_hat=raw.mu_P + raw.rho_P,
        h_hat=raw.mu_Ah + raw.rho_Ah,
        r_hat=raw.mu_Ar + raw.rho_Ar,
        theta_hat=raw.mu_Ao + raw.rho_Ao,
    )


def sample_raw(rng: np.random.Generator) -> RawRates:
    """Uniform draw of every rate from its typical range."""
    return RawRates(**{k: float(rng.uniform(lo, hi)) for k, (lo, hi) in RATE_RANGES.items()})


def sample_params(rng: np.random.Generator) -> ParameterSet:
    return condense(sample_raw(rng))


# ---------------------------------------------------------------------------
# the map
# ---------------------------------------------------------------------------


def in_cone(v) -> bool:
    return bool(np.all(np.asarray(v) >= 0))


def step(params: ParameterSet, v) -> np.ndarray:
    """One application of the quadratic map. Works on (..., 6) arrays."""
    v = np.asarray(v, dtype=float)
    E, L, P, H, R, O = (v[..., i] for i in range(6))
    q = params
    return np.stack([
        q.b * q.theta * O + (1 - q.e_hat) * E,
        q.e * E + (1 - q.l1_hat) * L - q.l2_hat * L * L,
        q.a * L + (1 - q.p_hat) * P,
        q.p * P + q.theta * O + (1 - q.h_hat) * H,
        q.h * H + (1 - q.r_hat) * R,
        q.r * R + (1 - q.theta_hat) * O,
    ], axis=-1)


def fixed_residual(params: ParameterSet, v) -> float:
    return nm.inf_norm(step(params, v) - np.asarray(v, dtype=float))


@dataclass
class Trajectory:
    states: np.ndarray
    dt: float | None = None
    cone_exits: list[int] = field(default_factory=list)
    clamp_events: list[int] = field(default_factory=list)
    divergent: bool = False

    def __len__(self):
        return len(self.states)

    def __getitem__(self, k):
        return self.states[k]

    def to_csv(self, out=None) -> str:
        buf = io.StringIO()
        buf.write("n," + ",".join(STATE_NAMES) + "\n")
        for n, row in enumerate(self.states):
            buf.write(f"{n}," + ",".join(f"{x:.17g}" for x in row) + "\n")
        text = buf.getvalue()
        if out is not None:
            with open(out, "w", newline="\n") as fh:
                fh.write(text)
        return text


def _too_big(v) -> bool:
    return not np.all(np.isfinite(v)) or bool(np.any(np.abs(v) > OVERFLOW_LIMIT))


def orbit(params: ParameterSet, v0, n: int, clamp: bool = False) -> Trajectory:
    """Iterate the map ``n`` times from ``v0``.

    Cone exits are recorded (not corrected) unless ``clamp`` is set, in
    which case negative coordinates are zeroed after each step. Raises
    Overflow, carrying the partial trajectory, once a coordinate exceeds
    1e300 in magnitude.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    states = [np.array(v0, dtype=float)]
    traj = Trajectory(np.empty((0, 6)))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n + 1):
            v = step(params, states[-1])
            if _too_big(v):
                traj.states = np.array(states)
                traj.divergent = True
                raise Overflow(f"orbit overflowed at step {k}", traj)
            if not in_cone(v):
                if clamp:
                    v = np.maximum(v, 0.0)
                    traj.clamp_events.append(k)
                    log.info("clamped negative coordinates at step %d", k)
                else:
                    traj.cone_exits.append(k)
            states.append(v)
    traj.states = np.array(states)
    return traj


# ---------------------------------------------------------------------------
# Jacobian and spectra
# ---------------------------------------------------------------------------


def jacobian_at_L(params: ParameterSet, L: float) -> np.ndarray:
    q = params
    d = q.survivals(L)
    J = np.diag(d)
    J[0, 5] = q.b * q.theta
    J[1, 0] = q.e
    J[2, 1] = q.a
    J[3, 2] = q.p
    J[3, 5] = q.theta
    J[4, 3] = q.h
    J[5, 4] = q.r
    return J


def jacobian(params: ParameterSet, v) -> np.ndarray:
    """Jacobian of the map at ``v``; only entry (2,2) depends on the state."""
    return jacobian_at_L(params, float(np.asarray(v)[1]))


def char_poly(params: ParameterSet, L: float) -> nm.Polynomial:
    """det(J - x I) at larval density L, expanded in factored form.

    (d1-x)(d2-x)(d3-x)[(d4-x)(d5-x)(d6-x) + h r theta] - a b e h p r theta
    """
    d = params.survivals(L)
    f = [nm.Polynomial([di, -1.0]) for di in d]
    q = params
    inner = f[3] * f[4] * f[5] + q.h * q.r * q.theta
    return f[0] * f[1] * f[2] * inner - q.egg_cycle_product


class FixedPointKind(str, enum.Enum):
    ATTRACTING = "Attracting"
    REPELLING = "Repelling"
    SADDLE = "Saddle"
    NON_HYPERBOLIC = "NonHyperbolic"


@dataclass
class StabilityClass:
    kind: FixedPointKind
    stable_dim: int
    unstable_dim: int
    unit_count: int


def classify_spectrum(values, band: float = HYPERBOLIC_BAND) -> StabilityClass:
    mod = np.abs(np.asarray(values, dtype=complex))
    unit = int(np.sum(np.abs(mod - 1) <= band))
    stable = int(np.sum(mod < 1 - band))
    unstable = int(np.sum(mod > 1 + band))
    if unit:
        kind = FixedPointKind.NON_HYPERBOLIC
    elif unstable == 0:
        kind = FixedPointKind.ATTRACTING
    elif stable == 0:
        kind = FixedPointKind.REPELLING
    else:
        kind = FixedPointKind.SADDLE
    return StabilityClass(kind, stable, unstable, unit)


@dataclass
class FixedPointReport:
    point: np.ndarray
    source: str
    residual: float
    C: float | None = None
    spectrum: nm.SpectrumReport | None = None
    kind: FixedPointKind | None = None
    stable_dim: int | None = None
    unstable_dim: int | None = None

    @property
    def in_cone(self) -> bool:
        return in_cone(self.point)


def classify(params: ParameterSet, point, source: str = "Newton",
             band: float = HYPERBOLIC_BAND, fixed_tol: float = 1e-8) -> FixedPointReport:
    """Stability type of a verified fixed point from its Jacobian spectrum."""
    point = np.asarray(point, dtype=float)
    res = fixed_residual(params, point)
    if not res <= fixed_tol:
        raise NotAFixedPoint(f"||M(v) - v|| = {res:.3g} exceeds {fixed_tol:g}")
    spec = nm.spectrum(jacobian(params, point))
    cls = classify_spectrum(spec.values, band)
    return FixedPointReport(point, source, res, None, spec, cls.kind,
                            cls.stable_dim, cls.unstable_dim)


# ---------------------------------------------------------------------------
# fixed points
# ---------------------------------------------------------------------------


def larva_cycle_constant(params: ParameterSet) -> float:
    """C with L* = C O* on the interior branch."""
    q = params
    return (q.theta / q.a) * (q.p_hat / q.p) * (
        (q.h_hat / q.h) * (q.r_hat / q.r) * (q.theta_hat / q.theta) - 1)


def _point_from_O(params: ParameterSet, O: float, C: float) -> np.ndarray:
    q = params
    return np.array([
        q.b * q.theta / q.e_hat * O,
        C * O,
        q.a / q.p_hat * C * O,
        q.r_hat / q.r * q.theta_hat / q.h * O,
        q.theta_hat / q.r * O,
        O,
    ])


@dataclass
class ClosedFormFixedPoints:
    C: float
    P0: FixedPointReport
    candidates: dict[str, np.ndarray]
    residuals: dict[str, float]

    @property
    def verified(self) -> list[str]:
        return [k for k, r in self.residuals.items() if r <= FIXED_POINT_TOL]

    @property
    def L_star(self) -> dict[str, float]:
        return {k: float(v[1]) for k, v in self.candidates.items()}


def fixed_points_closed_form(params: ParameterSet) -> ClosedFormFixedPoints:
    """Origin plus the interior fixed point from two closed-form variants.

    ``reference`` divides by l1_hat*l2_hat*C^2; ``rederived`` by
    e_hat*l2_hat*C^2, which is what eliminating the linear equations gives.
    Both are kept and residual-checked under the map.
    """
    q = params
    C = larva_cycle_constant(q)
    if C == 0:
        raise DegenerateParameters("C = 0: interior fixed point undefined")
    num = q.e * q.b * q.theta - q.e_hat * q.l1_hat * C
    dens = {"reference": q.l1_hat * q.l2_hat * C * C, "rederived": q.e_hat * q.l2_hat * C * C}
    if any(d == 0 for d in dens.values()):
        raise DegenerateParameters("O* denominator vanishes")
    cands = {k: _point_from_O(q, num / d, C) for k, d in dens.items()}
    residuals = {k: fixed_residual(q, v) for k, v in cands.items()}
    origin = np.zeros(6)
    P0 = FixedPointReport(origin, "ClosedForm", fixed_residual(q, origin), C)
    return ClosedFormFixedPoints(C, P0, cands, residuals)


def _map_residual(params):
    def F(v):
        return step(params, v) - v

    def J(v):
        return jacobian(params, v) - np.eye(6)

    return F, J


def _polished_newton(F, J, x0, tol, maxit=100):
    res = nm.newton_nd(F, x0, J, tol=tol, maxit=maxit)
    x, r = res.x, res.residual
    for _ in range(3):
        try:
            dx = nm.lin_solve(J(x), -F(x))
        except Exception:
            break
        xn = x + dx
        rn = nm.inf_norm(F(xn))
        if rn < r:
            x, r = xn, rn
        else:
            break
    return x, r, res.iterations


def default_seeds(params: ParameterSet) -> list[np.ndarray]:
    seeds = [np.full(6, 1e-3)]
    try:
        cf = fixed_points_closed_form(params)
        seeds += list(cf.candidates.values())
    except DegenerateParameters:
        pass
    return seeds


def _dedup(points, scale_tol=1e-6):
    kept = []
    for p in points:
        if not any(nm.inf_norm(p - k) <= scale_tol * max(1.0, nm.inf_norm(k)) for k in kept):
            kept.append(p)
    return kept


def fixed_points_newton(params: ParameterSet, seeds=None,
                        tol: float = FIXED_POINT_TOL) -> list[FixedPointReport]:
    """Fixed points found by Newton on M(v) - v from each seed.

    Seeds that fail to converge are skipped; survivors are deduplicated
    and sorted by the L coordinate.
    """
    if seeds is None:
        seeds = default_seeds(params)
    F, J = _map_residual(params)
    found = []
    for s in seeds:
        try:
            x, r, _ = _polished_newton(F, J, np.asarray(s, dtype=float), tol)
        except (NoConvergence, SingularJacobian) as exc:
            log.debug("seed %s failed: %s", s, exc)
            continue
        if r <= tol:
            # round-off debris such as -1e-65 would spoil cone membership
            snapped = np.where(np.abs(x) <= 1e-14 * max(1.0, nm.inf_norm(x)), 0.0, x)
            if fixed_residual(params, snapped) <= max(r, tol):
                x = snapped
            found.append(x)
    found = _dedup(found)
    found.sort(key=lambda v: (v[1], v[0]))
    return [FixedPointReport(v, "Newton", fixed_residual(params, v),
                             larva_cycle_constant(params)) for v in found]


# ---------------------------------------------------------------------------
# period two
# ---------------------------------------------------------------------------


@dataclass
class TwoCycle:
    v: np.ndarray
    w: np.ndarray
    residual: float


def period2_search(params: ParameterSet, seeds=None, tol: float = FIXED_POINT_TOL,
                   n_seeds: int = 1000, seed: int = 20190101,
                   fixed_tol: float = 1e-6) -> list[TwoCycle]:
    """Points with M(M(v)) = v that are not fixed points.

    Default seeds are uniform over [0, 3 max P1]^6 where P1 is the
    interior fixed point. A converged v is dropped as period-1 when
    ``||M(v) - v|| <= fixed_tol * max(1, ||v||)``.
    """
    if seeds is None:
        fps = fixed_points_newton(params)
        top = max([nm.inf_norm(f.point) for f in fps] + [1.0])
        rng = np.random.default_rng(seed)
        seeds = rng.uniform(0.0, 3 * top, size=(n_seeds, 6))

    def F(v):
        return step(params, step(params, v)) - v

    def J(v):
        return jacobian(params, step(params, v)) @ jacobian(params, v) - np.eye(6)

    def Fb(X):
        return step(params, step(params, X)) - X

    def Jb(X):
        return _jacobian_batch(params, step(params, X)) @ _jacobian_batch(params, X) - np.eye(6)

    sweep = nm.newton_batch(Fb, Jb, np.asarray(seeds, dtype=float), tol=tol)
    cycles = []
    for x0 in sweep.x[sweep.converged]:
        try:
            x, r, _ = _polished_newton(F, J, x0, tol)
        except (NoConvergence, SingularJacobian):
            continue
        if r > tol:
            continue
        if fixed_residual(params, x) <= fixed_tol * max(1.0, nm.inf_norm(x)):
            continue
        if any(_same(x, c.v) or _same(x, c.w) for c in cycles):
            continue
        cycles.append(TwoCycle(x, step(params, x), r))
    cycles.sort(key=lambda c: tuple(c.v))
    return cycles


def _jacobian_batch(params, X):
    J = np.broadcast_to(jacobian_at_L(params, 0.0), X.shape[:-1] + (6, 6)).copy()
    J[..., 1, 1] = 1 - params.l1_hat - 2 * params.l2_hat * X[..., 1]
    return J


def _same(a, b, tol=1e-6):
    return nm.inf_norm(a - b) <= tol * max(1.0, nm.inf_norm(b))


# ---------------------------------------------------------------------------
# continuous-time comparison
# ---------------------------------------------------------------------------


def _as_params(p) -> ParameterSet:
    return condense(p) if isinstance(p, RawRates) else p


def ode_rhs(params, v) -> np.ndarray:
    """Right-hand side of the ODE system; equals M(v) - v."""
    q = _as_params(params)
    v = np.asarray(v, dtype=float)
    E, L, P, H, R, O = v
    return np.array([
        q.b * q.theta * O - q.e_hat * E,
        q.e * E - q.l1_hat * L - q.l2_hat * L * L,
        q.a * L - q.p_hat * P,
        q.p * P + q.theta * O - q.h_hat * H,
        q.h * H - q.r_hat * R,
        q.r * R - q.theta_hat * O,
    ])


def ode_step(params, v, dt: float) -> np.ndarray:
    """One classical RK4 step."""
    q = _as_params(params)
    v = np.asarray(v, dtype=float)
    k1 = ode_rhs(q, v)
    k2 = ode_rhs(q, v + 0.5 * dt * k1)
    k3 = ode_rhs(q, v + 0.5 * dt * k2)
    k4 = ode_rhs(q, v + dt * k3)
    return v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def ode_integrate(params, v0, T: float, dt: float = 0.01) -> Trajectory:
    """Fixed-step RK4 on [0, T]; the last step is shortened to land on T."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if T < 0:
        raise ValueError("T must be >= 0")
    q = _as_params(params)
    n_full = int(math.floor(T / dt + 1e-9))
    rest = T - n_full * dt
    steps = [dt] * n_full + ([rest] if rest > 1e-12 * dt else [])
    states = [np.array(v0, dtype=float)]
    traj = Trajectory(np.empty((0, 6)), dt=dt)
    with np.errstate(over="ignore", invalid="ignore"):
        for k, h in enumerate(steps, 1):
            v = ode_step(q, states[-1], h)
            if _too_big(v):
                traj.states = np.array(states)
                traj.divergent = True
                raise Overflow(f"integration overflowed at step {k}", traj)
            if not in_cone(v):
                traj.cone_exits.append(k)
            states.append(v)
    traj.states = np.array(states)
    return traj


def warn_ranges(params) -> list[str]:
    msgs = params.range_warnings()
    for m in msgs:
        warnings.warn(m, stacklevel=2)
    return msgs
