"""Evolution algebra whose structure matrix is the map's Jacobian.

Conventions: row i of the structure matrix A holds the coefficients of
e_i^2, so the product of two elements is ``A.T @ (x * y)``. Basis indices
in the public API (``basis_power``, ``descendants``, ``modular_indices``)
are 1-based, matching e_1 ... e_6.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from . import numerics as nm
from .errors import (
    ClosureFailure,
    DegenerateParameters,
    DomainViolation,
)

log = logging.getLogger(__name__)

ZERO_TOL = 1e-12
IDEMPOTENT_TOL = 1e-8
SIMPLE_DET_TOL = 1e-9
SCAN_LIMIT = 1e3


@dataclass(frozen=True)
class StructureMatrix:
    A: np.ndarray
    epsilon: float | None = None
    params: dyn.ParameterSet | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]


def structure_matrix(params: dyn.ParameterSet, epsilon: float = 0.0) -> StructureMatrix:
    """Algebra anchored at larval density ``epsilon`` (0 for the origin)."""
    return StructureMatrix(dyn.jacobian_at_L(params, epsilon), float(epsilon), params)


def from_matrix(A) -> StructureMatrix:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("structure matrix must be square")
    return StructureMatrix(A)


def interior_epsilon(params: dyn.ParameterSet) -> float:
    """L coordinate of the residual-verified interior fixed point."""
    fps = [f for f in dyn.fixed_points_newton(params) if abs(f.point[1]) > 1e-9]
    if not fps:
        raise DegenerateParameters("no interior fixed point found")
    pos = [f for f in fps if f.point[1] > 0]
    return float((pos or fps)[0].point[1])


def _A(S) -> np.ndarray:
    return S.A if isinstance(S, StructureMatrix) else np.asarray(S, dtype=float)


# ---------------------------------------------------------------------------
# products
# ---------------------------------------------------------------------------


def multiply(S, x, y) -> np.ndarray:
    """(xy)_k = sum_i a_ik x_i y_i."""
    return _A(S).T @ (np.asarray(x, dtype=float) * np.asarray(y, dtype=float))


def evolution_map(S, x) -> np.ndarray:
    return multiply(S, x, x)


def basis(n: int = 6) -> list[np.ndarray]:
    return list(np.eye(n))


def limit_tag(a: float) -> str:
    if abs(abs(a) - 1.0) <= ZERO_TOL:
        return "Constant"
    return "Zero" if abs(a) < 1 else "Infinity"


def basis_power(S, i: int, m: int):
    """e_i^m = a_ii^(m-2) e_i^2 and the m -> infinity behaviour."""
    if m < 2:
        raise ValueError("m must be >= 2")
    A = _A(S)
    a = A[i - 1, i - 1]
    return a ** (m - 2) * A[i - 1], limit_tag(a)


# ---------------------------------------------------------------------------
# absolute nilpotents
# ---------------------------------------------------------------------------


def cascade_zero(S) -> set[int]:
    """Coordinates forced to zero in any solution of x^2 = 0.

    Equation k reads sum_i a_ik x_i^2 = 0. If every still-unknown term has
    a coefficient of the same strict sign, all of those coordinates vanish;
    this propagates until nothing changes. Returned indices are 1-based.
    """
    A = _A(S)
    n = A.shape[0]
    zero: set[int] = set()
    changed = True
    while changed:
        changed = False
        for k in range(n):
            live = [i for i in range(n) if i not in zero and abs(A[i, k]) > ZERO_TOL]
            if not live:
                continue
            signs = {np.sign(A[i, k]) for i in live}
            if len(signs) == 1:
                zero.update(live)
                changed = True
    return {i + 1 for i in zero}


@dataclass
class NilpotentSearch:
    elements: list[np.ndarray]
    cascade_certified: bool
    det_nonzero: bool
    n_starts: int
    n_converged: int
    max_converged_norm: float

    @property
    def unique_zero(self) -> bool:
        return len(self.elements) == 1 and not np.any(self.elements[0])


def absolute_nilpotents(S, n_starts: int = 1000, seed: int = 7,
                        box: float = 10.0) -> NilpotentSearch:
    """Solutions of x^2 = 0: structural certificate plus Newton multistart.

    Starts are uniform in [-box, box]^n. Nonzero solutions come in cones
    where the Jacobian is singular, so the sweep takes Gauss-Newton
    (pseudo-inverse) steps. Iterates are driven to
    ``||V(x)|| <= 1e-24``; any converged iterate with ``||x|| <= 1e-8`` is
    read as the zero element.
    """
    A = _A(S)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    X0 = rng.uniform(-box, box, size=(n_starts, n))

    def F(X):
        return (X * X) @ A

    def J(X):
        return 2.0 * A.T[None, :, :] * X[:, None, :]

    sweep = nm.newton_batch(F, J, X0, tol=1e-24, maxit=200, least_squares=True)
    conv = sweep.x[sweep.converged]
    norms = np.max(np.abs(conv), axis=1) if conv.size else np.zeros(0)
    elements = [np.zeros(n)]
    for x, nx in zip(conv, norms):
        if nx > 1e-8 and not any(nm.inf_norm(x - e) <= 1e-8 for e in elements):
            elements.append(x)
    det, _ = nm.det_rank(A)
    return NilpotentSearch(
        elements=elements,
        cascade_certified=len(cascade_zero(A)) == n,
        det_nonzero=abs(det) > SIMPLE_DET_TOL * nm.inf_norm(A),
        n_starts=n_starts,
        n_converged=int(sweep.converged.sum()),
        max_converged_norm=float(norms.max()) if norms.size else 0.0,
    )


# ---------------------------------------------------------------------------
# idempotents
# ---------------------------------------------------------------------------


def f_ab(t: float, a: float, b: float) -> float:
    """sqrt((t - a t^2) / b), defined where t - a t^2 >= 0."""
    if not b > 0:
        raise DomainViolation("b must be > 0")
    v = t - a * t * t
    if v < 0:
        if v >= -16 * nm.EPS * (abs(t) + abs(a) * t * t):
            v = 0.0
        else:
            raise DomainViolation(f"t - a t^2 = {v:.3g} < 0 at t={t:g}, a={a:g}")
    return math.sqrt(v / b)


def f_ab_domain(a: float) -> list[tuple[float, float]]:
    """Intervals where t - a t^2 >= 0."""
    if a > 0:
        return [(0.0, 1.0 / a)]
    if a < 0:
        return [(-math.inf, 1.0 / a), (0.0, math.inf)]
    return [(0.0, math.inf)]


def _f_ab_array(t, a, b):
    v = t - a * t * t
    tiny = -16 * nm.EPS * (np.abs(t) + abs(a) * t * t)
    v = np.where((v < 0) & (v >= tiny), 0.0, v)
    with np.errstate(invalid="ignore"):
        return np.where(v >= 0, np.sqrt(np.abs(v) / b), np.nan)


# chain links: x_{k+1} from equation k, (diag index, off-diagonal row)
_CHAIN = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]
# which links carry a free sign: x2, x3, x6
_SIGNED = {0: 0, 1: 1, 4: 2}


def _check_pattern(A):
    needed = [(1, 0), (2, 1), (3, 2), (4, 3), (5, 4), (0, 5)]
    for i, k in needed:
        if not abs(A[i, k]) > ZERO_TOL:
            raise ValueError("structure matrix does not have the mosquito cycle pattern")


def branches() -> list[tuple[bool, bool, bool]]:
    """All 8 sign choices for (x2, x3, x6); True means the + root."""
    return [tuple(not s for s in bits) for bits in itertools.product([False, True], repeat=3)]


def branch_index(signs) -> int:
    return branches().index(tuple(bool(s) for s in signs))


def idempotent_chain(S, x1: float, signs=(True, True, True)) -> np.ndarray:
    """Lift x1 to (x1..x6) through the first five idempotent equations.

    Equation k, x_k = a_kk x_k^2 + a_{k+1,k} x_{k+1}^2, gives
    x_{k+1} = +-f(x_k) with f = f_ab(., a_kk, a_{k+1,k}). Signs are free
    for x2, x3 and x6; x4 and x5 always take the nonnegative root.
    Raises DomainViolation if some step leaves the domain of f.
    """
    A = _A(S)
    _check_pattern(A)
    x = [float(x1)]
    for link, (d, off) in enumerate(_CHAIN):
        v = f_ab(x[-1], A[d, d], A[off, d])
        if link in _SIGNED and not signs[_SIGNED[link]]:
            v = -v
        x.append(v)
    return np.array(x)


def _chain_array(A, x1, signs):
    x = [x1]
    for link, (d, off) in enumerate(_CHAIN):
        v = _f_ab_array(x[-1], A[d, d], A[off, d])
        if link in _SIGNED and not signs[_SIGNED[link]]:
            v = -v
        x.append(v)
    return x


def closing_residual(S, x1, signs):
    """Sixth idempotent equation evaluated along the chain (vectorised).

    Zero exactly when the chained element is idempotent; NaN off-domain.
    """
    A = _A(S)
    x = _chain_array(A, np.asarray(x1, dtype=float), signs)
    return A[:, 5] @ np.array([xi * xi for xi in x]) - x[5]


@dataclass
class IdempotentSolution:
    element: np.ndarray
    branch: tuple[bool, bool, bool] | None
    residual: float
    method: str
    methods: tuple[str, ...] = ()

    @property
    def x1(self) -> float:
        return float(self.element[0])


def idempotent_residual(S, x) -> float:
    return nm.inf_norm(evolution_map(S, x) - np.asarray(x, dtype=float))


def _branch_of(x) -> tuple[bool, bool, bool]:
    return (bool(x[1] >= 0), bool(x[2] >= 0), bool(x[5] >= 0))


def _relative_ok(S, x, rel=1e-6) -> bool:
    """Componentwise relative residual; rejects near-zero pseudo-solutions."""
    r = np.abs(evolution_map(S, x) - x)
    return bool(np.all(r <= rel * np.abs(x)))


def x1_scan_intervals(S) -> list[tuple[float, float]]:
    A = _A(S)
    out = []
    for lo, hi in f_ab_domain(A[0, 0]):
        lo, hi = max(lo, -SCAN_LIMIT), min(hi, SCAN_LIMIT)
        if hi > lo:
            out.append((lo, hi))
    return out


def chain_idempotents(S, grid_n: int = 10**5, tol: float = 1e-10) -> list[IdempotentSolution]:
    """Nonzero idempotents from sign-change scans of the closing residual.

    For each sign branch the x1 range is first split into the pieces where
    the whole chain is defined; each piece is then scanned with points
    clustered geometrically toward both of its ends, since roots crowd
    the places where some x_k approaches an edge of its domain. Roots
    closer to such an edge than x1's floating-point resolution are out of
    reach of this route.
    """
    A = _A(S)
    _check_pattern(A)
    sols = []
    intervals = x1_scan_intervals(A)
    for signs in branches():
        g = lambda t, signs=signs: closing_residual(A, t, signs)
        pieces = [piece for lo, hi in intervals
                  for piece in nm.defined_intervals(g, lo, hi, grid_n, vectorized=True,
                                                    cluster_ends=True)]
        roots = nm.bracketed_roots(g, pieces, grid_n, tol=tol, vectorized=True,
                                   cluster_ends=True)
        for x1 in roots:
            if x1 == 0:
                continue
            try:
                x = idempotent_chain(A, x1, signs)
            except DomainViolation:
                continue
            x = _polish_idempotent(A, x)
            res = idempotent_residual(A, x)
            if res <= IDEMPOTENT_TOL:
                sols.append(IdempotentSolution(x, signs, res, "ChainReduction"))
    return _sorted(_merge(sols))


def _polish_idempotent(A, x):
    F = lambda y: evolution_map(A, y) - y
    J = lambda y: 2.0 * A.T * y[None, :] - np.eye(len(y))
    best, rbest = x, idempotent_residual(A, x)
    for _ in range(3):
        try:
            y = best + nm.lin_solve(J(best), -F(best))
        except Exception:
            break
        r = idempotent_residual(A, y)
        if r < rbest:
            best, rbest = y, r
        else:
            break
    return best


def newton_idempotents(S, n_starts: int = 1000, seed: int = 11) -> list[IdempotentSolution]:
    """Nonzero idempotents from Newton multistart on V(x) - x = 0.

    Half of the starts are uniform in [-3, 3]^n, half have log-uniform
    magnitudes in [1e-5, 3] with random signs. Converged points must also
    pass a componentwise relative residual test, which discards
    pseudo-solutions whose small coordinates are only approximately
    consistent.
    """
    A = _A(S)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    half = n_starts // 2
    X0 = np.vstack([
        rng.uniform(-3, 3, size=(half, n)),
        rng.choice([-1.0, 1.0], size=(n_starts - half, n))
        * 10 ** rng.uniform(-5, math.log10(3), size=(n_starts - half, n)),
    ])
    I = np.eye(n)

    def F(X):
        return (X * X) @ A - X

    def J(X):
        return 2.0 * A.T[None, :, :] * X[:, None, :] - I

    sweep = nm.newton_batch(F, J, X0, tol=1e-13, maxit=100)
    sols = []
    for x in sweep.x[sweep.converged]:
        if nm.inf_norm(x) <= 1e-8:
            continue
        x = _polish_idempotent(A, x)
        res = idempotent_residual(A, x)
        if res <= IDEMPOTENT_TOL and _relative_ok(A, x):
            sols.append(IdempotentSolution(x, _branch_of(x), res, "NewtonMultistart"))
    return _sorted(_merge(sols))


def _merge(sols, tol=1e-6):
    out: list[IdempotentSolution] = []
    for s in sols:
        for o in out:
            if nm.inf_norm(s.element - o.element) <= tol * max(1.0, nm.inf_norm(o.element)):
                if s.method not in o.methods:
                    o.methods = o.methods + (s.method,)
                break
        else:
            s.methods = s.methods or (s.method,)
            out.append(s)
    return out


def _sorted(sols):
    def key(s):
        return (s.x1, branch_index(s.branch) if s.branch else 99)
    return sorted(sols, key=key)


def find_idempotents(S, grid_n: int = 10**5, n_starts: int = 1000,
                     seed: int = 11) -> list[IdempotentSolution]:
    """Zero element plus every idempotent found by either solver.

    ``methods`` on each solution lists which solvers recovered it.
    """
    A = _A(S)
    zero = IdempotentSolution(np.zeros(A.shape[0]), None, 0.0, "Trivial", ("Trivial",))
    chain = chain_idempotents(A, grid_n)
    newton = newton_idempotents(A, n_starts, seed)
    merged = _merge([IdempotentSolution(s.element, s.branch, s.residual, s.method)
                     for s in chain + newton])
    return [zero] + _sorted(merged)


# ---------------------------------------------------------------------------
# structure: nilpotency, descendants, simplicity, ideals, radical
# ---------------------------------------------------------------------------


def _edges(A):
    return np.abs(A) > ZERO_TOL


def is_nilpotent(S) -> bool:
    """True iff the graph i -> k (a_ik != 0) has no cycle, self-loops included.

    Equivalently some simultaneous reordering of rows and columns makes A
    strictly upper triangular.
    """
    E = _edges(_A(S))
    n = E.shape[0]
    indeg = E.sum(axis=0).astype(int)
    queue = [k for k in range(n) if indeg[k] == 0]
    seen = 0
    while queue:
        i = queue.pop()
        seen += 1
        for k in np.flatnonzero(E[i]):
            indeg[k] -= 1
            if indeg[k] == 0:
                queue.append(k)
    return seen == n


def descendants(S, i0: int, m: int | None = None) -> set[int]:
    """D^m(i0) for a given generation m, or all descendants D(i0) if m is None."""
    E = _edges(_A(S))
    n = E.shape[0]
    if not 1 <= i0 <= n:
        raise ValueError(f"index must be in 1..{n}")

    def first(k):
        return {int(j) + 1 for j in np.flatnonzero(E[k - 1])}

    gen = first(i0)
    if m is not None:
        for _ in range(m - 1):
            gen = set().union(*(first(k) for k in gen)) if gen else set()
        return gen
    total = set(gen)
    while True:
        gen = set().union(*(first(k) for k in gen)) if gen else set()
        if gen <= total:
            return total
        total |= gen


@dataclass
class SimplicityVerdict:
    simple: bool
    det: float
    det_nonzero: bool
    descendants_complete: bool
    incomplete: list[int] = field(default_factory=list)

    def __bool__(self):
        return self.simple


def is_simple(S) -> SimplicityVerdict:
    """Nonzero determinant and D(i) = {1..n} for every i."""
    A = _A(S)
    n = A.shape[0]
    d = float(nm.det(A))
    nonzero = abs(d) > SIMPLE_DET_TOL * nm.inf_norm(A)
    full = set(range(1, n + 1))
    bad = [i for i in range(1, n + 1) if descendants(A, i) != full]
    return SimplicityVerdict(nonzero and not bad, d, nonzero, not bad, bad)


def _orthonormal(vectors, tol=1e-12):
    Q = []
    for v in vectors:
        w = np.array(v, dtype=float)
        for _ in range(2):
            for q in Q:
                w = w - (q @ w) * q
        nw = np.linalg.norm(w)
        if nw > tol * max(1.0, np.linalg.norm(v)):
            Q.append(w / nw)
    return np.array(Q)


def span_distance(Q, v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.linalg.norm(v - Q.T @ (Q @ v))) if len(Q) else float(np.linalg.norm(v))


@dataclass
class IdealDescription:
    basis: list[np.ndarray]
    dim: int
    proper: bool
    last_square_gap: float
    closure_gap: float
    basis_vector_gaps: list[float]


def proper_ideal(S, tol: float = 1e-9) -> IdealDescription | None:
    """The nonzero proper ideal span{e_1^2..e_5^2} when det(A) = 0, else None."""
    A = _A(S)
    n = A.shape[0]
    if is_simple(A).det_nonzero:
        return None
    rows = [A[i] for i in range(n - 1)]
    scale = max(1.0, nm.inf_norm(A))
    _, rank = nm.det_rank(np.array(rows))
    Q = _orthonormal(rows)
    last_gap = span_distance(Q, A[n - 1]) / scale
    closure = 0.0
    for u in rows:
        for k in range(n):
            ek = np.eye(n)[k]
            closure = max(closure, span_distance(Q, multiply(A, ek, u)) / scale)
    if closure > tol or last_gap > tol:
        raise ClosureFailure(f"ideal closure gap {max(closure, last_gap):.3g} exceeds {tol:g}")
    gaps = [span_distance(Q, np.eye(n)[k]) for k in range(n)]
    proper = rank < n and all(g > tol for g in gaps)
    return IdealDescription(rows, rank, proper, last_gap, closure, gaps)


def modular_indices(S) -> set[int]:
    """Indices i with a_ii != 0 and a_ki = 0 for every k != i (1-based)."""
    A = _A(S)
    E = _edges(A)
    out = set()
    for i in range(A.shape[0]):
        if E[i, i] and not np.any(np.delete(E[:, i], i)):
            out.add(i + 1)
    return out


def is_radical(S) -> bool:
    return not modular_indices(S)


# ---------------------------------------------------------------------------
# parameter conditions
# ---------------------------------------------------------------------------


def singular_b(params: dyn.ParameterSet, epsilon: float = 0.0) -> float:
    """The b that makes det(A_eps) vanish (det is affine in b)."""
    q = params
    d = q.survivals(epsilon)
    D = d[0] * d[1] * d[2] * (d[3] * d[4] * d[5] + q.h * q.r * q.theta)
    return D / (q.a * q.e * q.h * q.p * q.r * q.theta)


def unit_eigenvalue_b(params: dyn.ParameterSet, epsilon: float = 0.0) -> float:
    """The b that puts 1 in the spectrum of A_eps."""
    q = params
    lhs = q.e_hat * q.p_hat * (q.l1_hat + 2 * q.l2_hat * epsilon) * (
        q.h_hat * q.r_hat * q.theta_hat - q.h * q.r * q.theta)
    return lhs / (q.a * q.e * q.h * q.p * q.r * q.theta)


def with_b(params: dyn.ParameterSet, b: float) -> dyn.ParameterSet:
    if not b > 0:
        raise DegenerateParameters(f"solved b = {b:g} is not positive")
    return params.replace(b=b)


@dataclass
class LambdaOneCheck:
    holds: bool
    lhs: float
    rhs: float
    charpoly_at_one: float
    charpoly_says: bool

    @property
    def consistent(self) -> bool:
        return self.holds == self.charpoly_says

    def __bool__(self):
        return self.holds


def lambda_one_condition(params: dyn.ParameterSet, epsilon: float = 0.0,
                         rel: float = 1e-9) -> LambdaOneCheck:
    """Whether 1 is an eigenvalue of A_eps, via the closed-form identity.

    The identity's two sides are compared to relative ``rel``; the result
    is cross-checked against the characteristic polynomial at 1, judged on
    the same relative scale.
    """
    q = params
    lhs = q.e_hat * q.p_hat * (q.l1_hat + 2 * q.l2_hat * epsilon) * (
        q.h_hat * q.r_hat * q.theta_hat - q.h * q.r * q.theta)
    rhs = q.egg_cycle_product
    scale = max(abs(lhs), abs(rhs))
    holds = abs(lhs - rhs) <= rel * scale
    p1 = float(dyn.char_poly(q, epsilon)(1.0))
    return LambdaOneCheck(holds, lhs, rhs, p1, abs(p1) <= rel * scale)
