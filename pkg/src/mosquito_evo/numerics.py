"""Small dense numerical kernel.

Everything here works on tiny problems (polynomial degree <= 8, 6x6
matrices) and is written for transparency rather than speed: an
Aberth-Ehrlich polynomial root finder, Faddeev-LeVerrier characteristic
polynomials, LU-based solves/determinants/ranks, inverse-iteration
eigenvectors, a damped Newton method and a bracketing scalar root scan.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    NoConvergence,
    NonConvergence,
    SingularJacobian,
    SingularMatrix,
)

EPS = np.finfo(float).eps
MAX_DEGREE = 8

ROOT_TOL = 1e-10
RANK_TOL = 1e-9
NEWTON_TOL = 1e-11


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Polynomial:
    """Real or complex polynomial, coefficients lowest degree first.

    Trailing (highest-degree) zeros are stripped on construction, so
    ``degree`` is always the index of the last nonzero coefficient.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs))
        if not np.issubdtype(c.dtype, np.complexfloating):
            c = c.astype(float)
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:1] * 0
        if c.size - 1 > MAX_DEGREE:
            raise ValueError(f"degree {c.size - 1} exceeds {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.coeffs) or not np.any(self.coeffs.imag)

    def __call__(self, x):
        acc = np.zeros_like(np.asarray(x), dtype=np.result_type(x, self.coeffs, float))
        for c in self.coeffs[::-1]:
            acc = acc * x + c
        return acc[()] if acc.ndim == 0 else acc

    def abs_bound(self, x):
        """Evaluate sum |c_k| |x|^k, the natural scale for rounding in p(x)."""
        ax = np.abs(x)
        acc = 0.0 * ax
        for c in np.abs(self.coeffs[::-1]):
            acc = acc * ax + c
        return acc

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        k = np.arange(1, self.coeffs.size)
        return Polynomial(self.coeffs[1:] * k)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial(self.coeffs * other)
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        n = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(n, dtype=np.result_type(self.coeffs, other.coeffs))
        a[: self.coeffs.size] += self.coeffs
        a[: other.coeffs.size] += other.coeffs
        return Polynomial(a)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other


def linear(root: complex, lead: float = 1.0) -> Polynomial:
    """The polynomial lead * (x - root)."""
    return Polynomial([-lead * root, lead])


def _conjugate_pairs(z: np.ndarray) -> np.ndarray:
    """Symmetrize roots of a real polynomial.

    A root in the upper half plane is paired with the closest unused root
    in the lower half plane when that partner is nearer to its conjugate
    than the root is to the real axis; pairs are averaged, everything left
    over is real.
    """
    z = z.copy()
    order = np.argsort(-z.imag)
    used = np.zeros(z.size, dtype=bool)
    for i in order:
        if used[i] or z[i].imag <= 0:
            continue
        target = np.conj(z[i])
        cands = [j for j in range(z.size) if not used[j] and j != i and z[j].imag < 0]
        if not cands:
            continue
        j = min(cands, key=lambda k: abs(z[k] - target))
        if abs(z[j] - target) < abs(z[i].imag):
            m = 0.5 * (z[i] + np.conj(z[j]))
            z[i], z[j] = m, np.conj(m)
            used[i] = used[j] = True
    for i in range(z.size):
        if not used[i]:
            z[i] = complex(z[i].real, 0.0)
    return z


def _merge_clusters(p: Polynomial, z: np.ndarray, rounding: np.ndarray):
    """Replace numerically-multiple roots by their centroid.

    A group of roots within a small radius is collapsed when p at the
    centroid is no larger than the rounding level seen at the members,
    i.e. the group is a perturbed multiple root rather than distinct roots.
    Returns the new roots and per-root multiplicities.
    """
    n = z.size
    mult = np.ones(n, dtype=int)
    done = np.zeros(n, dtype=bool)
    out = z.copy()
    for i in range(n):
        if done[i]:
            continue
        radius = 2e-2 * max(1.0, abs(z[i]))
        members = [i]
        grew = True
        while grew:
            grew = False
            for j in range(n):
                if j in members or done[j]:
                    continue
                if min(abs(z[j] - z[k]) for k in members) <= radius:
                    members.append(j)
                    grew = True
        done[members] = True
        if len(members) == 1:
            continue
        c = np.mean(z[members])
        # an m-fold root is a simple root of the (m-1)-th derivative
        q = p
        for _ in range(len(members) - 1):
            q = q.derivative()
        dq = q.derivative()
        for _ in range(8):
            d = dq(c)
            if d == 0:
                break
            step = q(c) / d
            if abs(step) > radius:
                break
            c = c - step
        ref = max(max(abs(p(z[k])) for k in members), float(np.max(rounding[members])))
        if abs(p(c)) <= 10.0 * ref + 16 * EPS * p.abs_bound(c):
            out[members] = c
            mult[members] = len(members)
    return out, mult


def poly_roots(p: Polynomial, tol: float = ROOT_TOL, maxiter: int = 500,
               return_multiplicity: bool = False):
    """All complex roots of ``p`` by simultaneous Aberth-Ehrlich iteration.

    Roots are returned with multiplicity, sorted by (real, imag). For real
    polynomials complex roots come in exact conjugate pairs.

    Each root is checked against ``|p(z)| <= tol * sum_k |c_k| |z|^k``;
    failure or exceeding ``maxiter`` sweeps raises NonConvergence.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    n = p.degree
    if n < 1:
        raise ValueError("need degree >= 1")
    monic = Polynomial(p.coeffs / p.coeffs[-1])
    dmonic = monic.derivative()
    radius = 1.0 + float(np.max(np.abs(monic.coeffs[:-1])))
    k = np.arange(n)
    # off-axis phase and slightly varying radius avoid symmetric stalls
    z = radius * (1.0 + 0.01 * k / n) * np.exp(1j * (2 * np.pi * k / n + 0.4))
    done = np.zeros(n, dtype=bool)
    eye = np.eye(n, dtype=bool)
    for _ in range(maxiter):
        pv = monic(z)
        bound = 8 * EPS * monic.abs_bound(z)
        done |= np.abs(pv) <= bound
        if done.all():
            break
        dpv = dmonic(z)
        diff = z[:, None] - z[None, :]
        diff[eye] = 1.0
        inv = 1.0 / diff
        inv[eye] = 0.0
        denom = dpv - pv * inv.sum(axis=1)
        denom[denom == 0] = EPS
        w = np.where(done, 0.0, pv / denom)
        z = z - w
        done |= np.abs(w) <= 4 * EPS * np.abs(z)
    else:
        raise NonConvergence(f"Aberth iteration did not converge in {maxiter} sweeps")

    rounding = np.array([8 * EPS * monic.abs_bound(zi) for zi in z])
    z, mult = _merge_clusters(monic, z, rounding)
    if p.is_real:
        z = _conjugate_pairs(z)
    for zi in z:
        if abs(monic(zi)) > max(tol * monic.abs_bound(zi), 0.0):
            raise NonConvergence(f"root {zi} fails residual check")
    order = np.lexsort((z.imag, z.real))
    z, mult = z[order], mult[order]
    if return_multiplicity:
        return list(z), list(mult)
    return list(z)


# ---------------------------------------------------------------------------
# dense linear algebra
# ---------------------------------------------------------------------------


def inf_norm(A) -> float:
    A = np.asarray(A)
    if A.ndim == 1:
        return float(np.max(np.abs(A))) if A.size else 0.0
    return float(np.max(np.sum(np.abs(A), axis=1))) if A.size else 0.0


def _lu(A, pivot_floor: float | None = None):
    """LU factorisation with partial pivoting, in place on a copy.

    Returns (LU, perm, sign, min_pivot). With ``pivot_floor`` set, zero or
    tiny pivots are replaced by that value instead of being left as is.
    """
    U = np.array(A, dtype=np.result_type(A, float), copy=True)
    n = U.shape[0]
    perm = np.arange(n)
    sign = 1.0
    min_piv = math.inf
    for k in range(n):
        j = k + int(np.argmax(np.abs(U[k:, k])))
        if j != k:
            U[[k, j]] = U[[j, k]]
            perm[[k, j]] = perm[[j, k]]
            sign = -sign
        piv = U[k, k]
        if pivot_floor is not None and abs(piv) < pivot_floor:
            piv = U[k, k] = pivot_floor
        min_piv = min(min_piv, abs(piv))
        if piv == 0:
            continue
        U[k + 1:, k] /= piv
        U[k + 1:, k + 1:] -= np.outer(U[k + 1:, k], U[k, k + 1:])
    return U, perm, sign, min_piv


def _lu_solve(LU, perm, b):
    n = LU.shape[0]
    x = np.array(b, dtype=np.result_type(LU, b, float))[perm]
    for i in range(1, n):
        x[i] -= LU[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - LU[i, i + 1:] @ x[i + 1:]) / LU[i, i]
    return x


def lin_solve(A, b, tol: float | None = None) -> np.ndarray:
    """Solve ``A x = b`` by LU with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides. Raises
    SingularMatrix when some pivot is not above ``tol`` (default
    ``1e-13 * ||A||_inf``).
    """
    A = np.asarray(A)
    if tol is None:
        tol = 1e-13 * inf_norm(A)
    LU, perm, _, min_piv = _lu(A)
    if not min_piv > tol:
        raise SingularMatrix(f"no pivot above {tol:.3g} (smallest {min_piv:.3g})")
    b = np.asarray(b)
    if b.ndim == 1:
        return _lu_solve(LU, perm, b)
    return np.column_stack([_lu_solve(LU, perm, b[:, j]) for j in range(b.shape[1])])


def inverse(A, tol: float | None = None) -> np.ndarray:
    A = np.asarray(A)
    return lin_solve(A, np.eye(A.shape[0], dtype=np.result_type(A, float)), tol)


def det(A) -> float:
    A = np.asarray(A)
    if A.shape[0] == 0:
        return 1.0
    LU, _, sign, _ = _lu(A)
    return sign * np.prod(np.diag(LU))


def rref(A, tol: float = RANK_TOL):
    """Reduced row echelon form with partial pivoting.

    Columns whose best available pivot is not above ``tol * ||A||_inf``
    are treated as dependent. Returns (R, pivot_columns).
    """
    R = np.array(A, dtype=np.result_type(A, float), copy=True)
    m, n = R.shape
    thresh = tol * inf_norm(R)
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        j = r + int(np.argmax(np.abs(R[r:, c])))
        if not abs(R[j, c]) > thresh:
            R[r:, c] = 0.0
            continue
        R[[r, j]] = R[[j, r]]
        R[r] /= R[r, c]
        for i in range(m):
            if i != r and R[i, c] != 0:
                R[i] -= R[i, c] * R[r]
        pivots.append(c)
        r += 1
    return R, pivots


def det_rank(A, tol: float = RANK_TOL):
    """Determinant (LU, partial pivoting) and numerical rank.

    The rank counts the pivots of a row-echelon elimination whose
    magnitude exceeds ``tol * ||A||_inf``.
    """
    A = np.asarray(A, dtype=float)
    _, pivots = rref(A, tol)
    return float(det(A)), len(pivots)


def null_space(A, tol: float = RANK_TOL) -> np.ndarray:
    """Basis of Ker(A) as columns, read off the reduced echelon form."""
    R, pivots = rref(A, tol)
    n = R.shape[1]
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((n, len(free)), dtype=R.dtype)
    for k, f in enumerate(free):
        basis[f, k] = 1.0
        for row, pc in enumerate(pivots):
            basis[pc, k] = -R[row, f]
    return basis


def column_space(A, tol: float = RANK_TOL) -> np.ndarray:
    """Basis of Range(A): the pivot columns of A."""
    A = np.asarray(A)
    _, pivots = rref(A, tol)
    return A[:, pivots]


def _dyadic(x: float) -> tuple[int, int]:
    """(m, e) with x = m * 2**e exactly."""
    m, e = math.frexp(x)
    return int(m * (1 << 53)), e - 53


def faddeev_leverrier(A) -> Polynomial:
    """Characteristic polynomial det(A - x I) by the Faddeev-LeVerrier recursion.

    Run in exact integer arithmetic: every double is m * 2**e, so the
    matrix is a power of two times an integer matrix, whose recursion has
    integer iterates and exact divisions. The float recursion loses the
    low-order coefficients to cancellation once ||A|| is large.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    parts = [[_dyadic(float(x)) if x != 0 else (0, 0) for x in row] for row in A]
    emin = min((e for row in parts for m, e in row if m), default=0)
    B = [[m << (e - emin) if m else 0 for m, e in row] for row in parts]

    def matmul(X, Y):
        return [[sum(X[i][k] * Y[k][j] for k in range(n)) for j in range(n)] for i in range(n)]

    c = [0] * (n + 1)
    c[n] = 1
    M = [[0] * n for _ in range(n)]
    for k in range(1, n + 1):
        M = matmul(B, M)
        for i in range(n):
            M[i][i] += c[n - k + 1]
        tr = sum(B[i][j] * M[j][i] for i in range(n) for j in range(n))
        c[n - k] = -tr // k
    # det(x I - B) = sum c_j x^j and A = 2**emin B; flip sign to det(A - x I)
    sign = (-1) ** n
    out = []
    for j, cj in enumerate(c):
        shift = emin * (n - j)
        f = Fraction(cj) * (Fraction(2) ** shift)
        out.append(sign * float(f))
    return Polynomial(np.array(out))


# ---------------------------------------------------------------------------
# eigenproblems
# ---------------------------------------------------------------------------


@dataclass
class Eigenpair:
    value: complex
    vector: np.ndarray | None
    residual: float
    multiplicity: int = 1

    @property
    def defective(self) -> bool:
        return self.vector is None


def _normalize(v):
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    v = v / np.linalg.norm(v)
    if not np.any(v.imag):
        v = v.real.astype(complex)
    return v


def eig(A, tol: float = 1e-8, steps: int = 3) -> list[Eigenpair]:
    """Eigenpairs of a small real matrix.

    Eigenvalues are roots of the Faddeev-LeVerrier characteristic
    polynomial; each vector comes from inverse iteration on
    ``A - (lambda - mu) I`` with ``mu = 1e-10 ||A||``. A pair whose best
    residual ``||A v - lambda v||_inf`` exceeds ``tol * max(1, ||A||)`` is
    returned with ``vector=None``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    norm = max(inf_norm(A), 1.0)
    values, mult = poly_roots(faddeev_leverrier(A), return_multiplicity=True)
    mu = 1e-10 * norm
    start = _normalize(np.array([1.0 / (1 + 0.37 * i) for i in range(n)], dtype=complex))
    pairs = []
    for lam, m in zip(values, mult):
        lam = complex(lam)
        B = A.astype(complex) - (lam - mu) * np.eye(n)
        LU, perm, _, _ = _lu(B, pivot_floor=EPS * norm)
        v = start
        best = (math.inf, None)
        for _ in range(steps):
            w = _lu_solve(LU, perm, v)
            if not np.all(np.isfinite(w)) or not np.any(w):
                break
            v = _normalize(w)
            res = inf_norm(A @ v - lam * v)
            if res < best[0]:
                best = (res, v)
            if res <= 1e-14 * norm:
                break
        res, v = best
        if v is None or res > tol * norm:
            pairs.append(Eigenpair(lam, None, res, m))
        else:
            pairs.append(Eigenpair(lam, v, res, m))
    return pairs


def eigvals(A) -> list[complex]:
    return poly_roots(faddeev_leverrier(A))


@dataclass
class SpectrumReport:
    pairs: list[Eigenpair]
    values: np.ndarray = field(init=False)
    moduli: np.ndarray = field(init=False)
    spectral_radius: float = field(init=False)

    def __post_init__(self):
        self.values = np.array([p.value for p in self.pairs], dtype=complex)
        self.moduli = np.abs(self.values)
        self.spectral_radius = float(self.moduli.max()) if self.moduli.size else 0.0

    @property
    def residuals(self):
        return np.array([p.residual for p in self.pairs])

    @property
    def multiplicities(self):
        """Distinct eigenvalues with their algebraic multiplicities."""
        seen = []
        for p in self.pairs:
            if not any(v == p.value for v, _ in seen):
                seen.append((p.value, p.multiplicity))
        return seen


def spectrum(A, tol: float = 1e-8) -> SpectrumReport:
    return SpectrumReport(eig(A, tol))


# ---------------------------------------------------------------------------
# nonlinear equations
# ---------------------------------------------------------------------------


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual: float


def fd_jacobian(F, x, step: float = 1e-7):
    """Central-difference Jacobian of F at x."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(F(x))
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (np.atleast_1d(F(xp)) - np.atleast_1d(F(xm))) / (2 * h)
    return J


def newton_nd(F: Callable, x0, J: Callable | None = None, tol: float = NEWTON_TOL,
              maxit: int = 100, line_search: bool = True,
              diverge: float = 1e12) -> NewtonResult:
    """Newton's method for F(x) = 0 with optional backtracking.

    ``J`` defaults to central finite differences. Stops as soon as
    ``||F(x)||_inf <= tol``. Raises NoConvergence after ``maxit``
    iterations (or when ``||x||`` exceeds ``diverge``) and SingularJacobian
    when the linear step cannot be solved.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()

    def Fv(y):
        return np.atleast_1d(np.asarray(F(y), dtype=float))

    jac = J if J is not None else (lambda y: fd_jacobian(Fv, y))
    fx = Fv(x)
    res = inf_norm(fx)
    for it in range(maxit + 1):
        if not np.isfinite(res):
            raise NoConvergence("non-finite residual")
        if res <= tol:
            return NewtonResult(x, it, res)
        if it == maxit:
            break
        Jx = np.atleast_2d(np.asarray(jac(x), dtype=float))
        try:
            dx = lin_solve(Jx, -fx, tol=1e-14 * max(inf_norm(Jx), 1e-300))
        except SingularMatrix as exc:
            raise SingularJacobian(f"singular Jacobian at iteration {it}") from exc
        t = 1.0
        norm0 = np.linalg.norm(fx)
        while True:
            xn = x + t * dx
            fn = Fv(xn)
            if not line_search or np.linalg.norm(fn) < norm0 or t < 1e-4:
                break
            t *= 0.5
        x, fx = xn, fn
        res = inf_norm(fx)
        if inf_norm(x) > diverge:
            raise NoConvergence(f"iterate diverged at iteration {it + 1}")
    raise NoConvergence(f"no convergence in {maxit} iterations (residual {res:.3g})")


def _safe_eval(f, x):
    try:
        v = float(f(x))
    except (ValueError, ArithmeticError):
        return math.nan
    return v if math.isfinite(v) else math.nan


def _sample_interval(lo, hi, grid_n, cluster_ends):
    pts = [np.linspace(lo, hi, grid_n + 1)]
    if cluster_ends and hi > lo:
        width = hi - lo
        g = np.geomspace(max(1e-300 * width, 1e-300), width, grid_n)
        pts += [lo + g, hi - g]
    x = np.unique(np.concatenate(pts))
    return x[(x >= lo) & (x <= hi)]


def defined_intervals(f: Callable, lo: float, hi: float, grid_n: int,
                      vectorized: bool = False, cluster_ends: bool = False) -> list[tuple[float, float]]:
    """Maximal sub-intervals of [lo, hi] on which ``f`` is defined.

    Definedness is sampled as in :func:`bracketed_roots`; every switch
    between defined and undefined samples is pinned down by bisection to
    floating-point resolution, so returned endpoints sit on the defined
    side and as close to the domain edge as doubles allow.
    """
    def ok(x):
        if vectorized:
            with np.errstate(all="ignore"):
                return bool(np.isfinite(np.asarray(f(np.array([x])), dtype=float)[0]))
        return not math.isnan(_safe_eval(f, x))

    xs = _sample_interval(float(lo), float(hi), grid_n, cluster_ends)
    if vectorized:
        with np.errstate(all="ignore"):
            good = np.isfinite(np.asarray(f(xs), dtype=float))
    else:
        good = np.array([ok(x) for x in xs])

    def edge(a, b):
        # a defined, b undefined (either order on the line)
        for _ in range(1100):
            m = 0.5 * (a + b)
            if m == a or m == b:
                break
            if ok(m):
                a = m
            else:
                b = m
        return a

    out = []
    start = float(xs[0]) if good[0] else None
    for k in range(len(xs) - 1):
        if good[k] and not good[k + 1]:
            out.append((start, edge(float(xs[k]), float(xs[k + 1]))))
            start = None
        elif not good[k] and good[k + 1]:
            start = edge(float(xs[k + 1]), float(xs[k]))
    if start is not None:
        out.append((start, float(xs[-1])))
    return [(a, b) for a, b in out if b >= a]


def bracketed_roots(f: Callable, intervals: Sequence[tuple[float, float]], grid_n: int,
                    tol: float = ROOT_TOL, vectorized: bool = False,
                    cluster_ends: bool = False) -> list[float]:
    """Real roots of a scalar function by sign-change scan plus bisection.

    Each interval is sampled on ``grid_n + 1`` evenly spaced points (and,
    with ``cluster_ends``, ``grid_n`` geometrically spaced points toward
    each end). Points where ``f`` is undefined (NaN, inf, or raising
    ValueError/ArithmeticError) are dropped; a sign change between
    neighbouring defined samples is refined by bisection and kept when
    ``|f| <= tol``. The geometric points reach down to ``1e-300 * width``
    so roots crowding an endpoint on a logarithmic scale are separated.
    Roots agreeing to a relative ``10 * tol`` are merged.
    """
    def scalar(x):
        if vectorized:
            return _safe_eval(lambda t: f(np.array([t]))[0], x)
        return _safe_eval(f, x)

    roots = []
    for lo, hi in intervals:
        xs = _sample_interval(float(lo), float(hi), grid_n, cluster_ends)
        if vectorized:
            with np.errstate(all="ignore"):
                fs = np.asarray(f(xs), dtype=float)
        else:
            fs = np.array([scalar(x) for x in xs])
        ok = np.isfinite(fs)
        xs, fs = xs[ok], fs[ok]
        for x in xs[fs == 0]:
            roots.append(float(x))
        change = np.flatnonzero(np.sign(fs[:-1]) * np.sign(fs[1:]) < 0)
        for k in change:
            a, b = float(xs[k]), float(xs[k + 1])
            fa, fb = float(fs[k]), float(fs[k + 1])
            hole = False
            for _ in range(200):
                m = 0.5 * (a + b)
                if not a < m < b:
                    break
                fm = scalar(m)
                if math.isnan(fm):
                    # the bracket straddles a gap in the domain
                    hole = True
                    break
                if fm == 0:
                    a = b = m
                    fa = fb = 0.0
                    break
                if (fm < 0) == (fa < 0):
                    a, fa = m, fm
                else:
                    b, fb = m, fm
            if hole:
                continue
            best, fbest = (a, fa) if abs(fa) <= abs(fb) else (b, fb)
            if abs(fbest) <= tol:
                roots.append(best)
    roots.sort()
    merged = []
    for r in roots:
        if merged and abs(r - merged[-1]) <= 10 * tol * max(abs(r), abs(merged[-1])):
            continue
        merged.append(r)
    return merged


@dataclass
class BatchNewtonResult:
    x: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray


def newton_batch(F: Callable, J: Callable, X0, tol: float = NEWTON_TOL, maxit: int = 100,
                 diverge: float = 1e12, backtrack: int = 12,
                 least_squares: bool = False) -> BatchNewtonResult:
    """Damped Newton on many starting points at once.

    ``F`` maps (N, n) -> (N, n) and ``J`` maps (N, n) -> (N, n, n). Meant
    for multistart sweeps: a start is retired when it converges
    (``||F||_inf <= tol``), diverges, or hits a singular Jacobian. The
    batched linear solves go through LAPACK; callers should re-verify
    survivors with :func:`newton_nd`. With ``least_squares`` the step is
    the minimum-norm Gauss-Newton step ``-pinv(J) F``, which keeps going
    on solution sets where the Jacobian is singular.
    """
    X = np.array(X0, dtype=float, copy=True)
    N = X.shape[0]
    its = np.zeros(N, dtype=int)
    with np.errstate(all="ignore"):
        FX = F(X)
        res = np.max(np.abs(FX), axis=1)
        active = np.isfinite(res) & (res > tol)
        for _ in range(maxit):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            x, fx = X[idx], FX[idx]
            Jx = J(x)
            ok = np.all(np.isfinite(Jx), axis=(1, 2))
            dx = np.zeros_like(x)
            if least_squares:
                dx[ok] = -(np.linalg.pinv(Jx[ok]) @ fx[ok][..., None])[..., 0]
            else:
                try:
                    dx[ok] = np.linalg.solve(Jx[ok], -fx[ok][..., None])[..., 0]
                except np.linalg.LinAlgError:
                    for k in np.flatnonzero(ok):
                        try:
                            dx[k] = np.linalg.solve(Jx[k], -fx[k])
                        except np.linalg.LinAlgError:
                            ok[k] = False
            n0 = np.linalg.norm(fx, axis=1)
            t = np.ones(idx.size)
            xn = x + dx
            fn = F(xn)
            for _ in range(backtrack):
                worse = ~(np.linalg.norm(fn, axis=1) < n0) & ok
                if not worse.any():
                    break
                t[worse] *= 0.5
                xn[worse] = x[worse] + t[worse, None] * dx[worse]
                fn[worse] = F(xn[worse])
            X[idx], FX[idx] = xn, fn
            its[idx] += 1
            r = np.max(np.abs(fn), axis=1)
            res[idx] = r
            dead = ~ok | ~np.isfinite(r) | (np.max(np.abs(xn), axis=1) > diverge)
            active[idx] = ~dead & (r > tol)
            res[idx[dead]] = np.inf
    conv = res <= tol
    return BatchNewtonResult(X, res, conv, its)
