"""The linear operator x -> l x of left multiplication in the algebra.

For the product ``xy = A.T (x * y)`` the operator fixed by the element
``l`` with l_i = 1 for all i has matrix ``A.T``. Iterating it in double
precision is unstable along non-dominant directions (rounding errors
pick up the dominant eigenvalue), so the iteration helpers accept a
spectral projector that is re-applied after every step. The projector
commutes with the operator, so in exact arithmetic it changes nothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import algebra as al
from . import numerics as nm
from .errors import (
    DefectiveEigenvector,
    LambdaIsOne,
    NotAFixedPoint,
    OneInSpectrum,
    SingularMatrix,
    SlowConvergence,
)

UNIT_BAND = 1e-8
EIG_RESIDUAL_TOL = 1e-8
ONE_IN_SPECTRUM_TOL = 1e-9


@dataclass(frozen=True)
class OperatorMatrix:
    L: np.ndarray
    source: al.StructureMatrix | None = None
    basis_error: float = 0.0

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def __call__(self, x):
        return self.L @ np.asarray(x)


def operator_matrix(S) -> OperatorMatrix:
    """Matrix of x -> l x with l = (1,...,1), checked on every basis vector."""
    A = al._A(S)
    n = A.shape[0]
    ell = np.ones(n)
    L = A.T.copy()
    err = max(nm.inf_norm(L @ e - al.multiply(A, ell, e)) for e in np.eye(n))
    if err > 1e-12 * max(1.0, nm.inf_norm(A)):
        raise AssertionError(f"operator matrix disagrees with the product by {err:g}")
    src = S if isinstance(S, al.StructureMatrix) else al.from_matrix(A)
    return OperatorMatrix(L, src, err)


def from_matrix(L) -> OperatorMatrix:
    """Operator with a given matrix, via the algebra whose structure matrix is L.T."""
    return operator_matrix(al.from_matrix(np.asarray(L, dtype=float).T))


def hadamard_bound(M) -> float:
    return float(np.prod(np.linalg.norm(np.asarray(M), axis=1)))


def one_in_spectrum(op: OperatorMatrix, tol: float = ONE_IN_SPECTRUM_TOL) -> bool:
    M = op.L - np.eye(op.n)
    return abs(nm.det(M)) <= tol * max(hadamard_bound(M), nm.EPS)


def eigenpairs(op: OperatorMatrix):
    return nm.eig(op.L)


def rayleigh(op: OperatorMatrix, c) -> complex:
    c = np.asarray(c, dtype=complex)
    return complex(np.vdot(c, op.L @ c) / np.vdot(c, c))


def b_from_c(op: OperatorMatrix, c, lam=None) -> np.ndarray:
    """The b_c with l b_c = b_c + c, i.e. (L - I) b_c = c.

    ``c`` must be an eigenvector (residual at most 1e-8 relative to
    ``max(1, ||L||)``); its eigenvalue is taken as the Rayleigh quotient
    unless given. Requires 1 outside the spectrum.
    """
    c = np.asarray(c)
    if one_in_spectrum(op):
        raise OneInSpectrum("1 is an eigenvalue, so L - I is not invertible")
    if not np.any(c):
        return np.zeros(op.n, dtype=c.dtype if np.iscomplexobj(c) else float)
    lam = rayleigh(op, c) if lam is None else lam
    res = nm.inf_norm(op.L @ c - lam * c) / nm.inf_norm(c)
    if res > EIG_RESIDUAL_TOL * max(1.0, nm.inf_norm(op.L)):
        raise ValueError(f"c is not an eigenvector (residual {res:.3g})")
    b = nm.lin_solve(op.L - np.eye(op.n), c)
    if not np.iscomplexobj(c) and not isinstance(lam, complex):
        b = np.real(b)
    return b


def closed_form_bc(lam, c, b_c, n: int) -> np.ndarray:
    """l^n b_c = b_c + (1 + lam + ... + lam^(n-1)) c."""
    lam = complex(lam)
    s = n if lam == 1 else (lam ** n - 1) / (lam - 1)
    out = np.asarray(b_c) + s * np.asarray(c)
    if np.isrealobj(b_c) and np.isrealobj(c) and lam.imag == 0:
        out = np.real(out)
    return out


# ---------------------------------------------------------------------------
# projectors and stabilised iteration
# ---------------------------------------------------------------------------


def spectral_projector(op: OperatorMatrix, select: Callable[[complex], bool]) -> np.ndarray:
    """Projector onto the span of eigenvectors whose eigenvalue passes ``select``.

    Requires a full set of eigenvectors. If the selection is closed under
    conjugation the projector is real and returned as such.
    """
    cols, vals, done = [], [], []
    for p in nm.eig(op.L):
        if any(p.value == d for d in done):
            continue
        done.append(p.value)
        if p.multiplicity == 1:
            if p.vector is None:
                raise DefectiveEigenvector(f"no eigenvector for {p.value}")
            block = p.vector[:, None]
        else:
            block = nm.null_space(op.L - p.value * np.eye(op.n))
            if block.shape[1] != p.multiplicity:
                raise DefectiveEigenvector(f"eigenvalue {p.value} is not semisimple")
        cols.append(block)
        vals += [p.value] * block.shape[1]
    V = np.column_stack(cols).astype(complex)
    try:
        W = nm.inverse(V)
    except SingularMatrix as exc:
        raise DefectiveEigenvector("eigenvector matrix is singular") from exc
    keep = [k for k, v in enumerate(vals) if select(v)]
    P = V[:, keep] @ W[keep, :]
    if nm.inf_norm(P.imag) <= 1e-10 * max(1.0, nm.inf_norm(P)):
        P = P.real
    return P


def iterate_L(op: OperatorMatrix, x, n: int, invariant: np.ndarray | None = None,
              history: bool = False):
    """Apply the operator ``n`` times.

    ``invariant`` is an optional projector re-applied after every step to
    keep rounding errors from leaking into other eigen-directions. With
    ``history`` the whole orbit (n + 1 rows) is returned.
    """
    x = np.asarray(x)
    L = op.L
    out = [x]
    for _ in range(n):
        x = L @ x
        if invariant is not None:
            x = invariant @ x
        if history:
            out.append(x)
    return np.array(out) if history else x


# ---------------------------------------------------------------------------
# limits
# ---------------------------------------------------------------------------


@dataclass
class LimitClassification:
    tag: str
    lam: complex
    limit: np.ndarray | None = None
    points: list[np.ndarray] = field(default_factory=list)
    reason: str = ""
    limit_gap: float | None = None


def classify_limit_bc(lam, b_c=None, c=None, band: float = 1e-12) -> LimitClassification:
    """Behaviour of l^n b_c as n grows, from the eigenvalue alone.

    Tags: Zero (|lam| < 1; the orbit converges to b_c + c/(1 - lam), which
    is 0 because b_c = c/(lam - 1)), Infinity (|lam| > 1), TwoCycle
    (lam = -1), NoLimit (other unit-modulus eigenvalues). ``limit_gap``
    reports the norm of b_c + c/(1 - lam) when both vectors are given.
    """
    lam = complex(lam)
    if abs(lam - 1) <= band:
        raise LambdaIsOne("lam = 1: b_c is undefined")
    r = abs(lam)
    if r < 1 - band:
        gap = None
        limit = None
        if b_c is not None and c is not None:
            limit = np.asarray(b_c) + np.asarray(c) / (1 - lam)
            gap = nm.inf_norm(limit)
        return LimitClassification("Zero", lam, limit, reason="|lam| < 1", limit_gap=gap)
    if r > 1 + band:
        return LimitClassification("Infinity", lam, reason="|lam| > 1")
    if abs(lam + 1) <= band:
        pts = []
        if b_c is not None and c is not None:
            pts = [np.asarray(b_c), np.asarray(b_c) + np.asarray(c)]
        return LimitClassification("TwoCycle", lam, points=pts, reason="lam = -1")
    q = _root_of_unity_order(lam, band)
    why = (f"lam is a primitive {q}-th root of unity: orbit cycles through {q} points"
           if q else "lam on the unit circle, not a root of unity: orbit is dense in a circle")
    return LimitClassification("NoLimit", lam, reason=why)


def _root_of_unity_order(lam: complex, band: float, qmax: int = 1000) -> int | None:
    phi = math.atan2(lam.imag, lam.real) / (2 * math.pi)
    for q in range(1, qmax + 1):
        if abs(phi * q - round(phi * q)) <= band * q:
            return q
    return None


def stable_basis(op: OperatorMatrix, band: float = UNIT_BAND):
    """Real basis of the stable subspace plus the eigen-data behind it.

    Real eigenvalues contribute their eigenvector; each complex pair
    contributes the real and imaginary parts of the eigenvector of the
    member with positive imaginary part. Returns (vectors, labels) where
    each label is (eigenvalue, eigenvector, part) with part 're' or 'im'.
    """
    vecs, labels = [], []
    for p in nm.eig(op.L):
        lam = p.value
        if abs(lam) >= 1 - band:
            continue
        if p.vector is None:
            raise DefectiveEigenvector(f"no eigenvector for {lam}")
        if lam.imag == 0:
            vecs.append(p.vector.real)
            labels.append((lam, p.vector.real, "re"))
        elif lam.imag > 0:
            vecs += [p.vector.real, p.vector.imag]
            labels += [(lam, p.vector, "re"), (lam, p.vector, "im")]
    return vecs, labels


def stable_prediction(op: OperatorMatrix, coeffs, b, n: int) -> np.ndarray:
    """l^n (sum alpha_i u_i + b) from the eigenvalues, for the stable basis u_i.

    A pair (alpha, beta) on Re c, Im c evolves as Re((alpha - i beta) lam^n c).
    """
    _, labels = stable_basis(op)
    out = np.array(b, dtype=float, copy=True)
    k = 0
    while k < len(labels):
        lam, c, part = labels[k]
        if lam.imag == 0:
            out += coeffs[k] * (lam.real ** n) * np.real(c)
            k += 1
        else:
            z = complex(coeffs[k], -coeffs[k + 1])
            out += np.real(z * lam ** n * c)
            k += 2
    return out


@dataclass
class StableSpanLimit:
    limit: np.ndarray
    iterations: int
    gap: float


def stable_span_limit(op: OperatorMatrix, coeffs, b=None, tol: float = 1e-8,
                      cap: int = 10_000) -> StableSpanLimit:
    """Iterate l on v + b, v in the stable span, until it is within ``tol`` of b.

    ``b`` must satisfy l b = b (default 0). Each step is projected back
    onto the sum of the stable and unit eigenspaces.
    """
    vecs, _ = stable_basis(op)
    coeffs = np.asarray(coeffs, dtype=float)
    if len(coeffs) != len(vecs):
        raise ValueError(f"expected {len(vecs)} coefficients, got {len(coeffs)}")
    b = np.zeros(op.n) if b is None else np.asarray(b, dtype=float)
    scale = max(1.0, nm.inf_norm(b))
    if nm.inf_norm(op.L @ b - b) > 1e-9 * scale * max(1.0, nm.inf_norm(op.L)):
        raise NotAFixedPoint("b is not fixed by the operator")
    P = spectral_projector(op, lambda z: abs(z) < 1 - UNIT_BAND or abs(z - 1) <= UNIT_BAND)
    x = (np.array(vecs).T @ coeffs if len(vecs) else np.zeros(op.n)) + b
    gap = nm.inf_norm(x - b)
    k = 0
    while gap > tol:
        if k >= cap:
            raise SlowConvergence(f"gap {gap:.3g} after {cap} steps", gap, cap)
        x = P @ (op.L @ x)
        k += 1
        gap = nm.inf_norm(x - b)
    return StableSpanLimit(x, k, gap)


@dataclass
class LimitExistence:
    exists: bool
    spectral_radius: float
    projector: np.ndarray | None
    reason: str
    idempotency_error: float | None = None
    commutation_error: float | None = None


def limit_exists(op: OperatorMatrix, period: int = 1, band: float = UNIT_BAND) -> LimitExistence:
    """Whether (L^period)^n converges for every start, with the limit projector.

    The limit exists iff the spectral radius is below 1, or equals 1 with
    1 the only unit-modulus eigenvalue and semisimple (rank(M - I) equals
    rank((M - I)^2)). The projector is built from bases of ker(M - I) and
    range(M - I).
    """
    M = np.linalg.matrix_power(op.L, period)
    n = M.shape[0]
    values = nm.eigvals(M)
    rho = float(max(abs(v) for v in values))
    if rho < 1 - band:
        return LimitExistence(True, rho, np.zeros((n, n)), "spectral radius below 1", 0.0, 0.0)
    if rho > 1 + band:
        return LimitExistence(False, rho, None, "spectral radius above 1")
    on_circle = [v for v in values if abs(abs(v) - 1) <= band]
    if any(abs(v - 1) > band for v in on_circle):
        return LimitExistence(False, rho, None, "unit-modulus eigenvalue other than 1")
    K = M - np.eye(n)
    _, r1 = nm.det_rank(K)
    _, r2 = nm.det_rank(K @ K)
    if r1 != r2:
        return LimitExistence(False, rho, None, "eigenvalue 1 is not semisimple")
    N = nm.null_space(K)
    R = nm.column_space(K)
    T = np.column_stack([N, R]) if R.size else N
    D = np.diag([1.0] * N.shape[1] + [0.0] * (n - N.shape[1]))
    P = T @ D @ nm.inverse(T)
    idem = nm.inf_norm(P @ P - P)
    comm = max(nm.inf_norm(M @ P - P), nm.inf_norm(P @ M - P))
    return LimitExistence(True, rho, P, "spectral radius 1, eigenvalue 1 semisimple", idem, comm)
