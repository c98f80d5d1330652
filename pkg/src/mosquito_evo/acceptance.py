"""Reproduction checks against the reference numbers for the baseline model.

Each check returns a :class:`Criterion` with a pass flag, a one-line
detail and optional discrepancy flags that are reported but do not
affect the verdict.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import algebra as al
from . import dynamics as dyn
from . import evolution_operator as eo
from . import numerics as nm

# reference eigenvalues at the origin
REF_P0 = [1.256222386, -2.35164464, 0.611373493 + 0.7919408816j, 0.611373493 - 0.7919408816j,
          -0.5608123659 + 0.6228748264j, -0.5608123659 - 0.6228748264j]
# reference modulus values; they agree with |lambda|^2, not |lambda|
REF_P0_MODULI = {"pair_3_4": 1.000947908, "pair_5_6": 0.7024835591}
REF_P1_L = dyn.REFERENCE_L_STAR
REF_P1 = [0.936104284, -0.3491645453, -2.331267091, -20.50580883,
          0.1650139855 + 0.3234822044j, 0.1650139855 - 0.3234822044j]
REF_P1_MODULUS = 0.131870352
REF_CONSTANT = 2.0769
# reference idempotents of the algebra at the origin
REF_I1 = [0.0003369672, 0.02596050896, 0.4282643612, 0.8993564524, 1.149833003, 0.9667880418]
REF_I2 = [0.000260712, 0.02283488855, 0.4019229449, 0.8728373019, 1.140721657, -0.9700237958]

#: base point for the determinant-zero construction; with the baseline
#: e_hat the solved b is negative, so the egg exit rate is lowered
DET_ZERO_BASE = dyn.BASELINE.replace(e_hat=0.65)


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    flags: list[str] = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def match_multiset(computed, reference) -> float:
    """Largest distance under a greedy nearest-neighbour pairing."""
    left = list(computed)
    worst = 0.0
    for r in reference:
        k = int(np.argmin([abs(c - r) for c in left]))
        worst = max(worst, abs(left.pop(k) - r))
    return worst


def c1_origin_spectrum() -> Criterion:
    rep = dyn.classify(dyn.BASELINE, np.zeros(6), source="ClosedForm")
    vals = rep.spectrum.values
    err = match_multiset(vals, REF_P0)
    mod = np.abs(vals)
    sq = {"pair_3_4": float(np.max(mod[np.abs(mod - 1) < 0.1]) ** 2),
          "pair_5_6": float(mod[np.argmin(np.abs(mod - 0.84))] ** 2)}
    merr = max(abs(sq[k] - REF_P0_MODULI[k]) for k in sq)
    ok_cls = rep.kind == dyn.FixedPointKind.SADDLE and rep.stable_dim == 2 and rep.unstable_dim == 4
    flags = [f"reference moduli equal |lambda|^2; |lambda| values are "
             f"{np.sqrt(sq['pair_3_4']):.10f} and {np.sqrt(sq['pair_5_6']):.10f}"]
    return Criterion(1, "origin spectrum", err <= 1e-6 and merr <= 1e-6 and ok_cls,
                     f"eig err {err:.2e}, |lambda|^2 err {merr:.2e}, {rep.kind.value} "
                     f"{rep.stable_dim}/{rep.unstable_dim}", flags)


def c2_interior_spectrum() -> Criterion:
    roots = nm.poly_roots(dyn.char_poly(dyn.BASELINE, REF_P1_L))
    err = match_multiset(roots, REF_P1)
    cls = dyn.classify_spectrum(roots)
    cx = [z for z in roots if abs(z.imag) > 1e-9]
    m = abs(cx[0])
    flags = []
    if abs(m - REF_P1_MODULUS) > 1e-6:
        flags.append(f"reference modulus {REF_P1_MODULUS} vs |lambda_5| = {m:.9f} "
                     f"(|lambda_5|^2 = {m * m:.9f})")
    ok = err <= 1e-5 and cls.kind == dyn.FixedPointKind.SADDLE and cls.stable_dim == 4 \
        and cls.unstable_dim == 2
    return Criterion(2, "interior spectrum", ok,
                     f"root err {err:.2e}, {cls.kind.value} {cls.stable_dim} in / "
                     f"{cls.unstable_dim} out", flags)


def c3_constant_term() -> Criterion:
    q = dyn.BASELINE
    v = q.egg_cycle_product
    ok = abs(v - REF_CONSTANT) <= 1e-10
    return Criterion(3, "constant term", ok, f"a*b*e*h*p*r*theta = {v:.12g}")


def c4_fixed_point_oracle() -> Criterion:
    q = dyn.BASELINE
    cf = dyn.fixed_points_closed_form(q)
    fps = [f for f in dyn.fixed_points_newton(q, dyn.default_seeds(q)) if abs(f.point[1]) > 1e-9]
    if not fps:
        return Criterion(4, "fixed-point oracle", False, "Newton found no interior fixed point")
    fp = fps[0]
    L = float(fp.point[1])
    flags = [f"closed form '{k}': L = {v:.10g}, residual {cf.residuals[k]:.3g}"
             for k, v in cf.L_star.items()]
    flags.append(f"reference L = {REF_P1_L} differs from Newton L by {abs(L - REF_P1_L):.6g}")
    return Criterion(4, "fixed-point oracle", fp.residual <= 1e-10,
                     f"Newton L = {L:.12g}, residual {fp.residual:.2e}", flags)


def c5_idempotents() -> Criterion:
    S = al.structure_matrix(dyn.BASELINE, 0.0)
    sols = al.find_idempotents(S)
    has_zero = any(not np.any(s.element) for s in sols)
    res_ok = all(s.residual <= 1e-8 for s in sols)
    found = []
    for ref in (REF_I1, REF_I2):
        d = min(nm.inf_norm(s.element - np.array(ref)) for s in sols)
        found.append(d)
    ok = has_zero and res_ok and all(d <= 1e-6 for d in found) and len(sols) >= 3
    ref_res = [al.idempotent_residual(S, r) for r in (REF_I1, REF_I2)]
    flags = [f"reference elements have ||V(x) - x|| = {ref_res[0]:.3g}, {ref_res[1]:.3g}",
             "recovered x1: " + ", ".join(f"{s.x1:.10g}" for s in sols)]
    return Criterion(5, "idempotents", ok,
                     f"{len(sols)} found, distance to references {found[0]:.3g}, {found[1]:.3g}",
                     flags)


def c6_nilpotents() -> Criterion:
    q = dyn.BASELINE
    out = []
    for eps in (0.0, al.interior_epsilon(q)):
        r = al.absolute_nilpotents(al.structure_matrix(q, eps), n_starts=1000)
        out.append(r)
    ok = all(r.unique_zero and r.max_converged_norm <= 1e-8 for r in out)
    return Criterion(6, "absolute nilpotents", ok,
                     "; ".join(f"{r.n_converged}/{r.n_starts} converged, max |x| "
                               f"{r.max_converged_norm:.1e}" for r in out))


def c7_simplicity() -> Criterion:
    base = al.is_simple(al.structure_matrix(dyn.BASELINE, 0.0))
    q = al.with_b(DET_ZERO_BASE, al.singular_b(DET_ZERO_BASE))
    S = al.structure_matrix(q, 0.0)
    ideal = al.proper_ideal(S)
    ok = bool(base) and ideal is not None and ideal.dim == 5 and ideal.proper \
        and ideal.closure_gap <= 1e-9
    det = f"{al.is_simple(S).det:.2e}"
    return Criterion(7, "simplicity and ideals", ok,
                     f"baseline simple={bool(base)}; tuned b={q.b:.6g}, det={det}, "
                     f"ideal dim {ideal.dim if ideal else None}, closure "
                     f"{ideal.closure_gap if ideal else float('nan'):.1e}")


def c8_nilpotency(seed: int = 8) -> Criterion:
    rng = np.random.default_rng(seed)
    false_ok = all(not al.is_nilpotent(al.structure_matrix(dyn.sample_params(rng), 0.0))
                   for _ in range(100))
    true_ok = True
    for _ in range(20):
        T = np.triu(rng.normal(size=(6, 6)), k=1)
        P = np.eye(6)[rng.permutation(6)]
        true_ok &= al.is_nilpotent(P @ T @ P.T)
    return Criterion(8, "nilpotency", false_ok and true_ok,
                     f"random draws all non-nilpotent={false_ok}; permuted triangular all "
                     f"nilpotent={true_ok}")


def c9_operator_limits() -> Criterion:
    op = eo.operator_matrix(al.structure_matrix(dyn.BASELINE, 0.0))
    pairs = nm.eig(op.L)
    worst = 0.0
    for p in pairs:
        if p.value.imag != 0:
            continue
        lam = p.value.real
        c = p.vector.real
        b = eo.b_from_c(op, c, lam)
        P = eo.spectral_projector(op, lambda z, lam=lam: z == lam)
        orbit = eo.iterate_L(op, b, 50, invariant=P, history=True)
        for n in range(51):
            ref = eo.closed_form_bc(lam, c, b, n)
            worst = max(worst, nm.inf_norm(orbit[n] - ref) / max(nm.inf_norm(ref), 1e-300))
    plane = [p for p in pairs if abs(abs(p.value) ** 2 - 0.7024835591) < 1e-6 and p.value.imag > 0]
    tag_plane = eo.classify_limit_bc(plane[0].value).tag
    span = eo.stable_span_limit(op, [1.0, 1.0])
    lam2 = min(pairs, key=lambda p: p.value.real).value
    tag_2 = eo.classify_limit_bc(lam2).tag
    le = eo.limit_exists(op)
    rng = np.random.default_rng(9)
    Q = rng.normal(size=(6, 6))
    Lsyn = Q @ np.diag([1.0, 1.0, 0.5, -0.3, 0.2, 0.7]) @ np.linalg.inv(Q)
    syn = eo.limit_exists(eo.from_matrix(Lsyn))
    gap = nm.inf_norm(np.linalg.matrix_power(Lsyn, 200) - syn.projector) if syn.exists else np.inf
    ok = (worst <= 1e-9 and tag_plane == "Zero" and span.gap <= 1e-8 and tag_2 == "Infinity"
          and not le.exists and syn.exists and gap <= 1e-8)
    return Criterion(9, "operator limits", ok,
                     f"closed-form rel err {worst:.1e}; plane {tag_plane} ({span.iterations} steps); "
                     f"lambda_2 {tag_2}; baseline limit exists={le.exists} (rho {le.spectral_radius:.8f}); "
                     f"synthetic |L^200 - P| {gap:.1e}")


def _three_way(q: dyn.ParameterSet) -> tuple[bool, bool, bool]:
    chk = al.lambda_one_condition(q, 0.0)
    op = eo.operator_matrix(al.structure_matrix(q, 0.0))
    return chk.holds, chk.charpoly_says, eo.one_in_spectrum(op)


def c10_cross_module(seed: int = 10) -> Criterion:
    rng = np.random.default_rng(seed)
    draws = [dyn.sample_params(rng) for _ in range(100)]
    tuned = []
    while len(tuned) < 5:
        q = dyn.sample_params(rng)
        b = al.unit_eigenvalue_b(q)
        if b > 0:
            tuned.append(q.replace(b=b))
    bad = 0
    tuned_true = 0
    for k, q in enumerate(draws + tuned):
        votes = _three_way(q)
        bad += len(set(votes)) != 1
        if k >= len(draws):
            tuned_true += all(votes)
    return Criterion(10, "cross-module consistency", bad == 0 and tuned_true == 5,
                     f"{bad} disagreements over {len(draws) + len(tuned)} sets; "
                     f"{tuned_true}/5 tuned sets show 1 in the spectrum")


def random_state(rng) -> np.ndarray:
    return rng.uniform(0, 300, size=6)


def c11_numerics(seed: int = 11) -> Criterion:
    rng = np.random.default_rng(seed)
    jerr = 0.0
    for _ in range(100):
        q = dyn.sample_params(rng)
        v = random_state(rng)
        J = dyn.jacobian(q, v)
        Jfd = nm.fd_jacobian(lambda x: dyn.step(q, x), v)
        jerr = max(jerr, nm.inf_norm(J - Jfd) / nm.inf_norm(J))
    cerr = 0.0
    for _ in range(100):
        q = dyn.sample_params(rng)
        L = rng.uniform(0, 300)
        a = dyn.char_poly(q, L).coeffs
        b = nm.faddeev_leverrier(dyn.jacobian_at_L(q, L)).coeffs
        cerr = max(cerr, np.max(np.abs(a - b)) / np.max(np.abs(a)))
    rerr = 0.0
    for _ in range(1000):
        deg = int(rng.integers(1, nm.MAX_DEGREE + 1))
        c = rng.normal(size=deg + 1)
        p = nm.Polynomial(c)
        z = nm.poly_roots(p)
        back = np.real_if_close(np.poly(z)[::-1] * p.coeffs[-1], tol=1e6)
        rerr = max(rerr, np.max(np.abs(back - p.coeffs)) / np.max(np.abs(p.coeffs)))
    ok = jerr <= 1e-6 and cerr <= 1e-9 and rerr <= 1e-7
    return Criterion(11, "numerics properties", ok,
                     f"Jacobian vs FD {jerr:.1e}; char poly vs Faddeev-LeVerrier {cerr:.1e}; "
                     f"root re-expansion {rerr:.1e}")


CRITERIA = [c1_origin_spectrum, c2_interior_spectrum, c3_constant_term, c4_fixed_point_oracle,
            c5_idempotents, c6_nilpotents, c7_simplicity, c8_nilpotency, c9_operator_limits,
            c10_cross_module, c11_numerics]


def run_one(fn) -> Criterion:
    t = time.perf_counter()
    try:
        c = fn()
    except Exception as exc:  # a crash is a failure, reported with its cause
        num = CRITERIA.index(fn) + 1
        c = Criterion(num, fn.__name__, False, f"raised {type(exc).__name__}: {exc}")
    c.seconds = time.perf_counter() - t
    return c


def run_all() -> list[Criterion]:
    return [run_one(fn) for fn in CRITERIA]
