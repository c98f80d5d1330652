import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mosquito_evo import algebra as al
from mosquito_evo import dynamics as dyn
from mosquito_evo import numerics as nm
from mosquito_evo.errors import ClosureFailure, DegenerateParameters, DomainViolation

vec = arrays(np.float64, 6, elements=st.floats(-10, 10, allow_nan=False))
scalar = st.floats(-10, 10, allow_nan=False)

# x1 values whose chains (signs +,+,+ and +,+,-) give these first five
# coordinates; the sixth coordinate is where the closing equation bites
CHAIN_EXAMPLES = [
    (0.0003369672, (True, True, True),
     [0.0003369672, 0.02596050896, 0.4282643612, 0.8993564524, 1.149833003]),
    (0.000260712, (True, True, False),
     [0.000260712, 0.02283488855, 0.4019229449, 0.8728373019, 1.140721657]),
]


@pytest.fixture(scope="module")
def S0():
    return al.structure_matrix(dyn.BASELINE, 0.0)


@pytest.fixture(scope="module")
def S_star():
    return al.structure_matrix(dyn.BASELINE, al.interior_epsilon(dyn.BASELINE))


def random_pattern_matrix(rng):
    """Random matrix with the model's sparsity pattern."""
    A = np.diag(rng.uniform(-2, 2, 6))
    for i in range(5):
        A[i + 1, i] = rng.uniform(0.05, 3)
    A[0, 5], A[3, 5] = rng.uniform(0.5, 300), rng.uniform(0.5, 5)
    return A


# --- construction and products -------------------------------------------------------


def test_structure_matrix_is_jacobian(S0):
    np.testing.assert_array_equal(S0.A, dyn.jacobian(dyn.BASELINE, np.zeros(6)))
    assert S0.A[1, 1] == pytest.approx(0.42)
    assert S0.A[0, 5] == pytest.approx(300.0)


def test_structure_matrix_at_interior_shifts_larval_entry():
    eps = al.interior_epsilon(dyn.BASELINE)
    assert eps == pytest.approx(115.48864584922859, rel=1e-10)
    A = al.structure_matrix(dyn.BASELINE, eps).A
    assert A[1, 1] == pytest.approx(0.42 - 0.1 * eps)


def test_basis_products(S0):
    e = al.basis()
    for i, j in itertools.product(range(6), repeat=2):
        p = al.multiply(S0, e[i], e[j])
        if i == j:
            np.testing.assert_array_equal(p, S0.A[i])
        else:
            assert not np.any(p)


@given(vec, vec)
def test_commutative(x, y):
    A = dyn.jacobian(dyn.BASELINE, np.zeros(6))
    np.testing.assert_array_equal(al.multiply(A, x, y), al.multiply(A, y, x))


@given(vec, vec, vec, scalar, scalar)
def test_bilinear(x, y, z, s, t):
    A = dyn.jacobian(dyn.BASELINE, np.zeros(6))
    lhs = al.multiply(A, s * x + t * y, z)
    rhs = s * al.multiply(A, x, z) + t * al.multiply(A, y, z)
    scale = 1 + np.max(np.abs(A)) * (abs(s) * np.max(np.abs(x)) + abs(t) * np.max(np.abs(y)) + 1) \
        * (np.max(np.abs(z)) + 1)
    assert nm.inf_norm(lhs - rhs) <= 1e-12 * scale


def test_not_associative(S0):
    e = al.basis()
    x, y = e[0] + e[5], e[0]
    left = al.multiply(S0, al.multiply(S0, x, x), y)
    right = al.multiply(S0, x, al.multiply(S0, x, y))
    assert nm.inf_norm(left - right) > 1.0


@pytest.mark.parametrize("i", range(1, 7))
@pytest.mark.parametrize("m", [2, 3, 5, 8])
def test_basis_power_matches_repeated_product(S0, i, m):
    # e_i^m as the left-normed power (...((e_i e_i) e_i)...) e_i
    e = al.basis()[i - 1]
    p = al.multiply(S0, e, e)
    for _ in range(m - 2):
        p = al.multiply(S0, p, e)
    got, _ = al.basis_power(S0, i, m)
    np.testing.assert_allclose(got, p, rtol=1e-14, atol=0)


def test_basis_power_limits_at_origin(S0):
    tags = [al.basis_power(S0, i, 2)[1] for i in range(1, 7)]
    # diagonal entries -0.06, 0.42, 0.13, 0.36, 0.5657, -2.41
    assert tags == ["Zero"] * 5 + ["Infinity"]


def test_limit_tag_constant():
    assert al.limit_tag(1.0) == al.limit_tag(-1.0) == "Constant"


def test_basis_power_rejects_small_m(S0):
    with pytest.raises(ValueError):
        al.basis_power(S0, 1, 1)


# --- absolute nilpotents -------------------------------------------------------------


def test_cascade_forces_zero(S0, S_star):
    assert al.cascade_zero(S0) == set(range(1, 7))
    assert al.cascade_zero(S_star) == set(range(1, 7))


def test_nilpotent_search_only_zero(S0, S_star):
    for S in (S0, S_star):
        r = al.absolute_nilpotents(S, n_starts=300)
        assert r.unique_zero
        assert r.cascade_certified and r.det_nonzero
        assert r.max_converged_norm <= 1e-8


def test_nilpotent_search_finds_nonzero_when_signs_mix():
    A = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert al.cascade_zero(A) == set()
    r = al.absolute_nilpotents(A, n_starts=50)
    assert not r.unique_zero
    for x in r.elements:
        assert nm.inf_norm(al.evolution_map(A, x)) <= 1e-8


# --- the chain map --------------------------------------------------------------------


def test_f_ab_values():
    assert al.f_ab(0.0, 2.0, 3.0) == 0.0
    assert al.f_ab(0.5, 2.0, 3.0) == 0.0
    assert al.f_ab(0.25, 2.0, 0.5) == pytest.approx(np.sqrt(0.25))
    with pytest.raises(DomainViolation):
        al.f_ab(1.0, 2.0, 3.0)


@given(st.floats(-5, 5).filter(lambda a: abs(a) > 1e-6), st.floats(0.01, 5), st.floats(-5, 5))
def test_f_ab_domain_agrees(a, b, t):
    inside = any(lo <= t <= hi for lo, hi in al.f_ab_domain(a))
    if inside:
        y = al.f_ab(t, a, b)
        assert y >= 0
        assert b * y * y == pytest.approx(t - a * t * t, abs=1e-12 * (1 + abs(a) * t * t))
    elif t - a * t * t < -1e-12 * (1 + abs(a) * t * t):
        with pytest.raises(DomainViolation):
            al.f_ab(t, a, b)


def test_branches():
    bs = al.branches()
    assert len(bs) == 8 and len(set(bs)) == 8
    assert [al.branch_index(b) for b in bs] == list(range(8))


@pytest.mark.parametrize("x1,signs,expected", CHAIN_EXAMPLES)
def test_chain_examples(S0, x1, signs, expected):
    x = al.idempotent_chain(S0, x1, signs)
    np.testing.assert_allclose(x[:5], expected, rtol=2e-6)


@pytest.mark.parametrize("x1,signs,expected", CHAIN_EXAMPLES)
def test_chain_examples_are_not_idempotent(S0, x1, signs, expected):
    # the first five equations hold by construction; the closing one does not
    x = al.idempotent_chain(S0, x1, signs)
    r = al.evolution_map(S0, x) - x
    assert nm.inf_norm(r[:5]) <= 1e-12
    assert abs(al.closing_residual(S0, x1, signs)) > 0.1


def test_chain_solves_first_five_equations(S0):
    for x1 in (1e-5, 3e-4, 1e-3):
        for signs in al.branches():
            try:
                x = al.idempotent_chain(S0, x1, signs)
            except DomainViolation:
                continue
            r = al.evolution_map(S0, x) - x
            assert nm.inf_norm(r[:5]) <= 1e-12


# --- idempotents ----------------------------------------------------------------------


def mp_residual(A, x):
    """||V(x) - x|| in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    xs = [mpmath.mpf(float(v)) for v in x]
    out = 0
    for k in range(6):
        s = sum(mpmath.mpf(float(A[i, k])) * xs[i] ** 2 for i in range(6)) - xs[k]
        out = max(out, abs(s))
    return out


@pytest.fixture(scope="module")
def idems0(S0):
    return al.find_idempotents(S0)


def test_idempotents_baseline(S0, idems0):
    assert len(idems0) >= 3
    assert idems0[0].method == "Trivial" and not np.any(idems0[0].element)
    nonzero = idems0[1:]
    assert len(nonzero) == 3
    for s in nonzero:
        assert s.residual <= 1e-10
        # high-precision recheck of the rounded coordinates
        assert mp_residual(S0.A, s.element) <= 1e-12
        assert set(s.methods) == {"ChainReduction", "NewtonMultistart"}


def test_idempotent_x1_values(idems0):
    x1 = sorted(s.x1 for s in idems0[1:])
    np.testing.assert_allclose(x1, [2.06821473e-24, 3.20491823e-05, 1.03842564e-03], rtol=1e-7)


def test_idempotents_independent_root_finder(S0, idems0):
    """Each chain root is a sign change of the closing residual on its branch."""
    from scipy.optimize import brentq

    for s in idems0[1:]:
        if s.x1 < 1e-12:
            continue
        g = lambda t: al.closing_residual(S0, t, s.branch)  # noqa: E731
        lo, hi = s.x1 * (1 - 1e-4), s.x1 * (1 + 1e-4)
        assert g(lo) * g(hi) < 0
        assert brentq(g, lo, hi, xtol=1e-20) == pytest.approx(s.x1, rel=1e-9)


def test_reference_like_points_fail_closing_equation(S0):
    ref = [0.0003369672, 0.02596050896, 0.4282643612, 0.8993564524, 1.149833003,
           0.9667880418]
    assert al.idempotent_residual(S0, ref) > 0.5


def test_idempotents_at_interior(S_star):
    sols = al.find_idempotents(S_star)
    nonzero = sols[1:]
    assert len(nonzero) >= 4
    for s in nonzero:
        assert s.residual <= 1e-10
        assert mp_residual(S_star.A, s.element) <= 1e-10
        if s.methods == ("NewtonMultistart",):
            # Newton-only solutions sit at the square-root edge of the third
            # chain step, where a tiny x3 is lost in x1's rounding
            assert abs(s.element[2]) < 1e-5


def test_idempotents_on_random_pattern_matrices():
    rng = np.random.default_rng(3)
    for _ in range(3):
        A = random_pattern_matrix(rng)
        sols = al.find_idempotents(A, grid_n=20000, n_starts=300)
        for s in sols:
            assert nm.inf_norm(al.evolution_map(A, s.element) - s.element) <= 1e-8
        chain = [s for s in sols if "ChainReduction" in s.methods]
        newton = [s for s in sols if "NewtonMultistart" in s.methods]
        # the two routes must overlap on well-resolved solutions
        if chain and newton:
            assert any("ChainReduction" in s.methods and "NewtonMultistart" in s.methods
                       for s in sols)


def test_idempotent_residual_zero_for_zero(S0):
    assert al.idempotent_residual(S0, np.zeros(6)) == 0.0


# --- structure -------------------------------------------------------------------------


def test_nilpotent_pattern():
    A = np.triu(np.ones((4, 4)), 1)
    assert al.is_nilpotent(A)
    P = np.eye(4)[[2, 0, 3, 1]]
    assert al.is_nilpotent(P @ A @ P.T)
    B = A.copy()
    B[3, 0] = 1.0
    assert not al.is_nilpotent(B)
    assert not al.is_nilpotent(np.diag([0, 0, 1.0]))


@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_nilpotent_structure_has_nilpotent_products(n, seed):
    rng = np.random.default_rng(seed)
    A = np.triu(rng.uniform(0.5, 2, (n, n)), 1)
    P = np.eye(n)[rng.permutation(n)]
    A = P @ A @ P.T
    assert al.is_nilpotent(A)
    x = rng.uniform(-1, 1, n)
    # squaring repeatedly reaches zero within n steps
    for _ in range(n):
        x = al.evolution_map(A, x)
    assert not np.any(x)


def test_baseline_not_nilpotent(S0):
    assert not al.is_nilpotent(S0)


def test_descendants_generations(S0):
    assert al.descendants(S0, 1, 1) == {1, 6}
    assert al.descendants(S0, 1, 2) == {1, 5, 6}
    assert al.descendants(S0, 1) == set(range(1, 7))
    with pytest.raises(ValueError):
        al.descendants(S0, 7)


def test_descendants_chain_graph():
    A = np.diag(np.ones(3), 1)
    assert al.descendants(A, 1) == {2, 3, 4}
    assert al.descendants(A, 4) == set()


def test_baseline_simple(S0):
    v = al.is_simple(S0)
    assert v and v.det_nonzero and v.descendants_complete
    assert v.det == pytest.approx(np.linalg.det(S0.A), rel=1e-12)


def test_simple_over_random_draws():
    rng = np.random.default_rng(99)
    for _ in range(100):
        q = dyn.sample_params(rng)
        S = al.structure_matrix(q, 0.0)
        v = al.is_simple(S)
        assert v.descendants_complete
        if v.det_nonzero:
            assert v.simple


def test_proper_ideal_at_singular_b():
    base = dyn.BASELINE.replace(e_hat=0.65)
    b = al.singular_b(base)
    assert b == pytest.approx(0.0944, abs=5e-4)
    S = al.structure_matrix(al.with_b(base, b), 0.0)
    assert abs(np.linalg.det(S.A)) <= 1e-12
    ideal = al.proper_ideal(S)
    assert ideal.dim == 5 and ideal.proper
    assert ideal.closure_gap <= 1e-9 and ideal.last_square_gap <= 1e-9
    # every product with an ideal element lands back in the ideal
    Q = al._orthonormal(ideal.basis)
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = rng.normal(size=5) @ np.array(ideal.basis)
        x = rng.normal(size=6)
        assert al.span_distance(Q, al.multiply(S, x, u)) <= 1e-9 * (1 + np.linalg.norm(u))


def test_proper_ideal_none_when_simple(S0):
    assert al.proper_ideal(S0) is None


def test_proper_ideal_closure_failure():
    A = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]])
    A[2] = [0, 0, 1.0]
    A[0] = [0, 0, 0]
    with pytest.raises(ClosureFailure):
        al.proper_ideal(A)


def test_singular_b_negative_at_baseline():
    assert al.singular_b(dyn.BASELINE) < 0
    with pytest.raises(DegenerateParameters):
        al.with_b(dyn.BASELINE, al.singular_b(dyn.BASELINE))


def test_modular_and_radical(S0):
    assert al.modular_indices(S0) == set()
    assert al.is_radical(S0)
    D = np.diag([2.0, 0.0, 3.0])
    assert al.modular_indices(D) == {1, 3}
    assert not al.is_radical(D)


# --- the unit eigenvalue condition ---------------------------------------------------


def test_lambda_one_false_at_baseline():
    c = al.lambda_one_condition(dyn.BASELINE)
    assert not c and c.consistent
    assert c.rhs == pytest.approx(2.0769)


def test_lambda_one_true_at_tuned_b():
    b = al.unit_eigenvalue_b(dyn.BASELINE)
    assert b == pytest.approx(9.1275, abs=1e-4)
    q = al.with_b(dyn.BASELINE, b)
    c = al.lambda_one_condition(q)
    assert c and c.consistent
    assert min(abs(v - 1) for v in nm.eigvals(al.structure_matrix(q).A)) <= 1e-9


@given(st.integers(0, 2**32 - 1))
def test_lambda_one_consistent_with_char_poly(seed):
    q = dyn.sample_params(np.random.default_rng(seed))
    eps = float(np.random.default_rng(seed + 1).uniform(0, 50))
    try:
        qb = al.with_b(q, al.unit_eigenvalue_b(q, eps))
    except (DegenerateParameters, Exception):
        return
    c = al.lambda_one_condition(qb, eps, rel=1e-7)
    assert c.holds and c.consistent
    assert not al.lambda_one_condition(q.replace(b=qb.b * 1.5), eps).holds
