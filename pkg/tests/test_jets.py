import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holoscope.jets import (DiffeoJet, JetError, JetMap, compose,
                            evaluate, identity_jet, invert, jets_equal,
                            monomial_index, monomials, table_size,
                            translate_conjugate, truncate)


def jet1(coeffs, k=None):
    coeffs = list(coeffs)
    k = len(coeffs) - 1 if k is None else k
    return JetMap(1, 1, k, np.array(coeffs, dtype=float).reshape(-1, 1))


# --- constructors and invariants ---------------------------------------------

def test_identity_jet_examples():
    assert np.array_equal(identity_jet(1, 3).coefficients.ravel(), [0, 1, 0, 0])
    assert np.array_equal(identity_jet(2, 1).linear_part, np.eye(2))


def test_identity_is_unit():
    f = jet1([0, 1.5, -0.25, 0.125])
    assert np.array_equal(compose(identity_jet(1, 3), f).coefficients, f.coefficients)
    assert np.array_equal(compose(f, identity_jet(1, 3)).coefficients, f.coefficients)


def test_diffeo_rejects_nonzero_constant():
    with pytest.raises(JetError):
        DiffeoJet(1, 1, 2, np.array([[0.5], [1.0], [0.0]]))


def test_diffeo_rejects_singular_linear_part():
    with pytest.raises(JetError):
        DiffeoJet(1, 1, 2, np.array([[0.0], [1e-14], [0.0]]))


def test_jet_rejects_non_finite():
    with pytest.raises(JetError):
        JetMap(1, 1, 1, np.array([[0.0], [np.inf]]))


# --- compose ------------------------------------------------------------------

def test_compose_linear_with_quadratic():
    f = jet1([0, 2, 0])           # 2y
    g = jet1([0, 1, 1])           # y + y^2
    assert np.array_equal(compose(f, g).coefficients.ravel(), [0, 2, 2])


def test_compose_swap_coordinates():
    index = monomial_index(2, 2)
    swap = np.zeros((6, 2))
    swap[index[(1, 0)]] = [0, 1]
    swap[index[(0, 1)]] = [1, 0]
    g = np.zeros((6, 2))
    g[index[(1, 0)]] = [1, 0]
    g[index[(0, 1)]] = [1, 0]
    g[index[(1, 1)]] = [0, 1]     # g = (y1 + y2, y1*y2)
    result = compose(JetMap(2, 2, 2, swap), JetMap(2, 2, 2, g))
    want = np.zeros((6, 2))
    want[index[(1, 1)]] = [1, 0]
    want[index[(1, 0)]] = [0, 1]
    want[index[(0, 1)]] = [0, 1]
    assert np.array_equal(result.coefficients, want)


def test_compose_cubic_frozen():
    # (y + y^3) composed with itself, truncated at 3: y + 2y^3 by hand
    f = jet1([0, 1, 0, 1])
    assert np.array_equal(compose(f, f).coefficients.ravel(), [0, 1, 0, 2])


def test_compose_requires_zero_inner_constant():
    f = jet1([0, 1, 0])
    g = jet1([0.5, 1, 0])
    with pytest.raises(JetError):
        compose(f, g)


def test_compose_dimension_mismatch():
    f = jet1([0, 1])
    g = JetMap(2, 2, 1, np.zeros((3, 2)))
    with pytest.raises(JetError):
        compose(f, g)


# --- invert -------------------------------------------------------------------

def test_invert_linear():
    assert np.array_equal(invert(jet1([0, 2])).coefficients.ravel(), [0, 0.5])


def test_invert_quadratic_frozen():
    # reversion of y + y^2 by hand: y - y^2 + 2y^3
    f = jet1([0, 1, 1, 0])
    g = invert(f)
    assert np.allclose(g.coefficients.ravel(), [0, 1, -1, 2], atol=1e-14)
    assert jets_equal(compose(f, g), identity_jet(1, 3), 1e-12)


def test_invert_identity():
    ident = identity_jet(2, 3)
    assert np.array_equal(invert(ident).coefficients, ident.coefficients)


# --- truncate / evaluate / equality --------------------------------------------

def test_truncate_examples():
    f = jet1([0, 1, 0, -1.0 / 6.0])
    assert np.array_equal(truncate(f, 2).coefficients.ravel(), [0, 1, 0])
    assert np.array_equal(truncate(f, f.order).coefficients, f.coefficients)
    assert np.array_equal(truncate(truncate(f, 2), 1).coefficients,
                          truncate(f, 1).coefficients)
    with pytest.raises(JetError):
        truncate(f, 4)


def test_evaluate_examples():
    assert evaluate(jet1([0, 1, 1]), [0.1])[0] == pytest.approx(0.11)
    assert np.array_equal(evaluate(identity_jet(2, 1), [0.3, -0.7]), [0.3, -0.7])
    assert evaluate(jet1([0, 2, 2]), [0.5])[0] == pytest.approx(1.5)


def test_jets_equal_examples():
    f = jet1([0, 1, 0])
    assert jets_equal(f, f, 1e-15)
    g = jet1([0, 1, 1e-15])
    assert jets_equal(f, g, 1e-9)
    assert not jets_equal(f, jet1([0, -1, 0]), 1e-9)
    with pytest.raises(JetError):
        jets_equal(f, identity_jet(2, 2), 1e-9)


def test_jets_equal_relative_scaling():
    big = jet1([0, 1e8, 0])
    nearby = jet1([0, 1e8 * (1 + 1e-12), 0])
    assert jets_equal(big, nearby, 1e-9)
    assert not jets_equal(big, jet1([0, 1e8 * (1 + 1e-6), 0]), 1e-9)


# --- translate_conjugate --------------------------------------------------------

def test_translate_conjugate_identity():
    f = identity_jet(1, 2)
    out = translate_conjugate(f, [0.3], [0.3], 2)
    assert np.allclose(out.coefficients.ravel(), [0, 1, 0], atol=1e-15)


def test_translate_conjugate_halving():
    f = jet1([0, 0.5])
    out = translate_conjugate(f, [0.4], [0.2], 1)
    assert np.allclose(out.coefficients.ravel(), [0, 0.5], atol=1e-15)


def test_translate_conjugate_square_frozen():
    # (y + a)^2 - a^2 = 2a y + y^2 by hand
    a = 0.3
    f = jet1([0, 0, 1])
    out = translate_conjugate(f, [a], [a * a], 2)
    assert np.allclose(out.coefficients.ravel(), [0, 2 * a, 1], atol=1e-15)


def test_translate_conjugate_keeps_high_degree_information():
    # k=1 jet of the translated square still sees the quadratic coefficient
    f = jet1([0, 0, 1])
    out = translate_conjugate(f, [0.3], [0.09], 1)
    assert np.allclose(out.coefficients.ravel(), [0, 0.6], atol=1e-15)


# --- randomized algebraic laws ---------------------------------------------------

def random_diffeo(q, k, rng, integer=False, scale=0.5):
    rows = table_size(q, k)
    if integer:
        coeffs = rng.integers(-2, 3, size=(rows, q)).astype(float)
        coeffs[0] = 0.0
        coeffs[1:1 + q] = np.eye(q)
    else:
        coeffs = rng.uniform(-scale, scale, size=(rows, q))
        coeffs[0] = 0.0
        coeffs[1:1 + q] = np.eye(q) + 0.25 * rng.uniform(-1, 1, size=(q, q))
    return DiffeoJet(q, q, k, coeffs)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_associativity_float(seed, q, k):
    rng = np.random.default_rng(seed)
    f, g, h = (random_diffeo(q, k, rng) for _ in range(3))
    assert jets_equal(compose(f, compose(g, h)), compose(compose(f, g), h), 1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 2), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_associativity_integer_exact(seed, q, k):
    rng = np.random.default_rng(seed)
    f, g, h = (random_diffeo(q, k, rng, integer=True) for _ in range(3))
    lhs = compose(f, compose(g, h))
    rhs = compose(compose(f, g), h)
    assert np.array_equal(lhs.coefficients, rhs.coefficients)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_inverse_law(seed, q, k):
    rng = np.random.default_rng(seed)
    f = random_diffeo(q, k, rng)
    assert jets_equal(compose(f, invert(f)), identity_jet(q, k), 1e-10)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(2, 6),
       st.integers(0, 5))
@settings(max_examples=60, deadline=None)
def test_truncation_homomorphism(seed, q, k, l_raw):
    rng = np.random.default_rng(seed)
    l = min(l_raw, k)
    f, g = (random_diffeo(q, k, rng) for _ in range(2))
    lhs = truncate(compose(f, g), l)
    rhs = compose(truncate(f, l), truncate(g, l))
    assert jets_equal(lhs, rhs, 1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 2), st.integers(2, 4))
@settings(max_examples=30, deadline=None)
def test_truncation_homomorphism_integer_exact(seed, q, k):
    rng = np.random.default_rng(seed)
    f, g = (random_diffeo(q, k, rng, integer=True) for _ in range(2))
    for l in range(k + 1):
        lhs = truncate(compose(f, g), l)
        rhs = compose(truncate(f, l), truncate(g, l))
        assert np.array_equal(lhs.coefficients, rhs.coefficients)


def test_evaluate_compose_error_order():
    # the defect of evaluate(compose(f,g)) against composed evaluation is
    # O(|p|^{k+1}): halving p shrinks it by at least 2^{k+0.5}
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(80):
        q = int(rng.integers(1, 3))
        k = int(rng.integers(1, 5))
        f, g = (random_diffeo(q, k, rng) for _ in range(2))
        direction = rng.uniform(-1, 1, size=q)
        p = 0.1 * direction / np.max(np.abs(direction))

        def defect(point):
            return float(np.max(np.abs(
                evaluate(compose(f, g), point) - evaluate(f, evaluate(g, point)))))

        big, small = defect(p), defect(p / 2)
        if big < 1e-13 or small < 1e-16:
            continue
        checked += 1
        assert big / small >= 2 ** (k + 0.5)
    assert checked >= 40


# --- independent series-reversion oracle -----------------------------------------

def _dict_mul(a, b, nvars, order):
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if sum(e) > order:
                continue
            out[e] = out.get(e, 0.0) + ca * cb
    return out


def _dict_compose(f_rows, g_components, nvars, order):
    """Substitute the g component polynomials into f (dict arithmetic)."""
    p = len(g_components)
    result = [dict() for _ in range(len(next(iter(f_rows.values()))))]
    for exponents, row in f_rows.items():
        term = {tuple(0 for _ in range(nvars)): 1.0}
        for i, e in enumerate(exponents):
            for _ in range(e):
                term = _dict_mul(term, g_components[i], nvars, order)
        for c, coefficient in enumerate(row):
            if coefficient == 0.0:
                continue
            target = result[c]
            for mono, value in term.items():
                target[mono] = target.get(mono, 0.0) + coefficient * value
    return result


def oracle_invert(f: JetMap) -> np.ndarray:
    """Brute-force degree-by-degree substitution reversion (dict arithmetic)."""
    q, k = f.source_dim, f.order
    mons = monomials(q, k)
    index = monomial_index(q, k)
    lin = np.linalg.inv(f.linear_part)
    f_rows = {mono: f.coefficients[i].tolist() for i, mono in enumerate(mons)}
    g = np.zeros((len(mons), q))
    g[1:1 + q] = lin.T
    for degree in range(2, k + 1):
        g_components = [
            {mono: g[i, c] for i, mono in enumerate(mons) if g[i, c] != 0.0}
            for c in range(q)
        ]
        composed = _dict_compose(f_rows, g_components, q, k)
        for mono in mons:
            if sum(mono) != degree:
                continue
            residual = np.array([composed[c].get(mono, 0.0) for c in range(q)])
            g[index[mono]] = -lin @ residual
    return g


def test_invert_matches_substitution_oracle_exactly():
    rng = np.random.default_rng(5)
    for _ in range(100):
        q = int(rng.integers(1, 3))
        k = int(rng.integers(1, 7))
        f = random_diffeo(q, k, rng, integer=True)
        expected = oracle_invert(f)
        got = invert(f).coefficients
        assert np.array_equal(got, expected)


def test_oracle_invert_agrees_on_floats():
    rng = np.random.default_rng(6)
    for _ in range(25):
        q = int(rng.integers(1, 3))
        k = int(rng.integers(1, 6))
        f = random_diffeo(q, k, rng)
        assert np.allclose(invert(f).coefficients, oracle_invert(f), atol=1e-10)
