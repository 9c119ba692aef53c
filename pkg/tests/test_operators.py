import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ultracarleman.fields import constant, make_polynomial, random_polynomial
from ultracarleman.operators import (apply_L, apply_L0, apply_transformed_L, check_condition4,
                                     coefficients_from_dict, coefficients_to_dict,
                                     load_coefficients, scaled_identity, validate_coefficients)
from ultracarleman.params import CarlemanParams, ParamsError

N = 4
ZERO = {"n": 2, "m": 2}


def coeffs(a=None, **lower):
    """Coefficient set from a JSON-style document on top of zero defaults."""
    doc = dict(ZERO)
    if a is not None:
        doc["a"] = a
    doc.update(lower)
    return coefficients_from_dict(doc)


MINUS_IDENTITY = {"1,1": -1.0, "2,2": -1.0}


def poly(**terms):
    """poly(x1=2) -> x1^2 style monomial sums on (x1, x2, y1, y2)."""
    axes = {"x1": 0, "x2": 1, "y1": 2, "y2": 3}
    table = {}
    for name, power in terms.items():
        alpha = [0] * N
        alpha[axes[name]] = power
        table[tuple(alpha)] = 1.0
    return make_polynomial(table)


@pytest.fixture
def pts(rng):
    return np.column_stack([rng.uniform(0.01, 0.3, 50), rng.uniform(-0.5, 0.5, (50, 3))])


def test_L_example(pts):
    c = coeffs(MINUS_IDENTITY)
    u = poly(x1=2) + poly(y1=2)
    np.testing.assert_allclose(apply_L(c, u, pts), 4.0, rtol=1e-14)


def test_L_zero_and_constant(pts):
    c = coeffs(MINUS_IDENTITY, a0=1.0)
    assert np.all(apply_L(c, constant(0.0), pts) == 0)
    np.testing.assert_allclose(apply_L(coeffs(a0=1.0), constant(5.0), pts), 5.0)


def test_L0_examples():
    p = CarlemanParams(gamma=0.1, alpha0=0.5)          # eta0 = 0.05
    assert p.eta0 == pytest.approx(0.05)
    pt = np.array([[0.15, 0.2, -0.1, 0.3]])
    assert apply_L0(coeffs(), p, poly(x1=2), pt)[0] == pytest.approx(10.0, rel=1e-14)
    c = coeffs(MINUS_IDENTITY)
    assert apply_L0(c, p, poly(y2=2), pt)[0] == pytest.approx(0.4, rel=1e-14)
    lin = make_polynomial({(1, 0, 0, 0): 2.0, (0, 1, 0, 0): -1.0, (0, 0, 0, 1): 3.0})
    assert apply_L0(c, p, lin, pt)[0] == 0.0


def test_L0_rejects_nonpositive_weight():
    p = CarlemanParams(gamma=0.1, alpha0=0.5)
    with pytest.raises(ValueError):
        apply_L0(coeffs(), p, poly(x1=2), np.array([[-0.06, 0, 0, 0]]))


def test_transformed_L_examples(pts):
    p = CarlemanParams(gamma=0.1, alpha0=0.5)
    c = coeffs(MINUS_IDENTITY)
    u = poly(x1=2) + poly(y2=2) + poly(x2=1)
    np.testing.assert_array_equal(apply_transformed_L(c, p, u, pts), apply_L0(c, p, u, pts))
    pt = np.array([[0.15, 0.2, -0.1, 0.3]])
    assert apply_transformed_L(coeffs(a0=1.0), p, constant(1.0), pt)[0] == pytest.approx(0.2)
    assert np.all(apply_transformed_L(c, p, constant(0.0), pts) == 0)


def test_transformed_minus_L0_has_no_second_order_part(pts):
    p = CarlemanParams(gamma=0.1, alpha0=0.5)
    c = scaled_identity(2, 2)
    u = make_polynomial({(2, 0, 0, 0): 1.0, (0, 1, 1, 0): 2.0, (0, 0, 0, 2): -1.5})
    full = coeffs(MINUS_IDENTITY, a_x=[1.3, -0.4], b=[0.2, 0.7], a0=0.9)
    quad_only = apply_transformed_L(full, p, u, pts) - apply_L0(full, p, u, pts)
    lower = (pts[:, 0] + p.eta0) * (1.3 * 2 * pts[:, 0] - 0.4 * 2 * pts[:, 2]
                                    + 0.2 * 2 * pts[:, 1] + 0.7 * (-3 * pts[:, 3])
                                    + 0.9 * u.values(pts))
    np.testing.assert_allclose(quad_only, lower, rtol=1e-13, atol=1e-14)
    assert np.all(apply_transformed_L(c, p, u, pts) == apply_L0(c, p, u, pts))


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_L_is_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    c = coeffs({"1,1": [{"multi_index": [1, 0, 0, 0], "coefficient": -1.0}], "1,2": 0.1,
                "2,2": -0.8}, a_x=[0.3, 0.0], b=[0.0, 0.2], a0=0.1)
    u, v = random_polynomial(rng, N, 3), random_polynomial(rng, N, 3)
    pts = rng.uniform(0, 0.5, (20, N))
    lhs = apply_L(c, u * alpha + v * beta, pts)
    rhs = alpha * apply_L(c, u, pts) + beta * apply_L(c, v, pts)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def _matrix_coeffs(diag_x1, offset=0.0):
    entry = [{"multi_index": [1, 0, 0, 0], "coefficient": diag_x1}]
    if offset:
        entry.append({"multi_index": [0, 0, 0, 0], "coefficient": offset})
    return coeffs({"1,1": entry, "2,2": entry})


@pytest.mark.parametrize("doc,expected", [
    ((-1.0, -1.0), 1.0),                # a_ij = -(1 + x1) delta_ij
    ((1.0, 0.0), -1.0),                 # a_ij = +x1 delta_ij
    ((-2.0, 0.0), 2.0),                 # a_ij = -2 x1 delta_ij
])
def test_condition4_examples(pts, rng, doc, expected):
    c = _matrix_coeffs(*doc)
    dirs = rng.normal(size=(40, 2))
    assert check_condition4(c, pts, dirs) == pytest.approx(expected, rel=1e-14)


def test_condition4_scale_invariant(pts, rng):
    c = coeffs({"1,1": [{"multi_index": [1, 0, 0, 0], "coefficient": -1.0}],
                "1,2": [{"multi_index": [1, 0, 0, 0], "coefficient": -0.3}],
                "2,2": [{"multi_index": [1, 0, 0, 0], "coefficient": -2.0}]})
    dirs = rng.normal(size=(40, 2))
    base = check_condition4(c, pts, dirs)
    for t in (-3.0, 0.01, 7.0):
        assert check_condition4(c, pts, t * dirs) == pytest.approx(base, rel=1e-13)
    with pytest.raises(ValueError):
        check_condition4(c, pts, np.zeros((1, 2)))


def test_validate_coefficients(pts):
    rep = validate_coefficients(scaled_identity(2, 2), pts, alpha1=1.0)
    assert rep.ok
    bad = coeffs({"1,1": [{"multi_index": [0, 0, 0, 1], "coefficient": 1.0}], "2,2": -1.0})
    rep = validate_coefficients(bad, pts)
    assert not rep.get("a_ij_independent_of_ym").passed
    big = scaled_identity(2, 2, scale=5.0, M=1.0)
    assert not validate_coefficients(big, pts).get("a_ij_C2_bound").passed


def test_symmetry_structural():
    c = coeffs({"1,2": 0.4})
    assert c.aij(0, 1) is c.aij(1, 0)
    with pytest.raises(ParamsError):
        coeffs({"2,1": 0.4})


def test_manifest_roundtrip(tmp_path, pts):
    rec = [{"multi_index": [1, 0, 0, 0], "coefficient": -1.0}]
    (tmp_path / "a11.json").write_text(json.dumps(rec))
    doc = {"n": 2, "m": 2, "M": 2.0, "a": {"1,1": "a11.json", "2,2": rec},
           "a_x": [[{"multi_index": [0, 0, 1, 0], "coefficient": 0.5}], [{"multi_index": [0, 0, 0, 0], "coefficient": 0.0}]],
           "b": [[{"multi_index": [0, 0, 0, 0], "coefficient": 0.0}]] * 2,
           "a0": [{"multi_index": [0, 0, 0, 0], "coefficient": 0.0}],
           "f": [{"multi_index": [0, 0, 0, 0], "coefficient": 1.0}],
           "a": {"1,1": "a11.json", "1,2": [{"multi_index": [0, 0, 0, 0], "coefficient": 0.0}],
                 "2,2": rec}}
    (tmp_path / "c.json").write_text(json.dumps(doc))
    c = load_coefficients(tmp_path / "c.json")
    u = random_polynomial(np.random.default_rng(1), N, 3)
    c2 = coefficients_from_dict(json.loads(json.dumps(coefficients_to_dict(c))))
    np.testing.assert_array_equal(apply_L(c, u, pts), apply_L(c2, u, pts))
    with pytest.raises(ParamsError):
        coefficients_from_dict({**doc, "bogus": 1})
