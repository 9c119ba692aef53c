import numpy as np
import pytest

from ultracarleman.fields import (constant, expression, fd_field, fd_jet2, load_polynomial,
                                  make_bump, make_polynomial, polynomial_to_records,
                                  random_polynomial)
from ultracarleman.params import level_values
from ultracarleman.quadrature import domain_points

N = 4


def test_monomial_x1_squared():
    f = make_polynomial({(2, 0, 0, 0): 1.0})
    J = f.jet(np.array([[0.15, 0.3, -0.2, 0.1]]))
    assert J.v[0] == pytest.approx(0.0225)
    np.testing.assert_allclose(J.g[0], [0.3, 0, 0, 0], atol=1e-15)
    expect = np.zeros((N, N))
    expect[0, 0] = 2.0
    np.testing.assert_allclose(J.h[0], expect, atol=1e-15)


def test_ym_gradient_is_unit_vector(rng):
    f = make_polynomial({(0, 0, 0, 1): 1.0})
    J = f.jet(rng.uniform(-1, 1, (10, N)))
    np.testing.assert_array_equal(J.g, np.tile([0, 0, 0, 1.0], (10, 1)))


def test_x2_y1_hessian_entries():
    f = make_polynomial({(0, 1, 1, 0): 1.0})
    H = f.jet(np.array([[0.1, 0.2, 0.3, 0.4]])).h[0]
    assert np.count_nonzero(H) == 2
    assert H[1, 2] == H[2, 1] == 1.0


def test_polynomial_records_roundtrip(tmp_path, rng):
    f = random_polynomial(rng, N, 3)
    path = tmp_path / "poly.json"
    import json
    path.write_text(json.dumps(polynomial_to_records(f.table)))
    g = load_polynomial(path)
    pts = rng.uniform(-1, 1, (25, N))
    np.testing.assert_array_equal(f.jet(pts).h, g.jet(pts).h)


def test_bad_multi_index_rejected():
    with pytest.raises(ValueError):
        make_polynomial({(0, -1, 0, 0): 1.0})
    f = make_polynomial({(1, 0): 1.0})
    with pytest.raises(ValueError):
        f.jet(np.zeros((1, N)))


def _point_at_level(p, d, s_frac, x1):
    # choose y_m so that psi - alpha0 = s_frac * gamma with x' = y' = centre
    s = s_frac * p.gamma
    ym = np.sqrt(2 * (s - p.delta * x1))
    return np.array([[x1, 0.0, 0.0, ym]])


def test_bump_value_example(params, domain):
    B = make_bump(params, domain)
    pt = _point_at_level(params, domain, 0.5, 0.002)
    assert level_values(params, domain, pt)[0] == pytest.approx(0.5 * params.gamma)
    # [s(1-s)]^3 x1^3 with s = 1/2
    assert B.values(pt)[0] == pytest.approx((1 / 64) * 0.002**3, rel=1e-12)


def test_bump_value_with_large_x1(domain):
    from ultracarleman.params import CarlemanParams
    p = CarlemanParams(gamma=0.125, delta=1.0)
    B = make_bump(p, domain)
    pt = _point_at_level(p, domain, 0.5, 0.02)
    assert B.values(pt)[0] == pytest.approx(1.25e-7, rel=1e-12)


@pytest.mark.parametrize("s_frac,x1", [(0.0, 0.0), (1.0, 0.001), (0.5, 0.0)])
def test_bump_vanishes_to_second_order_on_boundary(params, domain, s_frac, x1):
    B = make_bump(params, domain)
    pt = _point_at_level(params, domain, s_frac, x1)
    J = B.jet(pt)
    assert abs(J.v[0]) < 1e-30 and np.all(np.abs(J.g) < 1e-25) and np.all(np.abs(J.h) < 1e-20)


def _near_boundary(params, domain, rng, eps, count=1000):
    frac = np.where(rng.random(count) < 0.5, rng.uniform(0, eps, count),
                    1 - rng.uniform(0, eps, count))
    frac = np.clip(frac, 1e-12, 1 - 1e-12)
    return np.vstack([_point_at_level(params, domain, f, 0.9 * f * params.gamma / params.delta)
                      for f in frac])


def test_bump_small_near_boundary(params, domain, rng):
    B = make_bump(params, domain)
    # sup of [s(1-s)]^3 x1^3 with x1 <= s gamma / delta, attained at s = 2/3
    peak = (2 / 3) ** 6 * (1 / 3) ** 3 * (params.gamma / params.delta) ** 3
    assert np.abs(B.values(domain_points(params, domain, 10)[0])).max() <= peak
    near = _near_boundary(params, domain, rng, 1e-3)
    assert np.abs(B.values(near)).max() <= 1e-6 * peak


def test_bump_decays_cubically(params, domain):
    B = make_bump(params, domain)
    vals = [B.values(_point_at_level(params, domain, 1 - e, 0.1 * params.gamma / params.delta))[0]
            for e in (1e-2, 1e-3)]
    expected = 3 * np.log10((0.99 * 0.01) / (0.999 * 0.001))
    assert np.log10(vals[0] / vals[1]) == pytest.approx(expected, rel=1e-10)


def test_fd_x1_squared():
    f = make_polynomial({(2, 0, 0, 0): 1.0})
    J = fd_jet2(f.values, np.array([0.3, 0.1, 0.1, 0.1]), 1e-3)
    assert J.h[0, 0, 0] == pytest.approx(2.0, abs=1e-6)


def test_fd_constant_exact():
    J = fd_jet2(constant(3.0).values, np.zeros(N), 1e-3)
    assert np.all(J.g == 0) and np.all(J.h == 0)


def test_fd_sin_y1():
    f = expression(lambda X: X[2].sin())
    J = fd_jet2(f.values, np.zeros(N), 1e-3)
    assert J.g[0, 2] == pytest.approx(1.0, abs=1e-6)


def test_fd_guards():
    f = constant(1.0)
    box = [(0.0, 1.0)] * N
    with pytest.raises(ValueError):
        fd_jet2(f.values, np.full(N, 0.5), 1e-10, box=box)
    with pytest.raises(ValueError):
        fd_jet2(f.values, np.full(N, 0.001), 1e-3, box=box)
    with pytest.raises(ValueError):
        fd_jet2(f.values, np.full(N, 0.5), 0.0)


def test_fd_second_order_convergence(rng):
    f = expression(lambda X: (X[0] * X[3]).exp() * X[1].sin() + X[2] ** 3, label="mix")
    pts = rng.uniform(-0.5, 0.5, (100, N))
    exact = f.jet(pts)
    errs = []
    hs = [4e-3, 2e-3]
    for h in hs:
        J = fd_jet2(f.values, pts, h)
        errs.append(max(np.abs(J.g - exact.g).max(), np.abs(J.h - exact.h).max()))
    order = np.log(errs[0] / errs[1]) / np.log(2)
    assert order >= 1.9


def test_fd_field_leibniz(rng):
    f = random_polynomial(rng, N, 2)
    g = expression(lambda X: X[1].cos())
    prod = f * g
    pts = rng.uniform(-0.5, 0.5, (30, N))
    J = fd_field(prod, 1e-3).jet(pts)
    np.testing.assert_allclose(J.h, prod.jet(pts).h, atol=1e-5)
