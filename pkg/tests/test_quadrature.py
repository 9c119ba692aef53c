import math

import numpy as np
import pytest

from ultracarleman.cli import random_fields, variable_coefficients
from ultracarleman.fields import constant, make_bump, make_polynomial
from ultracarleman.params import CarlemanParams, DomainParams, estimate_thresholds
from ultracarleman.quadrature import (QuadSpec, cap_level, check_lemma4, domain_points,
                                      integrate_domain, uniqueness_demo, weighted_energy)
from ultracarleman.reduction import InverseProblemInstance


def exact_volume(p):
    # {x1 > 0, delta x1 + |q|^2/2 < gamma}, q in R^3
    R = math.sqrt(2 * p.gamma)
    return 4 * math.pi / p.delta * (p.gamma * R ** 3 / 3 - R ** 5 / 10)


def test_quadspec_validation():
    for bad in (dict(panels=6), dict(panels=9), dict(levels=1)):
        with pytest.raises(ValueError):
            QuadSpec(**bad)
    assert QuadSpec(16, 3).level_panels() == [4, 8, 16]


def test_volume_converges(params, domain):
    exact = exact_volume(params)
    errs = []
    for panels in (8, 16, 32):
        r = integrate_domain(lambda x: np.ones(len(x)), QuadSpec(panels), params, domain)
        assert r.value > 0
        errs.append(abs(r.value - exact))
    assert errs[2] < errs[1] < errs[0]
    order = math.log2(errs[1] / errs[2])
    assert order >= 1.0
    assert errs[2] / exact < 0.01


def test_zero_and_odd_integrands(params, domain):
    q = QuadSpec(16)
    assert integrate_domain(lambda x: np.zeros(len(x)), q, params, domain).value == 0.0
    odd = integrate_domain(lambda x: x[:, 1] * (1 + x[:, 0]), q, params, domain)
    assert abs(odd.value) <= max(odd.error, 1e-15 * exact_volume(params))


def test_empty_domain_is_an_error(domain):
    p = CarlemanParams(gamma=0.0)                  # degenerate slab, no interior points
    with pytest.raises(ValueError):
        integrate_domain(lambda x: np.ones(len(x)), QuadSpec(8), p, domain)
    with pytest.raises(ValueError):
        domain_points(p, domain, 4)


def test_cap_level(params):
    assert cap_level(params, 1.0, None) == params.gamma
    assert cap_level(params, 1e12, 120.0) < params.gamma
    kappa = 2 * 1e12 * params.nu * params.rho ** (-params.nu - 1)
    assert cap_level(params, 1e12, 120.0) == pytest.approx(120.0 / kappa)


def test_weighted_integral_matches_volume_at_zero_lambda(params, domain):
    # with lam -> 0 the weight is 1 and the cap is inactive
    from ultracarleman.quadrature import integrate_weighted
    exact, errs = exact_volume(params), []
    for panels in (8, 16, 32):
        res = integrate_weighted(lambda pts: ({"one": np.ones(len(pts))}, np.zeros(len(pts))),
                                 QuadSpec(panels), params, domain, lam=0.0)
        scale = math.exp(res.log_scale)
        err = abs(res.values["one"] * scale - exact)
        assert err <= res.errors["one"] * scale        # estimate is conservative
        errs.append(err)
    assert errs[0] > errs[1] > errs[2]


# -- Lemma 4 -------------------------------------------------------------------

def test_lemma4_constant_one(params, domain):
    rep = check_lemma4(constant(1.0), params, domain, QuadSpec(8))
    first = rep.ratios[0]
    assert first.label == "I" and first.within(2 * params.gamma)
    # remaining denominators vanish: derivative ratios are undefined
    assert set(rep.undefined()) == {"I_x1", "I_x2", "I_y1", "I_y2*"}


def test_lemma4_zero_field(params, domain):
    rep = check_lemma4(constant(0.0), params, domain, QuadSpec(8))
    assert len(rep.undefined()) == len(rep.ratios)
    assert all(math.isnan(r["ratio"]) for r in rep.rows())


def test_lemma4_random_polynomials(params, domain):
    for z in random_fields(np.random.default_rng(11), domain, 3):
        rep = check_lemma4(z, params, domain, QuadSpec(8))
        assert rep.passed(include_ym=False)
        # the integral ratios also respect the strict constant (a^2/2 <= gamma)
        assert all(r.within(params.gamma) for r in rep.ratios if not r.label.endswith("*"))


def test_lemma4_factor_guard(params, domain):
    with pytest.raises(ValueError):
        check_lemma4(constant(1.0), params, domain, QuadSpec(8), c_factor=3)


# -- weighted energy -------------------------------------------------------------

def _energy_log(z, p, d, lam):
    return weighted_energy(z, p, d, QuadSpec(8), lam).log_abs("energy")


def test_energy_zero_and_positive(params, domain):
    assert weighted_energy(constant(0.0), params, domain, QuadSpec(8)).values["energy"] == 0
    bump = make_bump(params, domain)
    coarse = weighted_energy(bump, params, domain, QuadSpec(8))
    fine = weighted_energy(bump, params, domain, QuadSpec(16))
    assert coarse.values["energy"] > 0
    assert abs(fine.log_abs("energy") - coarse.log_abs("energy")) < 0.05


def test_energy_monotone_in_lambda_and_nu(params, domain):
    z = make_bump(params, domain) * make_polynomial({(0, 0, 0, 0): 1.0, (0, 1, 0, 0): 0.5})
    e = [_energy_log(z, params, domain, lam) for lam in (1.0, 2.0, 4.0)]
    assert e[0] < e[1] < e[2]
    f = [_energy_log(z, params.replace(nu=nu), domain, 1.0) for nu in (1.5, 2.0, 3.0)]
    assert f[0] < f[1] < f[2]


# -- uniqueness demonstration -----------------------------------------------------

@pytest.fixture(scope="module")
def demo_setup():
    c, d = variable_coefficients(), DomainParams()
    p = CarlemanParams(gamma=0.1, alpha1=0.5, eps0=0.03125)
    return c, p, d, estimate_thresholds(c, p, d, resolution=6)


def test_demo_trivial(demo_setup):
    c, p, d, th = demo_setup
    inst = InverseProblemInstance(c, constant(0.0), constant(0.0))
    rep = uniqueness_demo(inst, p, d, th, QuadSpec(8))
    assert rep.conclusion == "unique (trivially)"
    assert all(r["budget"] == 0 and r["energy"] == 0 for r in rep.rows)


def test_demo_below_threshold_is_flagged(demo_setup):
    c, p, d, th = demo_setup
    z = make_bump(p, d) * 1e-3
    inst = InverseProblemInstance(c, z)
    rep = uniqueness_demo(inst, p, d, th, QuadSpec(8), lams=[th.lambda_star / 10])
    assert not rep.applicable
    assert rep.conclusion.startswith("not applicable")


def test_demo_small_bump_reports_constant(demo_setup):
    c, p, d, th = demo_setup
    p = p.replace(delta=th.delta_star * 1.01)
    z = make_bump(p, d) * 1e-3
    inst = InverseProblemInstance(c, z)
    rep = uniqueness_demo(inst, p, d, th, QuadSpec(8))
    assert rep.applicable and len(rep.rows) == 3
    assert rep.conclusion.startswith("residual nonzero; energy <= C * budget with C = ")
    C = float(rep.conclusion.split("C = ")[1].split(";")[0])
    for r in rep.rows:
        assert r["residual_budget"] > 0
        assert r["energy"] <= C * r["budget"] * (1 + 1e-12)
    assert rep.bound_min_slack >= 0
