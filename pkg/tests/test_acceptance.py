"""Desk-scale acceptance criteria 1-9 (n = m = 2).

Each test prints one line ``criterion <k> PASS|FAIL: <detail>`` and then
asserts the outcome, so the verdict is visible in ``pytest -v`` output even
when a criterion fails.
"""

import math
import time

import numpy as np
import pytest

from ultracarleman import cli
from ultracarleman.carleman import (FieldContext, check_carleman_lemma1, check_identity_lemma3,
                                    check_pointwise_lemma2, lambda_scaling_study)
from ultracarleman.cli import (manufactured_w, random_fields, sample_points,
                               variable_coefficients)
from ultracarleman.expansion import BOUNDED, EXACT, expand_T_terms
from ultracarleman.fields import fd_field, make_bump
from ultracarleman.operators import scaled_identity
from ultracarleman.params import CarlemanParams, DomainParams, admissible_params
from ultracarleman.quadrature import QuadSpec, check_lemma4
from ultracarleman.reduction import check_reduction_identity, reduced_coefficients
from ultracarleman.transform import from_tilde, to_tilde, transform_consistency_residual

D = DomainParams(n=2, m=2)
PANELS = 16


def verdict(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


@pytest.fixture(scope="module")
def identity_admissible():
    c = scaled_identity(2, 2)
    p, th = admissible_params(c, CarlemanParams(), D)
    return c, p, th


def test_criterion_1_lemma3_identity(capsys):
    t0 = time.perf_counter()
    p = CarlemanParams(gamma=0.1, alpha1=0.5, eps0=0.03125, lam=1.5)
    sets = {"scaled_identity": scaled_identity(2, 2), "variable": variable_coefficients()}
    worst_exact, worst_fd = 0.0, 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        pts = sample_points(rng, p, D, 500)
        phi = random_fields(rng, D, 1)[0]
        for c in sets.values():
            worst_exact = max(worst_exact,
                              check_identity_lemma3(phi, c, p, D, pts).max_abs_relative())
            worst_fd = max(worst_fd, check_identity_lemma3(fd_field(phi, 1e-3), c, p, D,
                                                           pts).max_abs_relative())
    elapsed = time.perf_counter() - t0
    ok = worst_exact <= 1e-9 and worst_fd <= 1e-3 and elapsed <= 30
    assert verdict(capsys, 1, ok, f"analytic {worst_exact:.2e} <= 1e-9, fd {worst_fd:.2e} "
                                  f"<= 1e-3, {elapsed:.1f} s <= 30 s")


def test_criterion_2_term_expansion(capsys):
    m = 2
    base = CarlemanParams(gamma=0.125, M=1.0, alpha1=1.0, eps0=1.0 / (8 * m))
    worst_id, worst_bound = 0.0, math.inf
    rng = np.random.default_rng(2)
    for c in (scaled_identity(2, 2), variable_coefficients()):
        p, _ = admissible_params(c, base, D)
        pts = sample_points(rng, p, D, 1000)
        for phi in random_fields(rng, D, 2):
            rep = expand_T_terms(FieldContext(phi, c, p, D, pts))
            worst_id = max([worst_id] + [rep.identity_residual(k).max() for k in EXACT])
            for k in BOUNDED:
                margin, scale = rep.bound_margin(k)
                rel = np.where(scale > 0, margin / np.where(scale > 0, scale, 1), 0)
                worst_bound = min(worst_bound, float(rel.min()))
    ok = worst_id <= 1e-9 and worst_bound >= -1e-9
    assert verdict(capsys, 2, ok, f"exact T_k residual {worst_id:.2e} <= 1e-9, "
                                  f"min relative bound margin {worst_bound:.3e} >= 0")


def test_criterion_3_integrated_carleman(capsys, identity_admissible):
    c, p, th = identity_admissible
    rng = np.random.default_rng(3)
    bump = make_bump(p, D)
    fields = [bump * f for f in random_fields(rng, D, 20)]
    at_star, below = [], []
    for phi in fields:
        e = check_carleman_lemma1(phi, c, p, D, th, "integrated", lam=th.lambda_star,
                                  panels=PANELS).extras
        at_star.append((e["divergence_free_margin"], abs(e["integral_D"]),
                        e["integral_D_error"]))
        e = check_carleman_lemma1(phi, c, p, D, th, "integrated", lam=th.lambda_star / 10,
                                  panels=PANELS).extras
        below.append(e["divergence_free_margin"])
    d_ok = all(dv <= 3 * err for _, dv, err in at_star)
    m_ok = all(mg >= 0 for mg, _, _ in at_star)
    necessity = any(mg < 0 for mg in below)
    ok = d_ok and m_ok and necessity
    worst_d = max(dv / err if err > 0 else (0 if dv == 0 else math.inf) for _, dv, err in at_star)
    assert verdict(capsys, 3, ok,
                   f"|int D| / err max {worst_d:.2f} <= 3 ({d_ok}); margins at lambda* >= 0 "
                   f"({m_ok}); negative margin at lambda*/10 in some trial ({necessity}, "
                   f"{sum(mg < 0 for mg in below)}/20)")


def test_criterion_4_pointwise_lemma2(capsys):
    sets = [
        (scaled_identity(2, 2), CarlemanParams()),
        (scaled_identity(2, 2), CarlemanParams(nu=3.0)),
        (scaled_identity(2, 2), CarlemanParams(alpha0=0.3)),
        (variable_coefficients(), CarlemanParams(gamma=0.1, alpha1=0.5, eps0=0.03125)),
        (variable_coefficients(), CarlemanParams(gamma=0.1, alpha1=0.5, eps0=0.03125, nu=1.5)),
    ]
    rng = np.random.default_rng(4)
    violations, checked = 0, 0
    for c, base in sets:
        p, th = admissible_params(c, base, D)
        pts = sample_points(rng, p, D, 1000)
        for phi in random_fields(rng, D, 2):
            rep = check_pointwise_lemma2(phi, c, p, D, pts, th)
            assert rep.extras["delta_ok"] and rep.extras["lambda_ok"]
            violations += len(rep.violations(1e-9))
            checked += len(pts)
    assert verdict(capsys, 4, violations == 0,
                   f"{violations} violations beyond -1e-9 scale over {checked} point checks "
                   f"in 5 parameter sets")


def test_criterion_5_lemma4(capsys):
    p = CarlemanParams()
    rng = np.random.default_rng(5)
    guaranteed, strict, finding = True, [], []
    for z in random_fields(rng, D, 10):
        rep = check_lemma4(z, p, D, QuadSpec(PANELS))
        guaranteed = guaranteed and rep.passed(include_ym=False)
        integral = [r for r in rep.ratios if not r.label.endswith("*") and r.defined]
        strict.append(all(r.ratio <= p.gamma for r in integral))
        finding.append(next(r.ratio for r in rep.ratios if r.label.endswith("*")))
    with capsys.disabled():
        print(f"\ncriterion 5 finding: strict (<= gamma) holds in {sum(strict)}/10 trials; "
              f"point-evaluation ratio I_y2* ranges {min(finding):.3f}..{max(finding):.3f}")
    assert verdict(capsys, 5, guaranteed,
                   f"all integral ratios <= 2 gamma = {2 * p.gamma} in 10 trials")


def test_criterion_6_reduction_identity(capsys):
    p = CarlemanParams(gamma=0.1, alpha1=0.5, eps0=0.03125)
    c = variable_coefficients()
    rc = reduced_coefficients(c, p)
    rng = np.random.default_rng(6)
    pts = sample_points(rng, p, D, 100)
    pts[::2, -1] *= -1
    worst, orders = 0.0, []
    for w in manufactured_w(rng, D, 10):
        errs = [float(np.abs(check_reduction_identity(w, c, rc, p, pts, panels=k)[0]).max())
                for k in (64, 128, 256)]
        worst = max(worst, errs[-1])
        orders += [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]
    # midpoint quadrature has exact order 2; 1.999 absorbs higher-order terms
    ok = worst <= 1e-6 and min(orders) >= 1.999
    assert verdict(capsys, 6, ok, f"residual {worst:.2e} <= 1e-6, observed order "
                                  f"{min(orders):.6f}..{max(orders):.6f}")


def test_criterion_7_transform(capsys):
    eta0 = 0.05
    rng = np.random.default_rng(7)
    xt = rng.uniform(1e-6, 2.0, 10_000)
    rt = float(np.max(np.abs(to_tilde(from_tilde(xt, eta0), eta0) - xt) / xt))
    pts = np.column_stack([rng.uniform(0.01, 0.5, 200), rng.uniform(-0.5, 0.5, (200, 3))])
    worst = 0.0
    for seed in range(5):
        u = random_fields(np.random.default_rng(seed), D, 1)[0]
        res, scale = transform_consistency_residual(variable_coefficients(), u, pts, eta0)
        worst = max(worst, float(np.max(np.abs(res) / scale)))
    ok = rt <= 1e-12 and worst <= 1e-9
    assert verdict(capsys, 7, ok, f"round trip {rt:.2e} <= 1e-12, consistency {worst:.2e} "
                                  f"<= 1e-9 scale")


def test_criterion_8_lambda_scaling(capsys, identity_admissible):
    c, p, th = identity_admissible
    rng = np.random.default_rng(8)
    bump = make_bump(p, D)
    lams = [th.lambda_star, 2 * th.lambda_star, 4 * th.lambda_star]
    margins, ratios = [], []
    for f in random_fields(rng, D, 5):
        for row in lambda_scaling_study(bump * f, c, p, D, lams, panels=PANELS):
            margins.append(row["margin"])
            ratios.append(row["ratio"])
    ok = min(margins) >= 0 and min(ratios) >= 0.5
    assert verdict(capsys, 8, ok, f"min margin {min(margins):.3e} >= 0, min margin/lambda^3 "
                                  f"ratio {min(ratios):.3e} >= 0.5")


SUITE = ["validate", "thresholds", "check-identity", "check-lemma2", "check-carleman",
         "check-lemma4", "check-reduction", "demo-uniqueness", "scaling-study"]


def _suite(out, seed):
    t0 = time.perf_counter()
    codes = {cmd: cli.main([cmd, "--seed", str(seed), "--out", str(out), "--panels",
                            str(PANELS)]) for cmd in SUITE}
    return codes, time.perf_counter() - t0


def test_criterion_9_reproducibility(capsys, tmp_path):
    codes_a, t_a = _suite(tmp_path / "a", 9)
    codes_b, t_b = _suite(tmp_path / "b", 9)
    csvs = sorted(f.name for f in (tmp_path / "a").glob("*.csv"))
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
               for n in csvs)
    same = same and csvs == sorted(f.name for f in (tmp_path / "b").glob("*.csv"))
    ok = same and len(csvs) > 0 and max(t_a, t_b) <= 600 and codes_a == codes_b
    assert verdict(capsys, 9, ok, f"{len(csvs)} CSVs byte-identical ({same}); suite runs "
                                  f"{t_a:.0f} s and {t_b:.0f} s <= 600 s; exit codes "
                                  f"{sorted(set(codes_a.values()))}")
