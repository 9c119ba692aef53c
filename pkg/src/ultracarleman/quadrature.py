"""Integration over the curved slab, Lemma 4 ratios, weighted energy and the uniqueness demo.

Plain integrals (:func:`integrate_domain`) use a tensor midpoint grid on a box
enclosing ``{x1 > 0, 0 < psi - alpha0 < gamma}`` with a membership indicator.

Weighted integrals (:func:`integrate_weighted`) use level-adapted
coordinates ``(s, rho)`` with ``s = psi - alpha0`` and ``rho`` in the unit
ball of the transverse variables::

    x1 = s (1 - |rho|^2) / delta,   (x', y) = center + sqrt(2 s) rho,

whose Jacobian is ``(2 s)^((N-1)/2) / delta``.  The slab maps exactly onto
``(0, s_max) x ball``.  With ``s = s_max tau^2`` the variable ``tau`` gets
composite 3-point Gauss panels (the weight ``exp(-kappa s)`` becomes a
Gaussian bell in ``tau`` and half-integer powers of ``s`` become
polynomial), and ``rho`` a midpoint grid with the ball indicator.  For large lambda the factor
``chi^2`` decays like ``exp(-kappa s)`` with ``kappa >= 2 lam nu rho0^(-nu-1)``
(``rho0 = alpha0 + gamma``), so ``s`` is cut at ``cap / kappa``; the
neglected mass is of relative size ``exp(-cap)`` times a polynomial factor.

Every rule is run at ``panels`` and ``panels // 2`` and reports
``|I_fine - I_coarse|`` as its error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import in_domain, level_values

CHUNK = 4096
DEFAULT_CAP = 120.0


@dataclass(frozen=True)
class QuadSpec:
    panels: int = 16
    levels: int = 2

    def __post_init__(self):
        if self.panels < 8:
            raise ValueError("quadrature needs at least 8 panels per axis")
        if self.levels < 2:
            raise ValueError("error estimation needs at least 2 refinement levels")
        if self.panels % 2:
            raise ValueError("panels must be even so the coarse level is panels/2")

    def level_panels(self):
        return [self.panels // 2 ** k for k in range(self.levels - 1, -1, -1)]


def cap_level(p, lam, cap):
    """Level ``s_max`` carrying all but ``exp(-cap)`` of the chi^2 mass."""
    if cap is None or lam <= 0:
        return p.gamma
    kappa = 2 * lam * p.nu * p.rho ** (-p.nu - 1)
    return min(p.gamma, cap / kappa)


def _box(p, d, s_max):
    r = math.sqrt(2 * s_max)
    c = d.center
    return [(0.0, s_max / p.delta)] + [(c[k] - r, c[k] + r) for k in range(1, d.ndim)]


def _inside(p, d, pts, s_max):
    s = level_values(p, d, pts)
    return (pts[:, 0] > 0) & (s > 0) & (s < s_max)


def grid(p, d, panels, s_max=None):
    """Interior midpoints and the common cell volume."""
    s_max = p.gamma if s_max is None else s_max
    box = _box(p, d, s_max)
    axes = [a + (np.arange(panels) + 0.5) * (b - a) / panels for a, b in box]
    vol = float(np.prod([(b - a) / panels for a, b in box]))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return pts[_inside(p, d, pts, s_max)], vol


def domain_points(p, d, resolution=8):
    """Midpoint sample of the slab used for threshold suprema."""
    if resolution < 2:
        raise ValueError("grid needs at least 2 points per axis")
    pts, vol = grid(p, d, resolution)
    if len(pts) == 0:
        raise ValueError("no grid point falls inside the domain")
    return pts, vol


@dataclass
class QuadResult:
    value: float
    error: float
    levels: list = field(default_factory=list)


def integrate_domain(expr, q: QuadSpec, p, d):
    """Tensor-midpoint integral of ``expr(points) -> values`` over the slab."""
    vals = []
    for panels in q.level_panels():
        pts, vol = grid(p, d, panels)
        if len(pts) == 0:
            raise ValueError(f"empty domain at {panels} panels per axis")
        acc = np.concatenate([np.asarray(expr(pts[k:k + CHUNK]), dtype=float)
                              for k in range(0, len(pts), CHUNK)])
        vals.append(float(np.sum(acc) * vol))
    return QuadResult(vals[-1], abs(vals[-1] - vals[-2]), vals)


@dataclass
class WeightedResult:
    """Integrals ``values[k] * exp(log_scale)`` of each column, with error estimates."""

    values: dict
    errors: dict
    log_scale: float
    cap: float
    npoints: int

    def log_abs(self, key):
        v = self.values[key]
        return -math.inf if v == 0 else math.log(abs(v)) + self.log_scale


def adapted_grid(p, d, panels, s_max):
    """Nodes and weights of the level-adapted rule on ``{0 < s < s_max, x1 > 0}``."""
    N = d.ndim
    xg, wg = np.polynomial.legendre.leggauss(3)
    h = 1.0 / panels
    left = np.arange(panels) * h
    tau = (left[:, None] + 0.5 * h * (xg[None, :] + 1)).ravel()
    s_nodes = s_max * tau ** 2                  # graded towards s = 0
    s_w = np.tile(0.5 * h * wg, panels) * 2 * s_max * tau
    r = -1 + (np.arange(panels) + 0.5) * (2.0 / panels)
    mesh = np.meshgrid(*([r] * (N - 1)), indexing="ij")
    rho = np.stack([g.ravel() for g in mesh], axis=1)
    r2 = np.sum(rho ** 2, axis=1)
    keep = r2 < 1
    rho, r2 = rho[keep], r2[keep]
    cell = (2.0 / panels) ** (N - 1)
    S = np.repeat(s_nodes, len(rho))
    W = np.repeat(s_w, len(rho)) * cell * (2 * S) ** ((N - 1) / 2) / p.delta
    R = np.tile(rho, (len(s_nodes), 1))
    R2 = np.tile(r2, len(s_nodes))
    pts = np.empty((len(S), N))
    pts[:, 0] = S * (1 - R2) / p.delta
    pts[:, 1:] = np.asarray(d.center[1:])[None, :] + np.sqrt(2 * S)[:, None] * R
    return pts, W


def integrate_weighted(integrand, q: QuadSpec, p, d, lam, cap=DEFAULT_CAP):
    """Integrate columns returned by ``integrand(points) -> (dict, log_weights)``.

    Both refinement levels share one log scale (the largest log weight seen),
    so the fine/coarse difference is meaningful even when the weights span
    hundreds of orders of magnitude.  Summation is numpy's pairwise sum over
    a fixed ordering, so results do not depend on chunking.
    """
    s_max = cap_level(p, lam, cap)
    per_level = []
    for panels in q.level_panels():
        pts, wts = adapted_grid(p, d, panels, s_max)
        cols, logw = {}, []
        for k in range(0, len(pts), CHUNK):
            c, lw = integrand(pts[k:k + CHUNK])
            logw.append(np.asarray(lw, dtype=float))
            for key, v in c.items():
                cols.setdefault(key, []).append(np.asarray(v, dtype=float))
        per_level.append(({k: np.concatenate(v) for k, v in cols.items()},
                          np.concatenate(logw), wts, len(pts)))
    S = max(float(lw.max()) for _, lw, _, _ in per_level)
    sums = []
    for cols, lw, wts, _ in per_level:
        w = np.exp(lw - S) * wts
        sums.append({k: float(np.sum(v * w)) for k, v in cols.items()})
    fine, coarse = sums[-1], sums[-2]
    return WeightedResult(fine, {k: abs(fine[k] - coarse[k]) for k in fine}, S, s_max,
                          per_level[-1][3])


# ---------------------------------------------------------------------------
# Lemma 4


@dataclass
class RatioReport:
    label: str
    numerator: float
    denominator: float
    numerator_error: float
    denominator_error: float

    @property
    def defined(self):
        return self.denominator > 0

    @property
    def ratio(self):
        return self.numerator / self.denominator if self.defined else math.nan

    def within(self, bound):
        return self.defined and self.ratio <= bound


@dataclass
class Lemma4Report:
    gamma: float
    c_factor: float
    ratios: list

    @property
    def bound(self):
        return self.c_factor * self.gamma

    def group(self, prefix):
        return [r for r in self.ratios if r.label.startswith(prefix)]

    def passed(self, include_ym=True):
        rs = self.ratios if include_ym else [r for r in self.ratios if not r.label.endswith("*")]
        return all(r.within(self.bound) for r in rs if r.defined)

    def undefined(self):
        return [r.label for r in self.ratios if not r.defined]

    def rows(self):
        return [{"label": r.label, "ratio": r.ratio, "bound": self.bound,
                 "within": r.within(self.bound), "within_gamma": r.within(self.gamma)}
                for r in self.ratios]


def check_lemma4(z, p, d, q: QuadSpec, c_factor=2.0, lam=None, primitive_panels=8,
                 convention="piecewise"):
    """Weighted L2 ratios of the y_m-primitive operators against ``c_factor * gamma``.

    Labels: ``I``, ``I_x{i}``, ``I_y{j}``.  The ``I_y{m}`` entry (marked with a
    trailing ``*``) is the point evaluation ``+-z`` rather than an integral,
    so no bound of this type holds for it in general; it is reported for the
    record.
    """
    from .reduction import primitive_family

    if c_factor not in (1, 2, 1.0, 2.0):
        raise ValueError("c_factor must be 1 (strict) or 2 (safe)")
    lam = p.lam if lam is None else lam
    n, m = d.n, d.m

    def integrand(pts):
        from .carleman import Geometry

        geo = Geometry(None, p, d, pts, order=1)
        Z = z.jet(pts, 1)
        fam = primitive_family(z, pts, primitive_panels, rule="gauss", convention=convention,
                               n=n, m=m)
        cols = {"I:num": fam["I"] ** 2, "I:den": Z.v ** 2}
        for i in range(n):
            cols[f"I_x{i + 1}:num"] = fam[f"I_x{i + 1}"] ** 2
            cols[f"I_x{i + 1}:den"] = Z.g[:, i] ** 2
        for j in range(m):
            cols[f"I_y{j + 1}:num"] = fam[f"I_y{j + 1}"] ** 2
            cols[f"I_y{j + 1}:den"] = Z.g[:, n + j] ** 2
        return cols, geo.log_weight_rel(lam)

    res = integrate_weighted(integrand, q, p, d, lam, cap=None)
    labels = ["I"] + [f"I_x{i + 1}" for i in range(n)] + [f"I_y{j + 1}" for j in range(m)]
    ratios = []
    for lab in labels:
        num, den = res.values[lab + ":num"], res.values[lab + ":den"]
        tag = lab + "*" if lab == f"I_y{m}" else lab
        ratios.append(RatioReport(tag, num, den, res.errors[lab + ":num"],
                                  res.errors[lab + ":den"]))
    return Lemma4Report(p.gamma, float(c_factor), ratios)


# ---------------------------------------------------------------------------
# weighted energy


def energy_density(Z, geo, lam):
    p = geo.p
    ln = lam * p.nu
    c = geo.c1.v
    gx = sum(Z.g[:, k] ** 2 for k in geo.xs) if geo.xs else 0.0
    gy = sum(Z.g[:, k] ** 2 for k in geo.ys)
    return ln ** 3 * Z.v ** 2 + ln * (Z.g[:, 0] ** 2 + c ** 2 * gx + c * gy)


def weighted_energy(z, p, d, q: QuadSpec, lam=None, cap=DEFAULT_CAP):
    """Integral of (lam^3 nu^3 z^2 + lam nu (z_x1^2 + c1^2 |grad' z|^2 + c1 |grad_y z|^2)) chi^2.

    Returns a :class:`WeightedResult` with column ``"energy"``; the true value
    is ``values["energy"] * exp(log_scale + 2 lam alpha0^-nu)``.
    """
    from .carleman import Geometry

    lam = p.lam if lam is None else lam

    def integrand(pts):
        geo = Geometry(None, p, d, pts, order=1)
        return {"energy": energy_density(z.jet(pts, 1), geo, lam)}, geo.log_weight_rel(lam)

    res = integrate_weighted(integrand, q, p, d, lam, cap)
    res.log_scale += 2 * lam * p.alpha0 ** (-p.nu)
    return res


# ---------------------------------------------------------------------------
# uniqueness demonstration


@dataclass
class UniquenessReport:
    rows: list
    bound_min_slack: float
    applicable: bool
    conclusion: str
    notes: dict = field(default_factory=dict)

    CSV_HEADER = ["lambda", "energy", "budget", "margin", "integral_D", "integral_D_error",
                  "residual_budget", "log_scale"]


def uniqueness_demo(instance, p, d, thresholds, q: QuadSpec, lams=None, cap=DEFAULT_CAP,
                    tol=1e-9):
    """Assemble the estimate chain for one manufactured instance.

    For each lambda the report lists the weighted energy ``E``, the divergence
    integral ``int D(z)``, the residual budget ``int 2 (1 + c1^2) r^2 chi^2``
    (``r`` is the residual of the integro-differential equation) and the
    final inequality margin, all relative to one log scale per lambda.
    """
    from .carleman import FieldContext, divergence_D, lemma1_parts
    from .reduction import reduction_bound_parts

    lam_star = thresholds.lambda_star
    lams = list(lams) if lams is not None else [lam_star, 2 * lam_star, 4 * lam_star]
    applicable = all(lam >= lam_star for lam in lams) and p.delta > thresholds.delta_star
    z = instance.z
    M5, nm = thresholds.M5_eq19, max(d.n, d.m)
    rows = []
    slacks = [math.inf]
    for lam in lams:
        def integrand(pts, lam=lam):
            fc = FieldContext(z, instance.coeffs, p, d, pts, lam)
            e19 = reduction_bound_parts(instance, p, d, pts, M5)
            c = fc.geo.c1.v
            X2 = fc.chi2.v
            _, rhs = lemma1_parts(fc)
            rhs_total = sum(rhs.values())
            D = divergence_D(fc)
            big = 12 * M5 * nm * c ** 2 * (1 + c ** 2) * e19["sum_sq"] * X2
            resid = 2 * (1 + c ** 2) * e19["residual"] ** 2 * X2
            zsq = (lam * p.nu * thresholds.beta0) ** 2 * fc.Phi.v ** 2 * X2
            cols = {"energy": energy_density(fc.Phi, fc.geo, lam) * X2, "D": D,
                    "residual_budget": resid,
                    "final_margin": big + resid + zsq - rhs_total - D}
            slacks.append(float(np.min(e19["slack"])))
            return cols, fc.geo.log_weight_rel(lam)

        res = integrate_weighted(integrand, q, p, d, lam, cap)
        v, e = res.values, res.errors
        budget = -v["D"] + v["residual_budget"]
        rows.append({"lambda": lam, "energy": v["energy"], "budget": budget,
                     "margin": budget - v["energy"], "integral_D": v["D"],
                     "integral_D_error": e["D"], "residual_budget": v["residual_budget"],
                     "final_margin": v["final_margin"], "log_scale": res.log_scale})
    energies = [r["energy"] for r in rows]
    if all(abs(x) == 0 for x in energies):
        conclusion = "unique (trivially)"
    elif not applicable:
        conclusion = "not applicable: lambda or delta below the estimated thresholds"
    elif all(r["residual_budget"] == 0 for r in rows):
        forced = all(r["energy"] <= max(tol, 3 * r["integral_D_error"]) for r in rows)
        conclusion = ("energy forced below tolerance: unique" if forced
                      else "energy not forced below tolerance")
    else:
        ratios = [r["energy"] / r["budget"] if r["budget"] > 0 else math.inf for r in rows]
        conclusion = ("residual nonzero; energy <= C * budget with C = "
                      f"{max(ratios):.6g}; a zero residual would force zero energy")
    return UniquenessReport(rows, min(slacks), applicable, conclusion,
                            {"lambda_star": lam_star, "M5_eq19": M5})
