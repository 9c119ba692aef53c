"""Carleman weight, auxiliary functions, sigma bundle and the Lemma 1-3 checkers.

Exponential weights are huge for admissible lambda, so every pointwise
quantity is evaluated with the locally normalised weight
``chi_hat = exp(lam psi^-nu - lam psi(p)^-nu)``: all terms are quadratic in
``chi``, hence each reported value equals the true value divided by
``chi(p)^2``.  Integrated checks reattach ``chi(p)^2`` through log weights
(see :mod:`ultracarleman.quadrature`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet, coordinates, vsum
from .operators import L0_jet
from .params import compute_beta0, level
from .quadrature import DEFAULT_CAP
from .reports import InequalityReport


# ---------------------------------------------------------------------------
# geometry and weight


class Geometry:
    """psi, its gradient, x1 + eta0 and the coefficient jets on a point batch."""

    def __init__(self, coeffs, p, d, points, order=2):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != d.ndim:
            raise ValueError(f"points must have {d.ndim} columns")
        self.points, self.p, self.d, self.coeffs = pts, p, d, coeffs
        self.n, self.m, self.N = d.n, d.m, d.ndim
        self.X = X = coordinates(pts, order)
        c = d.center
        self.s = level(p, d, X)                     # psi - alpha0, exact
        self.Psi = self.s + p.alpha0
        if np.any(self.Psi.v <= 0):
            raise ValueError("psi must be positive")
        self.c1 = X[0] + p.eta0
        if np.any(self.c1.v <= 0):
            raise ValueError("x1 + eta0 must be positive")
        P = len(pts)
        self.gpsi = [Jet.constant(p.delta, P, self.N, order)]
        self.gpsi += [X[k] - c[k] for k in range(1, self.N)]
        self.cj = coeffs.evaluate(X) if coeffs is not None else None
        self.xs = list(range(1, self.n))
        self.ys = [self.n + j for j in range(self.m)]
        self.beta0 = compute_beta0(self.n, self.m, p.M, p.gamma)
        self._pw = {}

    def pw(self, e):
        """psi ** e as a jet (cached)."""
        if e not in self._pw:
            self._pw[e] = self.Psi.power(e)
        return self._pw[e]

    def a(self, i, j):
        return self.cj.a[i][j]

    @property
    def grad_xp_sq(self):
        return vsum([self.gpsi[k] * self.gpsi[k] for k in self.xs]) if self.xs else 0.0

    @property
    def grad_y_sq(self):
        return vsum([self.gpsi[k] * self.gpsi[k] for k in self.ys])

    def a_psi_psi(self):
        ys, g = self.ys, self.gpsi
        return vsum(self.a(i, j) * g[ys[i]] * g[ys[j]]
                    for i in range(self.m) for j in range(self.m))

    def log_chi(self, lam):
        """lam * psi^-nu as plain values."""
        return lam * self.Psi.v ** (-self.p.nu)

    def chi_hat(self, lam):
        lc = self.Psi.power(-self.p.nu) * lam
        return lc.exp(shift=lc.v)

    def log_weight_rel(self, lam):
        """2 lam (psi^-nu - alpha0^-nu), accurate even when psi rounds to alpha0."""
        a0, nu = self.p.alpha0, self.p.nu
        return 2 * lam * a0 ** (-nu) * np.expm1(-nu * np.log1p(self.s.v / a0))


@dataclass(frozen=True)
class WeightEval:
    psi: float
    chi: float
    log_chi: float
    grad_psi: np.ndarray
    hess_psi: np.ndarray
    grad_chi: np.ndarray
    hess_chi: np.ndarray


def eval_weight(p, d, point, lam=None):
    """Exact psi and chi with first and second derivatives at one point."""
    lam = p.lam if lam is None else lam
    X = coordinates(np.atleast_2d(point), 2)
    Psi = level(p, d, X) + p.alpha0
    lc = Psi.power(-p.nu) * lam
    chat = lc.exp(shift=lc.v)
    scale = np.exp(lc.v[0]) if lc.v[0] < 700 else np.inf
    return WeightEval(psi=float(Psi.v[0]), chi=float(scale), log_chi=float(lc.v[0]),
                      grad_psi=Psi.g[0].copy(), hess_psi=Psi.h[0].copy(),
                      grad_chi=chat.g[0] * scale, hess_chi=chat.h[0] * scale)


# ---------------------------------------------------------------------------
# auxiliary functions


@dataclass
class AuxFunctions:
    phi1: Jet
    phi2: Jet
    phi3: Jet
    phi4: Jet
    phi21: Jet
    phi22: Jet
    phi31: Jet
    phi32: Jet
    K: Jet          # (x1+eta0)^-1 delta^2 phi1 + (x1+eta0)(phi2 - phi3)
    G: Jet          # (x1+eta0) K


def aux_functions(geo: Geometry, lam, printed_phi32=False) -> AuxFunctions:
    """phi_1..phi_4 and the split parts phi_21, phi_22, phi_31, phi_32.

    The ``psi^(-nu-1)`` part of phi_32 multiplies ``tr(a)`` (it comes from the
    second derivatives of psi in y); ``printed_phi32`` uses
    ``sum a_ij psi_yi psi_yj`` there instead, which breaks the relation
    ``(L0 phi) chi = A + 2 lam nu psi^(-nu-1) C``.
    """
    p, n = geo.p, geo.n
    nu, dl = p.nu, p.delta
    ln, ln2 = lam * nu, (lam * nu) ** 2
    pw = geo.pw
    gx2 = geo.grad_xp_sq
    apsi = geo.a_psi_psi()
    phi1 = pw(-2 * nu - 2) * ln2 - pw(-nu - 2) * (lam * nu * (nu + 1))
    phi21 = pw(-2 * nu - 2) * gx2
    phi22 = pw(-nu - 2) * gx2 * (nu + 1) - pw(-nu - 1) * (n - 1)
    phi31 = pw(-2 * nu - 2) * apsi
    if printed_phi32:
        phi32 = (pw(-nu - 2) * (nu + 1) - pw(-nu - 1)) * apsi
    else:
        tra = vsum(geo.a(i, i) for i in range(geo.m))
        phi32 = pw(-nu - 2) * apsi * (nu + 1) - pw(-nu - 1) * tra
    phi2 = phi21 * ln2 - phi22 * ln
    phi3 = phi31 * ln2 - phi32 * ln
    phi4 = pw(-2 * nu - 3) * ln2 - pw(-nu - 3) * (0.5 * lam * nu * (nu + 2))
    c1 = geo.c1
    G = phi1 * dl ** 2 + c1 * c1 * (phi2 - phi3)
    return AuxFunctions(phi1, phi2, phi3, phi4, phi21, phi22, phi31, phi32, G / c1, G)


# ---------------------------------------------------------------------------
# sigma bundle


@dataclass
class SigmaBundle:
    s11: np.ndarray
    s12: np.ndarray
    s21: np.ndarray
    s22: np.ndarray
    s23: np.ndarray
    s31: np.ndarray
    s32: np.ndarray
    s33: np.ndarray
    lam: float
    nu: float
    beta0: float

    @property
    def sigma1(self):
        ln = self.lam * self.nu
        return ln ** 3 * self.s11 + ln ** 2 * self.s12

    @property
    def sigma2(self):
        ln = self.lam * self.nu
        return ln ** 2 * self.s21 + ln * self.s22 + self.s23

    @property
    def sigma3(self):
        ln = self.lam * self.nu
        return ln ** 3 * self.s31 + ln ** 2 * self.s32 + ln * self.s33

    def consistency_residual(self):
        """|sigma3 - (sigma1 + 2 lam nu beta0 sigma2)| relative to the largest part."""
        alt = self.sigma1 + 2 * self.lam * self.nu * self.beta0 * self.sigma2
        scale = np.maximum.reduce([np.abs(self.sigma3), np.abs(self.sigma1),
                                   np.abs(2 * self.lam * self.nu * self.beta0 * self.sigma2),
                                   np.full_like(self.sigma3, 1e-300)])
        return np.abs(self.sigma3 - alt) / scale


def sigma_bundle(geo: Geometry, lam, printed_sigma12=False) -> SigmaBundle:
    """sigma_1 (Lemma 2), sigma_2 (Lemma 3) and sigma_3 = sigma_1 + 2 lam nu beta0 sigma_2.

    ``printed_sigma12`` switches to the typeset sigma_12 (``+6`` and an extra
    ``(nu+1)`` on the alpha_1 term) for comparison; the default is the form
    that makes the conversion from theta to phi an identity.
    """
    p, n, m = geo.p, geo.n, geo.m
    nu, dl, a1 = p.nu, p.delta, p.alpha1
    b0 = geo.beta0
    pv = lambda e: geo.pw(e).v  # noqa: E731
    c = geo.c1.v
    gx2 = geo.grad_xp_sq
    gx2 = gx2.v if isinstance(gx2, Jet) else np.zeros_like(c)
    gy2 = geo.grad_y_sq.v
    apsi = geo.a_psi_psi().v
    ys, g = geo.ys, geo.gpsi
    bracket = -2 * dl ** 3 * c ** -3 + 2 * c ** 2 * (b0 - 1) * gx2 - dl * a1 * c * gy2
    s11 = pv(-2 * nu - 2) * bracket
    if printed_sigma12:
        br2 = (-2 * dl ** 3 * c ** -3 + 2 * c ** 2 * (b0 - 1) * gx2
               - dl * a1 * c * (nu + 1) * gy2)
        s12 = ((nu + 1) * pv(-nu - 2) * br2
               + pv(-nu - 1) * (6 * dl ** 2 * c ** -4 - 2 * c ** 2 * (b0 - 1) * (n - 1)
                                + dl * a1 * c * m))
    else:
        s12 = ((nu + 1) * pv(-nu - 2) * bracket
               + pv(-nu - 1) * (-6 * dl ** 2 * c ** -4 - 2 * c ** 2 * (b0 - 1) * (n - 1)
                                + dl * a1 * c * m))
    inner = dl ** 2 + c ** 2 * (gx2 - apsi)
    s21 = -2 * pv(-2 * nu - 2) * inner
    da = sum(geo.a(i, j).g[:, ys[j]] * g[ys[i]].v for i in range(m) for j in range(m))
    tra = sum(geo.a(i, i).v for i in range(m))
    s22 = -(nu + 1) * pv(-nu - 2) * inner + pv(-nu - 1) * c ** 2 * (n - 1 - 2 * da - tra)
    s23 = 0.5 * c ** 2 * sum(geo.a(i, j).h[:, ys[i], ys[j]] for i in range(m) for j in range(m))
    return SigmaBundle(s11, s12, s21, s22, s23, s11 + 2 * b0 * s21, s12 + 2 * b0 * s22,
                       2 * b0 * s23, lam, nu, b0)


# ---------------------------------------------------------------------------
# phi-dependent context


class FieldContext:
    """Geometry plus the jets of phi, chi_hat and theta = chi_hat * phi."""

    def __init__(self, phi, coeffs, p, d, points, lam=None, geo=None):
        self.geo = geo or Geometry(coeffs, p, d, points)
        self.p = p
        self.lam = p.lam if lam is None else lam
        self.Phi = phi(self.geo.X)
        self.chi = self.geo.chi_hat(self.lam)
        self.Th = self.chi * self.Phi
        self.aux = aux_functions(self.geo, self.lam)

    @property
    def chi2(self):
        return self.chi * self.chi

    def L0phi(self):
        g = self.geo
        return L0_jet(g.cj, self.p.eta0, g.X, self.Phi, g.n, g.m)


def _divergence_D3(fc: FieldContext):
    """D3(phi) with chi_hat in place of chi."""
    g, p = fc.geo, fc.p
    lam, nu, dl = fc.lam, p.nu, p.delta
    F, X2 = fc.Phi, fc.chi2
    c2 = g.c1 * g.c1
    q = g.pw(-nu - 1) * (lam * nu)
    F2 = F * F
    out = -((F * F.d(0) + q * F2 * dl) * X2).d(0)
    for i in g.xs:
        out = out - ((F * F.d(i) + g.gpsi[i] * q * F2) * X2 * c2).d(i)
    ys = g.ys
    for i in range(g.m):
        acc = None
        for j in range(g.m):
            a = g.a(i, j)
            term = a * (F.d(ys[j]) * F + g.gpsi[ys[j]] * q * F2) - F2 * (0.5 * a.d(ys[j]))
            acc = term if acc is None else acc + term
        out = out + (acc * X2 * c2).d(ys[i])
    return out


def _divergence_D2(fc: FieldContext):
    g, p = fc.geo, fc.p
    lam, nu, dl = fc.lam, p.nu, p.delta
    ln2 = (lam * nu) ** 2
    F2X2 = fc.Phi * fc.Phi * fc.chi2 * g.pw(-nu - 1)
    c1 = g.c1
    out = (F2X2 * c1.power(-3)).d(0) * (-2 * ln2 * dl ** 2)
    for k in g.ys:
        out = out - (F2X2 * c1 * g.gpsi[k]).d(k) * (ln2 * dl * p.alpha1)
    for k in g.xs:
        out = out + (F2X2 * g.gpsi[k]).d(k) * (2 * ln2 * (g.beta0 - 1)) * (c1 * c1).truncate(0)
    return out


def _params_snapshot(p, d, lam):
    doc = p.to_dict()
    doc["lambda"] = lam
    doc.update({"n": d.n, "m": d.m})
    return doc


def _grad_sq(J, axes):
    out = np.zeros(J.npts)
    for k in axes:
        out = out + J.g[:, k] ** 2
    return out


# ---------------------------------------------------------------------------
# Lemma 3


def lemma3_parts(fc: FieldContext):
    g, p = fc.geo, fc.p
    F = fc.Phi
    X2 = fc.chi2.v
    c = g.c1.v
    L0 = fc.L0phi().v
    lhs = -c * F.v * L0 * X2
    ays = sum(g.a(i, j).v * F.g[:, g.ys[i]] * F.g[:, g.ys[j]]
              for i in range(g.m) for j in range(g.m))
    sb = sigma_bundle(g, fc.lam)
    rhs = {"phi_x1^2 chi^2": F.g[:, 0] ** 2 * X2,
           "chi^2 c1^2 (|grad' phi|^2 - a phi_y phi_y)":
               X2 * c ** 2 * (_grad_sq(F, g.xs) - ays),
           "sigma2 phi^2 chi^2": sb.sigma2 * F.v ** 2 * X2}
    return lhs, rhs, _divergence_D3(fc).v


def check_identity_lemma3(phi, coeffs, p, d, points, lam=None) -> InequalityReport:
    """Residual of the Lemma 3 identity at each point (should be round-off)."""
    fc = FieldContext(phi, coeffs, p, d, points, lam)
    lhs, rhs, div = lemma3_parts(fc)
    return InequalityReport("lemma3_identity", lhs, rhs, div, fc.geo.points,
                            _params_snapshot(p, d, fc.lam), kind="identity")


# ---------------------------------------------------------------------------
# Lemma 2 and Lemma 1


def _lemma2_rhs_phi(fc: FieldContext, printed_sigma12=False):
    g, p = fc.geo, fc.p
    lam, nu, dl, a1 = fc.lam, p.nu, p.delta, p.alpha1
    ln = lam * nu
    F, X2, c = fc.Phi, fc.chi2.v, g.c1.v
    sb = sigma_bundle(g, lam, printed_sigma12)
    return {
        "2 lam nu delta c1^-3 phi_x1^2 chi^2": 2 * ln * dl * c ** -3 * F.g[:, 0] ** 2 * X2,
        "-2 lam nu c1^2 (beta0-1) |grad' phi|^2 chi^2":
            -2 * ln * c ** 2 * (g.beta0 - 1) * _grad_sq(F, g.xs) * X2,
        "lam nu delta alpha1 c1 |grad_y phi|^2 chi^2":
            ln * dl * a1 * c * _grad_sq(F, g.ys) * X2,
        "2 lam^3 nu^4 delta^4 c1^-2 psi^(-2nu-3) phi^2 chi^2":
            2 * lam ** 3 * nu ** 4 * dl ** 4 * c ** -2 * g.pw(-2 * nu - 3).v * F.v ** 2 * X2,
        "sigma1 phi^2 chi^2": sb.sigma1 * F.v ** 2 * X2,
    }, sb


def lemma2_lhs(fc: FieldContext):
    g = fc.geo
    return g.pw(fc.p.nu + 1).v * fc.L0phi().v ** 2 * fc.chi2.v


def check_pointwise_lemma2(phi, coeffs, p, d, points, thresholds=None, lam=None,
                           printed_sigma12=False) -> InequalityReport:
    """Margin of the Lemma 2 pointwise inequality, divergences D1 + D2 included."""
    from .expansion import divergence_D1

    fc = FieldContext(phi, coeffs, p, d, points, lam)
    lhs = lemma2_lhs(fc)
    rhs, _ = _lemma2_rhs_phi(fc, printed_sigma12)
    div = divergence_D1(fc).v + _divergence_D2(fc).v
    extras = {}
    if thresholds is not None:
        extras = {"delta_ok": bool(p.delta >= thresholds.delta0),
                  "lambda_ok": bool(fc.lam >= thresholds.lambda0)}
    return InequalityReport("lemma2_pointwise", lhs, rhs, div, fc.geo.points,
                            _params_snapshot(p, d, fc.lam), extras=extras)


def lemma2_conversion_residual(phi, coeffs, p, d, points, lam=None, printed_sigma12=False):
    """Relative gap between the theta form and the phi form of the Lemma 2 right side.

    The two must agree identically; this certifies sigma_1 and D2.
    """
    fc = FieldContext(phi, coeffs, p, d, points, lam)
    g, pp = fc.geo, fc.p
    lam, nu, dl, a1 = fc.lam, pp.nu, pp.delta, pp.alpha1
    ln = lam * nu
    T, c = fc.Th, g.c1.v
    theta_terms = [2 * ln * dl * c ** -3 * T.g[:, 0] ** 2,
                   -2 * ln * c ** 2 * (g.beta0 - 1) * _grad_sq(T, g.xs),
                   ln * dl * a1 * c * _grad_sq(T, g.ys),
                   2 * lam ** 3 * nu ** 4 * dl ** 4 * c ** -2 * g.pw(-2 * nu - 3).v * T.v ** 2]
    rhs, _ = _lemma2_rhs_phi(fc, printed_sigma12)
    phi_terms = list(rhs.values()) + [_divergence_D2(fc).v]
    a = sum(theta_terms)
    b = sum(phi_terms)
    scale = np.max(np.abs(np.stack(theta_terms + phi_terms)), axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return np.abs(a - b) / scale


def lemma1_parts(fc: FieldContext, with_c1_factor=True):
    g, p = fc.geo, fc.p
    lam, nu, dl = fc.lam, p.nu, p.delta
    ln = lam * nu
    F, X2, c = fc.Phi, fc.chi2.v, g.c1.v
    L0 = fc.L0phi().v
    fac = c if with_c1_factor else 1.0
    lhs = g.pw(nu + 1).v * L0 ** 2 * X2 - 2 * ln * g.beta0 * fac * F.v * L0 * X2
    rhs = {
        "2 lam nu delta c1^-3 phi_x1^2 chi^2": 2 * ln * dl * c ** -3 * F.g[:, 0] ** 2 * X2,
        "2 lam nu c1^2 |grad' phi|^2 chi^2": 2 * ln * c ** 2 * _grad_sq(F, g.xs) * X2,
        "2 lam nu c1 |grad_y phi|^2 chi^2": 2 * ln * c * _grad_sq(F, g.ys) * X2,
        "lam^3 nu^4 delta^4 psi^(-2nu-3) phi^2 chi^2":
            lam ** 3 * nu ** 4 * dl ** 4 * g.pw(-2 * nu - 3).v * F.v ** 2 * X2,
    }
    return lhs, rhs


def divergence_D(fc: FieldContext):
    """D = D1(chi phi) + D2(chi phi) + 2 lam nu beta0 D3(phi), per chi(p)^2."""
    from .expansion import divergence_D1

    g = fc.geo
    return (divergence_D1(fc).v + _divergence_D2(fc).v
            + 2 * fc.lam * fc.p.nu * g.beta0 * _divergence_D3(fc).v)


def carleman_pointwise(phi, coeffs, p, d, points, lam=None, with_c1_factor=True):
    fc = FieldContext(phi, coeffs, p, d, points, lam)
    lhs, rhs = lemma1_parts(fc, with_c1_factor)
    return InequalityReport("lemma1_pointwise", lhs, rhs, divergence_D(fc), fc.geo.points,
                            _params_snapshot(p, d, fc.lam))


def check_carleman_lemma1(phi, coeffs, p, d, thresholds=None, mode="pointwise", points=None,
                          lam=None, panels=16, with_c1_factor=True, cap=DEFAULT_CAP):
    """Lemma 1 in pointwise or integrated form.

    Integrated mode integrates ``lhs - rhs`` (the divergence-free margin) and
    ``D`` separately over the domain; compact support of ``phi`` is required.
    """
    lam = p.lam if lam is None else lam
    extras = {}
    if thresholds is not None:
        extras = {"delta_ok": bool(p.delta > thresholds.delta_star),
                  "lambda_ok": bool(lam > thresholds.lambda_star),
                  "lambda_star": thresholds.lambda_star, "delta_star": thresholds.delta_star}
    if mode == "pointwise":
        if points is None:
            raise ValueError("pointwise mode needs points")
        rep = carleman_pointwise(phi, coeffs, p, d, points, lam, with_c1_factor)
        rep.extras.update(extras)
        return rep
    if mode != "integrated":
        raise ValueError(f"unknown mode {mode!r}")
    if "compact" not in getattr(phi, "support", ""):
        raise ValueError("integrated mode requires a compactly supported test field")
    from .quadrature import QuadSpec, integrate_weighted

    def integrand(pts):
        fc = FieldContext(phi, coeffs, p, d, pts, lam)
        lhs, rhs = lemma1_parts(fc, with_c1_factor)
        cols = {"lhs": lhs, **rhs, "D": divergence_D(fc),
                "lam3_term": rhs["lam^3 nu^4 delta^4 psi^(-2nu-3) phi^2 chi^2"]}
        return cols, fc.geo.log_weight_rel(lam)

    res = integrate_weighted(integrand, QuadSpec(panels), p, d, lam=lam, cap=cap)
    v, e = res.values, res.errors
    rhs_keys = [k for k in v if k not in ("lhs", "D", "lam3_term")]
    rep = InequalityReport(
        "lemma1_integrated", [v["lhs"]], {k: [v[k]] for k in rhs_keys}, [0.0],
        "integrated", _params_snapshot(p, d, lam))
    rep.extras.update(extras)
    rep.extras.update({
        "integral_D": v["D"], "integral_D_error": e["D"],
        "divergence_free_margin": float(rep.margin[0]),
        "margin_error": float(e["lhs"] + sum(e[k] for k in rhs_keys)),
        "lam3_term": v["lam3_term"], "log_scale": res.log_scale,
        "cap": res.cap, "values": v, "errors": e})
    return rep


def lambda_scaling_study(phi, coeffs, p, d, lams, panels=16, cap=DEFAULT_CAP):
    """Integrated Lemma 1 margin and margin / lambda^3-term ratio for each lambda."""
    lams = list(lams)
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda list must be increasing")
    rows = []
    for lam in lams:
        rep = check_carleman_lemma1(phi, coeffs, p, d, mode="integrated", lam=lam,
                                    panels=panels, cap=cap)
        margin = rep.extras["divergence_free_margin"]
        lam3 = rep.extras["lam3_term"]
        rows.append({"lambda": lam, "margin": margin, "lam3_term": lam3,
                     "ratio": margin / lam3 if lam3 != 0 else 0.0,
                     "integral_D": rep.extras["integral_D"],
                     "integral_D_error": rep.extras["integral_D_error"],
                     "log_scale": rep.extras["log_scale"]})
    return rows


# ---------------------------------------------------------------------------
# Coefficient property of the A-term and threshold suprema


def gradient_term_margin(phi, coeffs, p, d, points, lam=None):
    """lam nu delta alpha1 c1 |grad_y th|^2 - 2 lam nu beta0 c1^2 a th_y th_y - 2 lam nu c1 |grad_y th|^2."""
    fc = FieldContext(phi, coeffs, p, d, points, lam)
    g, T = fc.geo, fc.Th
    ln, c = fc.lam * p.nu, g.c1.v
    gy = _grad_sq(T, g.ys)
    ays = sum(g.a(i, j).v * T.g[:, g.ys[i]] * T.g[:, g.ys[j]]
              for i in range(g.m) for j in range(g.m))
    lhs = ln * p.delta * p.alpha1 * c * gy - 2 * ln * g.beta0 * c ** 2 * ays
    rhs = 2 * ln * c * gy
    return InequalityReport("gradient_term", lhs, {"2 lam nu c1 |grad_y theta|^2": rhs}, 0.0, g.points,
                            _params_snapshot(p, d, fc.lam))


def threshold_suprema(coeffs, p, d, points):
    """Sampled suprema of the lambda-free functions behind M1..M5."""
    from .expansion import beta34

    geo = Geometry(coeffs, p, d, points)
    sb = sigma_bundle(geo, 1.0)
    nu, dl = p.nu, p.delta
    s31t = sb.s31 / (dl ** 3 * nu * geo.pw(-2 * nu - 3).v)
    b3, b4, b31 = beta34(geo)
    c = geo.c1.v
    b31t = c ** 2 * geo.pw(2 * nu + 3).v * b31 / (4 * dl ** 2 * (nu + 1))
    return {"sigma31_tilde": float(np.abs(s31t).max()), "sigma32": float(np.abs(sb.s32).max()),
            "sigma33": float(np.abs(sb.s33).max()), "beta31_tilde": float(np.abs(b31t).max()),
            "beta4": float(np.abs(b4).max())}
