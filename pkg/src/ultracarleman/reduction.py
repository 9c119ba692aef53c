"""Reduction of the inverse problem to an integro-differential Cauchy problem.

With ``w = u / f`` the transformed equation becomes an equation for ``w`` with
reduced lower-order coefficients (``abar``, ``bbar``, ``a0bar``).  Since
``a_ij`` and ``g`` do not depend on ``y_m`` and ``w`` vanishes on
``{y_m = 0}``, differentiating in ``y_m`` gives an equation for ``z = w_ym``
in which ``w`` and its first derivatives appear through primitives in ``y_m``.

Two primitive conventions are provided:

* ``"oriented"``: ``J z = int_0^{y_m} z dtau`` (signed), so ``w = J w_ym``
  holds on both sides of ``y_m = 0``;
* ``"piecewise"``: ``I z = sign(y_m) J z``, the piecewise unsigned definition.

Fields derived from ``w`` or ``f`` by differentiation are evaluated in plain
Cartesian coordinates: their evaluators re-seed coordinate jets of a higher
order at the incoming points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import FieldBundle
from .jets import MAX_ORDER, coordinates, vsum
from .operators import CoefficientSet, L0_jet

PRIMITIVE_PANELS = 256
_QUAD_BUDGET = 1 << 18


# ---------------------------------------------------------------------------
# plain-coordinate derived fields


def _points_of(X):
    return np.stack([x.v for x in X], axis=1)


def _lifted(fn, extra, label, support="global"):
    """Field whose jet of order k is built from coordinate jets of order k + extra."""

    def ev(X):
        order = X[0].order
        if order + extra > MAX_ORDER:
            raise ValueError(f"{label}: jets of order {order} need order {order + extra} inputs")
        return fn(coordinates(_points_of(X), order + extra)).truncate(order)

    return FieldBundle(ev, support=support, label=label)


def derivative_field(w: FieldBundle, axis, label=None):
    """``dw/dz_axis`` as a field (one jet order is consumed)."""
    return _lifted(lambda X: w(X).d(axis), 1, label or f"d{axis}({w.label})", w.support)


def divide_by_f(u: FieldBundle, f: FieldBundle, f_min=0.0) -> FieldBundle:
    """``u / f`` with quotient-rule jets; raises where ``|f| < f_min`` (or ``f = 0``)."""

    def ev(X):
        F = f(X)
        bad = np.abs(F.v) < f_min if f_min > 0 else F.v == 0
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise ValueError(f"|f| = {abs(F.v[k]):.3e} below f_min = {f_min:.3e} at point "
                             f"{_points_of(X)[k].tolist()}")
        return u(X) / F

    return FieldBundle(ev, min(u.smoothness, f.smoothness), u.support, f"{u.label}/{f.label}")


# ---------------------------------------------------------------------------
# reduced coefficients


@dataclass(frozen=True)
class ReducedCoefficients:
    a_bar: tuple            # n fields, abar_1 .. abar_n
    b_bar: tuple            # m fields
    a0_bar: FieldBundle
    base: CoefficientSet
    f_min: float
    printed_b: bool = False

    @property
    def n(self):
        return self.base.n

    @property
    def m(self):
        return self.base.m

    def fields(self):
        return list(self.a_bar) + list(self.b_bar) + [self.a0_bar]


def f_floor(c: CoefficientSet, points, rel=1e-6):
    """Default guard ``rel * sup |f|`` over a sample."""
    return rel * float(np.abs(c.f.values(points)).max())


def reduced_coefficients(c: CoefficientSet, p, f_min=None, points=None,
                         printed_b=False) -> ReducedCoefficients:
    """Lower-order coefficients of the equation for ``w = u / f``.

    ``bbar_j = (-sum_i (a_ij + a_ji) f_yi + b_j f) / f`` collects every
    ``w_yj`` term produced by ``a_ij (f w)_{y_i y_j}``.  ``printed_b=True``
    uses ``-sum_i (a_ji f_yj + a_ij f_yi)`` instead; the two differ whenever
    ``f`` depends on ``y``.
    """
    n, m, eta0 = c.n, c.m, p.eta0
    if f_min is None:
        f_min = f_floor(c, points) if points is not None else 0.0

    def guard(F, X):
        bad = np.abs(F.v) < f_min if f_min > 0 else F.v == 0
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise ValueError(f"f vanishes (|f| = {abs(F.v[k]):.3e} < {f_min:.3e}) at "
                             f"{_points_of(X)[k].tolist()}")
        return F

    def A(i, j, X):
        return c.aij(i, j)(X)

    def a0_eval(X):
        F = guard(c.f(X), X)
        w = X[0] + eta0
        tot = F.d(0).d(0) / (w * w)
        for i in range(1, n):
            tot = tot + F.d(i).d(i)
        tot = tot - vsum(A(i, j, X) * F.d(n + i).d(n + j) for i in range(m) for j in range(m))
        tot = tot + vsum(c.a_x[i](X) * F.d(i) for i in range(n))
        tot = tot + vsum(c.b[j](X) * F.d(n + j) for j in range(m))
        return (tot + c.a0(X) * F) / F

    def a_eval(i):
        def ev(X):
            F = guard(c.f(X), X)
            lead = F.d(i) * 2.0
            if i == 0:
                w = X[0] + eta0
                lead = lead / (w * w)
            return (lead + c.a_x[i](X) * F) / F
        return ev

    def b_eval(j):
        def ev(X):
            F = guard(c.f(X), X)
            if printed_b:
                s = vsum(A(j, i, X) * F.d(n + j) + A(i, j, X) * F.d(n + i) for i in range(m))
            else:
                s = vsum((A(i, j, X) + A(j, i, X)) * F.d(n + i) for i in range(m))
            return (c.b[j](X) * F - s) / F
        return ev

    return ReducedCoefficients(
        a_bar=tuple(_lifted(a_eval(i), 1, f"abar{i + 1}") for i in range(n)),
        b_bar=tuple(_lifted(b_eval(j), 1, f"bbar{j + 1}") for j in range(m)),
        a0_bar=_lifted(a0_eval, 2, "a0bar"), base=c, f_min=f_min, printed_b=printed_b)


# ---------------------------------------------------------------------------
# primitives in y_m


def _rule(panels, rule):
    if panels < 8:
        raise ValueError("primitive quadrature needs at least 8 panels")
    edges = np.linspace(0.0, 1.0, panels + 1)
    h = 1.0 / panels
    if rule == "midpoint":
        return edges[:-1] + 0.5 * h, np.full(panels, h)
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(3)
        t = (edges[:-1, None] + 0.5 * h * (x[None, :] + 1)).ravel()
        return t, np.tile(0.5 * h * w, panels)
    raise ValueError(f"unknown rule {rule!r}")


def primitive_family(z: FieldBundle, points, panels=PRIMITIVE_PANELS, rule="midpoint",
                     convention="oriented", n=None, m=None):
    """``J z``, ``J_xi z`` and ``J_yj z`` (or the piecewise I-forms) at each point.

    ``J_{y_m} z`` is the point value ``z`` (derivative of the primitive in its
    upper limit).  Keys: ``"I"``, ``"I_x{i}"``, ``"I_y{j}"`` with 1-based
    indices.
    """
    if convention not in ("oriented", "piecewise"):
        raise ValueError("convention must be 'oriented' or 'piecewise'")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P, N = pts.shape
    if n is None or m is None:
        raise ValueError("n and m are required")
    ym = N - 1
    t, wt = _rule(panels, rule)
    K = len(t)
    out = {"I": np.empty(P)}
    out.update({f"I_x{i + 1}": np.empty(P) for i in range(n)})
    out.update({f"I_y{j + 1}": np.empty(P) for j in range(m)})
    step = max(1, _QUAD_BUDGET // K)
    for a in range(0, P, step):
        blk = pts[a:a + step]
        B = len(blk)
        Q = np.repeat(blk, K, axis=0)
        Q[:, ym] = (blk[:, ym][:, None] * t[None, :]).ravel()
        Z = z.jet(Q, 1)
        L = blk[:, ym]
        out["I"][a:a + B] = L * (Z.v.reshape(B, K) @ wt)
        gz = Z.g.reshape(B, K, N)
        for i in range(n):
            out[f"I_x{i + 1}"][a:a + B] = L * (gz[:, :, i] @ wt)
        for j in range(m - 1):
            out[f"I_y{j + 1}"][a:a + B] = L * (gz[:, :, n + j] @ wt)
        out[f"I_y{m}"][a:a + B] = z.values(blk)
    if convention == "piecewise":
        sgn = np.where(pts[:, ym] >= 0, 1.0, -1.0)
        out = {k: v * sgn for k, v in out.items()}
    return out


def integral_J(z, points, panels=PRIMITIVE_PANELS, n=None, m=None, rule="midpoint"):
    """Oriented ``int_0^{y_m} z dtau`` at each point."""
    return primitive_family(z, points, panels, rule, "oriented", n, m)["I"]


def integral_I(z, points, panels=PRIMITIVE_PANELS, n=None, m=None, rule="midpoint"):
    """The piecewise unsigned form: ``J`` for ``y_m >= 0``, ``-J`` otherwise."""
    return primitive_family(z, points, panels, rule, "piecewise", n, m)["I"]


# ---------------------------------------------------------------------------
# residual of the integro-differential equation


def _integro_pieces(z, rc: ReducedCoefficients, p, points, panels, rule, convention):
    c, n, m = rc.base, rc.n, rc.m
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ym = n + m - 1
    X = coordinates(pts, 2)
    Z = z(X)
    cj = c.evaluate(X)
    L0z = L0_jet(cj, p.eta0, X, Z, n, m).v
    X1 = coordinates(pts, 1)
    abar = [fb(X1) for fb in rc.a_bar]
    bbar = [fb(X1) for fb in rc.b_bar]
    a0b = rc.a0_bar(X1)
    fam = primitive_family(z, pts, panels, rule, convention, n, m)
    direct = (sum(abar[i].v * Z.g[:, i] for i in range(n))
              + sum(bbar[j].v * Z.g[:, n + j] for j in range(m)) + a0b.v * Z.v)
    integral = (sum(abar[i].g[:, ym] * fam[f"I_x{i + 1}"] for i in range(n))
                + sum(bbar[j].g[:, ym] * fam[f"I_y{j + 1}"] for j in range(m))
                + a0b.g[:, ym] * fam["I"])
    sum_sq = np.sum(Z.g ** 2, axis=1) + sum(v ** 2 for v in fam.values()) + Z.v ** 2
    return {"w": pts[:, 0] + p.eta0, "L0z": L0z, "direct": direct, "integral": integral,
            "sum_sq": sum_sq, "family": fam}


def integro_residual(z: FieldBundle, rc: ReducedCoefficients, p, points, panels=PRIMITIVE_PANELS,
                  rule="midpoint", convention="oriented"):
    """Left side of the integro-differential equation for ``z`` at each point."""
    pc = _integro_pieces(z, rc, p, points, panels, rule, convention)
    return pc["L0z"] + pc["w"] * (pc["direct"] + pc["integral"])


def reduced_operator_jet(w: FieldBundle, rc: ReducedCoefficients, p, points):
    """``d/dy_m`` of the reduced operator applied to ``w``, exact via 3-jets."""
    c, n, m = rc.base, rc.n, rc.m
    ym = n + m - 1
    X = coordinates(points, 3)
    W = w(X)
    val = L0_jet(c.evaluate(X), p.eta0, X, W, n, m)
    X1 = coordinates(points, 1)
    W2 = w(coordinates(points, 2))
    low = vsum(rc.a_bar[i](X1) * W2.d(i) for i in range(n))
    low = low + vsum(rc.b_bar[j](X1) * W2.d(n + j) for j in range(m))
    low = low + rc.a0_bar(X1) * W2.truncate(1)
    return val.g[:, ym] + ((X1[0] + p.eta0) * low).g[:, ym]


def reduced_operator_values(w: FieldBundle, rc: ReducedCoefficients, p, points):
    """The reduced operator applied to ``w`` (left side of the ``w``-equation)."""
    c, n, m = rc.base, rc.n, rc.m
    X = coordinates(points, 2)
    W = w(X)
    X0 = coordinates(points, 0)
    low = sum(rc.a_bar[i](X0).v * W.g[:, i] for i in range(n))
    low = low + sum(rc.b_bar[j](X0).v * W.g[:, n + j] for j in range(m))
    low = low + rc.a0_bar(X0).v * W.v
    return L0_jet(c.evaluate(X), p.eta0, X, W, n, m).v + (X[0].v + p.eta0) * low


def check_division_identity(w: FieldBundle, rc: ReducedCoefficients, p, points):
    """Residual between the reduced operator on ``w`` and the weighted operator on ``f w`` over ``f``.

    Zero up to round-off exactly when the reduced coefficients are right.
    Returns ``(residual, scale)``.
    """
    from .operators import transformed_L_jet

    c = rc.base
    X = coordinates(points, 2)
    U = c.f(X) * w(X)
    F = c.f(X).v
    rhs = transformed_L_jet(c.evaluate(X), p.eta0, X, U, c.n, c.m).v / F
    lhs = reduced_operator_values(w, rc, p, points)
    W = w(X)
    scale = np.maximum.reduce([np.abs(lhs), np.abs(rhs), np.abs(W.v), np.abs(W.g).max(axis=1),
                               np.abs(W.h).reshape(len(F), -1).max(axis=1)])
    return lhs - rhs, scale


def check_reduction_identity(w: FieldBundle, c: CoefficientSet, rc: ReducedCoefficients, p,
                             points, panels=PRIMITIVE_PANELS, rule="midpoint", tol=1e-12):
    """Residual between ``d/dy_m [reduced operator](w)`` and the integro-differential
    operator applied to ``z = w_ym`` with oriented primitives.

    Returns ``(residual, scale)`` arrays.  Raises if ``w`` does not vanish on
    ``{y_m = 0}`` at the sampled points.
    """
    if rc.base is not c:
        raise ValueError("reduced coefficients were built from a different coefficient set")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, m = c.n, c.m
    ym = n + m - 1
    base = pts.copy()
    base[:, ym] = 0.0
    w0 = np.abs(w.values(base))
    wscale = max(1.0, float(np.abs(w.values(pts)).max()))
    if np.any(w0 > tol * wscale):
        raise ValueError(f"w does not vanish on y_m = 0 (max |w| = {w0.max():.3e})")
    lhs = reduced_operator_jet(w, rc, p, pts)
    z = derivative_field(w, ym, "z")
    pc = _integro_pieces(z, rc, p, pts, panels, rule, "oriented")
    rhs = pc["L0z"] + pc["w"] * (pc["direct"] + pc["integral"])
    scale = np.maximum.reduce([np.abs(lhs), np.abs(rhs), np.abs(pc["L0z"]),
                               np.abs(pc["w"] * pc["direct"]), np.abs(pc["w"] * pc["integral"])])
    return lhs - rhs, scale


# ---------------------------------------------------------------------------
# instances and the reduction bound constant


@dataclass
class InverseProblemInstance:
    """Coefficients, source factor ``f`` and a manufactured ``w`` (or ``z``) with u0 = 0."""

    coeffs: CoefficientSet
    z: FieldBundle
    w: FieldBundle = None
    label: str = ""
    panels: int = 8
    rule: str = "gauss"
    _rc: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_w(cls, coeffs, w, label="", **kw):
        ym = coeffs.n + coeffs.m - 1
        return cls(coeffs, derivative_field(w, ym, "z"), w, label, **kw)

    @property
    def u(self):
        if self.w is None:
            raise ValueError("instance was built from z; u = f * J z is not materialised")
        return self.w * self.coeffs.f

    def reduced(self, p):
        key = (p.eta0,)
        if key not in self._rc:
            self._rc[key] = reduced_coefficients(self.coeffs, p)
        return self._rc[key]

    def verify_boundary(self, points, tol=1e-12):
        """Sampled Cauchy data on ``{x1 = 0}`` and the vanishing trace on ``{y_m = 0}``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ym = self.coeffs.n + self.coeffs.m - 1
        out = {}
        on_x = pts.copy()
        on_x[:, 0] = 0.0
        Zx = self.z.jet(on_x, 1)
        out["z_x1_zero"] = float(max(np.abs(Zx.v).max(), np.abs(Zx.g[:, 0]).max()))
        if self.w is not None:
            Wx = self.w.jet(on_x, 1)
            out["w_x1_zero"] = float(max(np.abs(Wx.v).max(), np.abs(Wx.g[:, 0]).max()))
            on_y = pts.copy()
            on_y[:, ym] = 0.0
            out["w_ym_zero"] = float(np.abs(self.w.values(on_y)).max())
        out["ok"] = all(v <= tol for k, v in out.items())
        return out


def reduction_bound_parts(instance: InverseProblemInstance, p, d, points, M5=None):
    """Pointwise pieces of the reduction bound for ``z`` with oriented primitives.

    ``lower`` is the combination multiplying ``(x1+eta0)`` in the equation,
    ``sum_sq`` the bracket of squares, ``residual`` the equation residual and
    ``slack = 6 M5 max(n, m) c1^2 sum_sq - c1^2 lower^2`` (when ``M5`` is given).
    """
    rc = instance.reduced(p)
    pc = _integro_pieces(instance.z, rc, p, points, instance.panels, instance.rule, "oriented")
    lower = pc["direct"] + pc["integral"]
    out = {"lower": lower, "sum_sq": pc["sum_sq"],
           "residual": pc["L0z"] + pc["w"] * lower, "c1": pc["w"]}
    if M5 is not None:
        c2 = pc["w"] ** 2
        out["slack"] = 6 * M5 * max(d.n, d.m) * c2 * pc["sum_sq"] - c2 * lower ** 2
    return out


def reduction_bound_constant(coeffs: CoefficientSet, p, d, points):
    """Sampled ``K^2`` with ``K`` the largest reduced coefficient or ``y_m``-derivative.

    By Cauchy-Schwarz over the ``2n + 2m + 2`` products,
    ``lower^2 <= (2n + 2m + 2) K^2 sum_sq <= 6 max(n, m) K^2 sum_sq``.
    """
    rc = reduced_coefficients(coeffs, p, points=points)
    pts = np.atleast_2d(points)
    X1 = coordinates(pts, 1)
    ym = d.ndim - 1
    K = 0.0
    for fb in rc.fields():
        J = fb(X1)
        K = max(K, float(np.abs(J.v).max()), float(np.abs(J.g[:, ym]).max()))
    return K * K
