"""The substitution x1 = (x~1 + eta0)^2 / 2 and the coefficient pushforward it induces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldBundle
from .jets import coordinates
from .operators import CoefficientSet, L_jet, transformed_L_jet


@dataclass(frozen=True)
class TransformSpec:
    eta0: float
    direction: str = "forward"      # "forward": x1 -> x~1, "inverse": x~1 -> x1

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if self.direction not in ("forward", "inverse"):
            raise ValueError("direction must be 'forward' or 'inverse'")

    def __call__(self, t):
        return to_tilde(t, self.eta0) if self.direction == "forward" else from_tilde(t, self.eta0)


def to_tilde(x1, eta0):
    """x~1 = sqrt(2 x1) - eta0, defined for x1 > eta0^2 / 2."""
    x1 = np.asarray(x1, dtype=float)
    if np.any(~(x1 > 0.5 * eta0 * eta0)):
        raise ValueError(f"forward map needs x1 > eta0^2/2 = {0.5 * eta0 * eta0!r}")
    out = np.sqrt(2 * x1) - eta0
    return float(out) if out.ndim == 0 else out


def from_tilde(xt, eta0):
    """x1 = (x~1 + eta0)^2 / 2, defined for x~1 > 0."""
    xt = np.asarray(xt, dtype=float)
    if np.any(~(xt > 0)):
        raise ValueError("inverse map needs x~1 > 0")
    out = 0.5 * (xt + eta0) ** 2
    return float(out) if out.ndim == 0 else out


def pull_coordinates(X, eta0):
    """Original coordinate jets expressed through the tilde coordinate jets."""
    w = X[0] + eta0
    return [w * w * 0.5] + list(X[1:])


def transport(fb: FieldBundle, eta0) -> FieldBundle:
    """``f~(x~1, ...) = f((x~1 + eta0)^2 / 2, ...)`` with exact jets."""
    if fb is None:
        return None
    return FieldBundle(lambda X: fb(pull_coordinates(X, eta0)), fb.smoothness, fb.support,
                       f"~{fb.label}")


def pushforward_coeffs(c: CoefficientSet, eta0, printed_a1=False) -> CoefficientSet:
    """Coefficients of the operator acting on u~ after the substitution.

    Every coefficient is transported.  The first-order x~1 coefficient becomes
    ``a1 / (x~1 + eta0) - (x~1 + eta0)^-3`` because ``u_x1 = u~_x~1 / (x~1 + eta0)``.
    ``printed_a1=True`` instead returns ``a1 - (x~1 + eta0)^-3``, which agrees
    only when ``a1 = 0``.
    """
    a = tuple(tuple(transport(c.aij(i, j), eta0) for j in range(c.m)) for i in range(c.m))
    a_x = [transport(fb, eta0) for fb in c.a_x]
    a1 = c.a_x[0]

    def ev(X):
        w = X[0] + eta0
        base = a1(pull_coordinates(X, eta0))
        if not printed_a1:
            base = base / w
        return base - (w * w * w).reciprocal()

    a_x[0] = FieldBundle(ev, a1.smoothness, "global", f"~{a1.label}-(x+eta0)^-3")
    return c.replace(a=a, a_x=tuple(a_x), b=tuple(transport(fb, eta0) for fb in c.b),
                     a0=transport(c.a0, eta0), f=transport(c.f, eta0), g=transport(c.g, eta0),
                     meta={**c.meta, "transformed": True, "eta0": eta0})


def transform_consistency_residual(c: CoefficientSet, u: FieldBundle, points_tilde, eta0,
                                   printed_a1=False):
    """Relative residual between the transformed operator and the transported original.

    Left: the weighted operator ``(x~1+eta0)^-1 d11 + (x~1+eta0)(...)`` with the
    pushed-forward coefficients applied to ``u~``, divided by ``(x~1+eta0)``.
    Right: ``(L u)`` at the original point ``x1 = (x~1+eta0)^2/2``.
    Returns ``(residual, scale)`` arrays.
    """
    pts = np.atleast_2d(np.asarray(points_tilde, dtype=float))
    from_tilde(pts[:, 0], eta0)                 # domain check
    ct = pushforward_coeffs(c, eta0, printed_a1)
    Xt = coordinates(pts, 2)
    ut = transport(u, eta0)
    lhs = transformed_L_jet(ct.evaluate(Xt), eta0, Xt, ut(Xt), c.n, c.m).v / (pts[:, 0] + eta0)
    orig = pts.copy()
    orig[:, 0] = from_tilde(pts[:, 0], eta0)
    Xo = coordinates(orig, 2)
    U = u(Xo)
    rhs = L_jet(c.evaluate(Xo), U, c.n, c.m).v
    scale = np.maximum.reduce([np.abs(lhs), np.abs(rhs), np.abs(U.v),
                               np.abs(U.g).max(axis=1), np.abs(U.h).reshape(len(pts), -1).max(axis=1)])
    return lhs - rhs, scale
