"""Scalar fields with exact 2-jets (and 3-jets where needed).

A :class:`FieldBundle` wraps an evaluator that maps coordinate jets to a jet,
so the same field can be sampled at points, composed with a change of
variables, or combined with other fields, always with exact derivatives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .jets import Jet, coordinates
from .params import level


@dataclass(frozen=True)
class FieldBundle:
    evaluator: Callable
    smoothness: int = 1000
    support: str = "global"         # or "compact-in-Omega_gamma"
    label: str = ""

    def __call__(self, X):
        return self.evaluator(X)

    def jet(self, points, order=2):
        return self.evaluator(coordinates(points, order))

    def values(self, points):
        return self.jet(points, 0).v

    # jet algebra lifts pointwise
    def __add__(self, other):
        if isinstance(other, FieldBundle):
            return FieldBundle(lambda X: self(X) + other(X), min(self.smoothness, other.smoothness),
                               _support_sum(self, other), f"({self.label}+{other.label})")
        return FieldBundle(lambda X: self(X) + other, self.smoothness, "global",
                           f"({self.label}+{other})")

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, FieldBundle):
            sup = ("compact-in-Omega_gamma" if "compact" in self.support + other.support
                   else "global")
            return FieldBundle(lambda X: self(X) * other(X), min(self.smoothness, other.smoothness),
                               sup, f"{self.label}*{other.label}")
        return FieldBundle(lambda X: self(X) * other, self.smoothness, self.support,
                           f"{other}*{self.label}")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, FieldBundle):
            return FieldBundle(lambda X: self(X) / other(X), min(self.smoothness, other.smoothness),
                               self.support, f"{self.label}/{other.label}")
        return self * (1.0 / other)


def _support_sum(a, b):
    if "compact" in a.support and "compact" in b.support:
        return a.support
    return "global"


def _const_jet(c, X):
    x0 = X[0]
    return Jet.constant(c, x0.npts, x0.ndim or len(X), x0.order)


def constant(c):
    c = float(c)
    return FieldBundle(lambda X: _const_jet(c, X), label=repr(c))


def coordinate(k):
    return FieldBundle(lambda X: X[k], label=f"z{k}")


def expression(fn, label="expr", smoothness=1000):
    """Field from a function of coordinate jets, e.g. ``lambda X: X[2].sin()``."""
    return FieldBundle(fn, smoothness=smoothness, label=label)


# ---------------------------------------------------------------------------
# polynomials


def _normalise_table(table):
    out = {}
    if isinstance(table, dict):
        items = table.items()
    else:
        items = ((tuple(r["multi_index"]), r["coefficient"]) for r in table)
    for alpha, c in items:
        alpha = tuple(int(a) for a in alpha)
        if any(a < 0 for a in alpha):
            raise ValueError(f"negative exponent in multi-index {alpha}")
        if not np.isfinite(c):
            raise ValueError("non-finite polynomial coefficient")
        out[alpha] = out.get(alpha, 0.0) + float(c)
    return out


def make_polynomial(table, label="poly"):
    """Polynomial field from ``{multi_index: coefficient}`` or a list of records.

    Records have the JSON shape ``{"multi_index": [...], "coefficient": c}``.
    """
    coeffs = _normalise_table(table)

    def ev(X):
        ndim = len(X)
        total = _const_jet(0.0, X)
        powers = {}
        for alpha, c in coeffs.items():
            if len(alpha) != ndim:
                raise ValueError(f"multi-index {alpha} does not match dimension {ndim}")
            if c == 0.0:
                continue
            term = None
            for k, a in enumerate(alpha):
                if a == 0:
                    continue
                key = (k, a)
                if key not in powers:
                    powers[key] = X[k] ** a if a <= 4 else X[k].power(a)
                term = powers[key] if term is None else term * powers[key]
            total = total + (c if term is None else term * c)
        return total

    fb = FieldBundle(ev, label=label)
    object.__setattr__(fb, "table", coeffs)
    return fb


def polynomial_to_records(table):
    return [{"multi_index": list(a), "coefficient": c} for a, c in sorted(table.items())]


def load_polynomial(path_or_records, label="poly"):
    if isinstance(path_or_records, (str, Path)):
        records = json.loads(Path(path_or_records).read_text())
    else:
        records = path_or_records
    return make_polynomial(records, label=label)


def random_polynomial(rng, ndim, degree=3, label="rand"):
    """Dense polynomial of total degree <= ``degree``, coefficients U[-1, 1]."""
    table = {}
    for alpha in _multi_indices(ndim, degree):
        table[alpha] = float(rng.uniform(-1.0, 1.0))
    return make_polynomial(table, label=label)


def _multi_indices(ndim, degree):
    if ndim == 0:
        yield ()
        return
    for a in range(degree + 1):
        for rest in _multi_indices(ndim - 1, degree - a):
            yield (a,) + rest


# ---------------------------------------------------------------------------
# bump


def make_bump(p, d):
    """``[s(1-s)]^3 x_1^3`` with ``s = (psi - alpha0)/gamma``.

    Value, gradient and Hessian vanish on ``{s=0}``, ``{s=1}`` and ``{x_1=0}``.
    """

    def ev(X):
        s = level(p, d, X) * (1.0 / p.gamma)
        q = s * (1.0 - s)
        return (q * q * q) * (X[0] * X[0] * X[0])

    return FieldBundle(ev, support="compact-in-Omega_gamma", label="bump")


# ---------------------------------------------------------------------------
# finite-difference cross-check


def fd_jet2(f, point, h, box=None):
    """Second-order central-difference 2-jet of a value-only field.

    ``f`` maps an array of points (P, N) to values (P,).  Points may be a single
    point or a batch; ``box`` (per-axis intervals) enables the boundary guard.
    """
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    npts, ndim = pts.shape
    if h <= 0:
        raise ValueError("step must be positive")
    if box is not None:
        size = max(b - a for a, b in box)
        if h < 1e-8 * size:
            raise ValueError("step underflow relative to box size")
        lo = np.array([a for a, _ in box])
        hi = np.array([b for _, b in box])
        if np.any(pts - 2 * h < lo) or np.any(pts + 2 * h > hi):
            raise ValueError("point closer than 2h to the bounding box")
    eye = np.eye(ndim) * h
    f0 = f(pts)
    g = np.empty((npts, ndim))
    H = np.empty((npts, ndim, ndim))
    for i in range(ndim):
        fp, fm = f(pts + eye[i]), f(pts - eye[i])
        g[:, i] = (fp - fm) / (2 * h)
        H[:, i, i] = (fp - 2 * f0 + fm) / (h * h)
        for j in range(i + 1, ndim):
            fpp = f(pts + eye[i] + eye[j])
            fpm = f(pts + eye[i] - eye[j])
            fmp = f(pts - eye[i] + eye[j])
            fmm = f(pts - eye[i] - eye[j])
            H[:, i, j] = H[:, j, i] = (fpp - fpm - fmp + fmm) / (4 * h * h)
    return Jet(f0, g, H)


def fd_field(field, h):
    """Field whose 2-jets come from central differences of ``field`` values."""

    def ev(X):
        pts = np.stack([x.v for x in X], axis=1)
        jet = fd_jet2(field.values, pts, h)
        return jet.truncate(X[0].order)

    return FieldBundle(ev, smoothness=2, support=field.support, label=f"fd({field.label})")
