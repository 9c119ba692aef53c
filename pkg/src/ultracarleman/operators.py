"""The ultrahyperbolic operator, its weighted principal part, and coefficient data."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import FieldBundle, constant, load_polynomial, make_polynomial, polynomial_to_records
from .jets import coordinates, vsum
from .params import Condition, ParamsError, ValidationReport

YM_TOL = 1e-12


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients ``a_ij`` (symmetric m x m), ``a_i`` (i=1..n), ``b_j``, ``a0`` and ``f``.

    Only the upper triangle of ``a`` is consulted; ``a[j][i]`` for ``j > i`` is
    ignored and read back as ``a[i][j]``, which makes symmetry structural.
    """

    n: int
    m: int
    a: tuple
    a_x: tuple
    b: tuple
    a0: FieldBundle
    f: FieldBundle
    M: float = 1.0
    g: FieldBundle = None
    meta: dict = field(default_factory=dict)

    def aij(self, i, j):
        """0-based access to the symmetric matrix entry."""
        return self.a[min(i, j)][max(i, j)]

    def evaluate(self, X):
        return CoefficientJets(self, X)

    def replace(self, **kw):
        import dataclasses

        return dataclasses.replace(self, **kw)


class CoefficientJets:
    """All coefficient jets evaluated once on a set of coordinate jets."""

    def __init__(self, c: CoefficientSet, X):
        self.c = c
        m = c.m
        self.a = [[None] * m for _ in range(m)]
        for i in range(m):
            for j in range(i, m):
                self.a[i][j] = self.a[j][i] = c.aij(i, j)(X)
        self.a_x = [fb(X) for fb in c.a_x]
        self.b = [fb(X) for fb in c.b]
        self.a0 = c.a0(X)
        self.f = c.f(X)


def scaled_identity(n, m, scale=1.0, M=1.0, f=None, lower=None):
    """``a_ij = -scale * x_1 * delta_ij`` with zero lower-order terms by default."""
    zero = constant(0.0)
    ax = FieldBundle(lambda X: X[0] * (-scale), label=f"-{scale}x1")
    a = tuple(tuple(ax if i == j else zero for j in range(m)) for i in range(m))
    lower = lower or {}
    return CoefficientSet(
        n=n, m=m, a=a,
        a_x=tuple(lower.get(("a", i), zero) for i in range(n)),
        b=tuple(lower.get(("b", j), zero) for j in range(m)),
        a0=lower.get("a0", zero), f=f if f is not None else constant(1.0), M=M)


def ndiff(U, *axes):
    out = U
    for k in axes:
        out = out.d(k)
    return out


# ---------------------------------------------------------------------------
# operators on jets (result order = input order - 2)


def L_jet(cj: CoefficientJets, U, n, m):
    """Full operator of the original equation applied to the jet ``U``."""
    out = vsum(ndiff(U, i, i) for i in range(n))
    for i in range(m):
        for j in range(m):
            out = out - cj.a[i][j] * ndiff(U, n + i, n + j)
    out = out + vsum(cj.a_x[i] * U.d(i) for i in range(n))
    out = out + vsum(cj.b[j] * U.d(n + j) for j in range(m))
    return out + cj.a0 * U


def L0_jet(cj: CoefficientJets, eta0, X, U, n, m):
    """(x1+eta0)^-1 u_x1x1 + (x1+eta0)(Lap' u - sum a_ij u_yiyj)."""
    w = X[0] + eta0
    if np.any(w.v <= 0):
        raise ValueError("x1 + eta0 must be positive")
    inner = -vsum(cj.a[i][j] * ndiff(U, n + i, n + j) for i in range(m) for j in range(m))
    if n > 1:
        inner = inner + vsum(ndiff(U, i, i) for i in range(1, n))
    return ndiff(U, 0, 0) / w + w * inner


def lower_order_jet(cj: CoefficientJets, U, n, m):
    out = vsum(cj.a_x[i] * U.d(i) for i in range(n))
    out = out + vsum(cj.b[j] * U.d(n + j) for j in range(m))
    return out + cj.a0 * U


def transformed_L_jet(cj, eta0, X, U, n, m):
    w = X[0] + eta0
    return L0_jet(cj, eta0, X, U, n, m) + w * lower_order_jet(cj, U, n, m)


# ---------------------------------------------------------------------------
# point-level API


def _eval(c, u, points, order=2):
    X = coordinates(points, order)
    return X, c.evaluate(X), u(X)


def apply_L(c: CoefficientSet, u: FieldBundle, points):
    X, cj, U = _eval(c, u, points)
    return L_jet(cj, U, c.n, c.m).v


def apply_L0(c: CoefficientSet, p, u: FieldBundle, points):
    X, cj, U = _eval(c, u, points)
    return L0_jet(cj, p.eta0, X, U, c.n, c.m).v


def apply_transformed_L(c: CoefficientSet, p, u: FieldBundle, points):
    X, cj, U = _eval(c, u, points)
    return transformed_L_jet(cj, p.eta0, X, U, c.n, c.m).v


def check_condition4(c: CoefficientSet, points, directions):
    """Sampled ellipticity constant: min of -sum(d a_ij/d x1) xi_i xi_j / |xi|^2."""
    points = np.atleast_2d(points)
    xi = np.atleast_2d(np.asarray(directions, dtype=float))
    if len(points) == 0 or len(xi) == 0:
        raise ValueError("need at least one point and one direction")
    norms = np.einsum("dk,dk->d", xi, xi)
    if np.any(norms == 0):
        raise ValueError("directions must be nonzero")
    X = coordinates(points, 1)
    m = c.m
    dA = np.empty((len(points), m, m))
    for i in range(m):
        for j in range(m):
            dA[:, i, j] = c.aij(i, j)(X).g[:, 0]
    q = -np.einsum("pij,di,dj->pd", dA, xi, xi) / norms[None, :]
    return float(q.min())


def validate_coefficients(c: CoefficientSet, points, alpha1=None) -> ValidationReport:
    """Sampled audit of y_m-independence, the C^2 bound M and the ellipticity condition."""
    points = np.atleast_2d(points)
    X = coordinates(points, 2)
    m, ym = c.m, c.n + c.m - 1
    worst_ym = 0.0
    worst_c2 = 0.0
    for i in range(m):
        for j in range(i, m):
            J = c.aij(i, j)(X)
            worst_ym = max(worst_ym, float(np.abs(J.g[:, ym]).max()))
            worst_c2 = max(worst_c2, float(np.abs(J.v).max()), float(np.abs(J.g).max()),
                           float(np.abs(J.h).max()))
    conds = [
        Condition("a_ij_independent_of_ym", worst_ym <= YM_TOL, YM_TOL - worst_ym,
                  f"max |d a_ij / d y_m| = {worst_ym:.3e}"),
        Condition("a_ij_C2_bound", worst_c2 <= c.M, c.M - worst_c2,
                  f"sampled C^2 norm {worst_c2:.6g} vs M = {c.M}"),
    ]
    rng = np.random.default_rng(0)
    dirs = np.vstack([np.eye(m), rng.normal(size=(64, m))])
    est = check_condition4(c, points, dirs)
    detail = f"sampled alpha1 = {est:.6g}"
    if alpha1 is not None:
        conds.append(Condition("condition4", est >= alpha1 > 0, est - alpha1,
                               detail + f" vs declared {alpha1}"))
    else:
        conds.append(Condition("condition4", est > 0, est, detail))
    return ValidationReport(tuple(conds))


# ---------------------------------------------------------------------------
# JSON manifests


def _load_table(entry, base, label):
    if entry is None:
        return constant(0.0)
    if isinstance(entry, str):
        return load_polynomial(Path(base) / entry, label=label)
    if isinstance(entry, (int, float)):
        return constant(entry)
    return make_polynomial(entry, label=label)


def load_coefficients(path):
    """Load a coefficient manifest.

    Schema: ``{"n", "m", "M", "a": {"i,j": table}, "a_x": [table]*n,
    "b": [table]*m, "a0": table, "f": table, "g": table}``; 1-based ``i <= j``,
    missing entries are zero (``f`` defaults to 1).  A table is an inline list of
    ``{"multi_index", "coefficient"}`` records, a number, or a relative path to a
    JSON file holding such a list.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    return coefficients_from_dict(doc, path.parent)


def coefficients_from_dict(doc, base="."):
    allowed = {"n", "m", "M", "a", "a_x", "b", "a0", "f", "g", "w", "description"}
    unknown = set(doc) - allowed
    if unknown:
        raise ParamsError(f"unknown keys in coefficient manifest: {sorted(unknown)}")
    n, m = int(doc["n"]), int(doc["m"])
    amap = doc.get("a", {})
    a = [[None] * m for _ in range(m)]
    for key in amap:
        i, j = (int(t) for t in key.split(","))
        if not (1 <= i <= j <= m):
            raise ParamsError(f"a-entry {key!r} must satisfy 1 <= i <= j <= m")
    for i in range(m):
        for j in range(m):
            lo, hi = min(i, j), max(i, j)
            a[i][j] = _load_table(amap.get(f"{lo + 1},{hi + 1}"), base, f"a{lo + 1}{hi + 1}")
    a_x = doc.get("a_x", [None] * n)
    b = doc.get("b", [None] * m)
    if len(a_x) != n or len(b) != m:
        raise ParamsError("a_x needs n entries and b needs m entries")
    f = doc.get("f", 1.0)
    return CoefficientSet(
        n=n, m=m, a=tuple(tuple(r) for r in a),
        a_x=tuple(_load_table(e, base, f"a{i + 1}") for i, e in enumerate(a_x)),
        b=tuple(_load_table(e, base, f"b{j + 1}") for j, e in enumerate(b)),
        a0=_load_table(doc.get("a0"), base, "a0"),
        f=_load_table(f, base, "f"), M=float(doc.get("M", 1.0)),
        g=_load_table(doc["g"], base, "g") if "g" in doc else None,
        meta={k: doc[k] for k in ("w", "description") if k in doc})


def coefficients_to_dict(c: CoefficientSet):
    """Inverse of :func:`coefficients_from_dict` for polynomial-backed sets."""

    def tbl(fb):
        table = getattr(fb, "table", None)
        if table is None:
            raise ParamsError(f"field {fb.label!r} is not a polynomial table")
        return polynomial_to_records(table)

    out = {"n": c.n, "m": c.m, "M": c.M,
           "a": {f"{i + 1},{j + 1}": tbl(c.aij(i, j)) for i in range(c.m) for j in range(i, c.m)},
           "a_x": [tbl(fb) for fb in c.a_x], "b": [tbl(fb) for fb in c.b],
           "a0": tbl(c.a0), "f": tbl(c.f)}
    if c.g is not None:
        out["g"] = tbl(c.g)
    out.update(c.meta)
    return out
