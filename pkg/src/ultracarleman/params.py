"""Domain geometry, weight parameters, admissibility conditions and thresholds."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class ParamsError(ValueError):
    """Raised for malformed parameter documents or invalid constructor input."""


@dataclass(frozen=True)
class DomainParams:
    """Dimensions and apex of the slab ``Omega_gamma``.

    Coordinates are ordered ``(x_1, ..., x_n, y_1, ..., y_m)``.  The apex has
    ``x_1 = 0`` and ``y_m = 0``; only the free components are stored.
    """

    n: int = 2
    m: int = 2
    center_x: tuple = ()          # (x_2^0, ..., x_n^0)
    center_y: tuple = ()          # (y_1^0, ..., y_{m-1}^0)
    bounding_box: Optional[tuple] = None

    def __post_init__(self):
        if not self.center_x:
            object.__setattr__(self, "center_x", (0.0,) * (self.n - 1))
        if not self.center_y:
            object.__setattr__(self, "center_y", (0.0,) * (self.m - 1))
        object.__setattr__(self, "center_x", tuple(float(v) for v in self.center_x))
        object.__setattr__(self, "center_y", tuple(float(v) for v in self.center_y))
        if self.bounding_box is not None:
            object.__setattr__(self, "bounding_box",
                               tuple((float(a), float(b)) for a, b in self.bounding_box))
        if len(self.center_x) != self.n - 1 or len(self.center_y) != self.m - 1:
            raise ParamsError("center has the wrong number of components")

    @property
    def ndim(self):
        return self.n + self.m

    @property
    def center(self):
        return np.array((0.0,) + self.center_x + self.center_y + (0.0,))

    # axis helpers
    def x(self, i):
        """Axis index of x_i (1-based)."""
        return i - 1

    def y(self, j):
        """Axis index of y_j (1-based)."""
        return self.n + j - 1

    @property
    def xprime_axes(self):
        return list(range(1, self.n))

    @property
    def y_axes(self):
        return list(range(self.n, self.n + self.m))

    @property
    def ym_axis(self):
        return self.n + self.m - 1

    def tight_box(self, p: "CarlemanParams"):
        r = math.sqrt(2.0 * p.gamma)
        c = self.center
        box = [(0.0, p.gamma / p.delta)]
        box += [(c[k] - r, c[k] + r) for k in range(1, self.ndim)]
        return tuple(box)

    def box(self, p: "CarlemanParams"):
        return self.bounding_box if self.bounding_box is not None else self.tight_box(p)

    def to_dict(self):
        out = {"n": self.n, "m": self.m, "center_x": list(self.center_x),
               "center_y": list(self.center_y)}
        if self.bounding_box is not None:
            out["bounding_box"] = [list(b) for b in self.bounding_box]
        return out

    @classmethod
    def from_dict(cls, doc):
        _check_keys(doc, {"n", "m", "center_x", "center_y", "bounding_box"}, "DomainParams")
        return cls(n=int(doc.get("n", 2)), m=int(doc.get("m", 2)),
                   center_x=tuple(doc.get("center_x", ())),
                   center_y=tuple(doc.get("center_y", ())),
                   bounding_box=doc.get("bounding_box"))


@dataclass(frozen=True)
class CarlemanParams:
    """Scalar parameters of the weight ``chi = exp(lam * psi**-nu)``."""

    gamma: float = 0.125
    alpha0: float = 0.5
    delta: float = 5.0
    lam: float = 1.0
    nu: float = 2.0
    alpha1: float = 1.0
    eps0: float = 0.0625
    M: float = 1.0

    @property
    def rho(self):
        return self.gamma + self.alpha0

    @property
    def eta0(self):
        return 0.5 * min(self.alpha0, self.gamma)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        return {"gamma": self.gamma, "alpha0": self.alpha0, "rho": self.rho,
                "eta0": self.eta0, "delta": self.delta, "lambda": self.lam,
                "nu": self.nu, "alpha1": self.alpha1, "eps0": self.eps0, "M": self.M}

    @classmethod
    def from_dict(cls, doc):
        allowed = {"gamma", "alpha0", "rho", "eta0", "delta", "lambda", "nu",
                   "alpha1", "eps0", "M"}
        _check_keys(doc, allowed, "CarlemanParams")
        kw = {k: float(v) for k, v in doc.items() if k not in ("rho", "eta0", "lambda")}
        if "lambda" in doc:
            kw["lam"] = float(doc["lambda"])
        p = cls(**kw)
        for key in ("rho", "eta0"):
            if key in doc and not math.isclose(float(doc[key]), getattr(p, key),
                                               rel_tol=1e-12, abs_tol=1e-15):
                raise ParamsError(f"{key}={doc[key]} disagrees with derived value "
                                  f"{getattr(p, key)}")
        return p


def _check_keys(doc, allowed, what):
    if not isinstance(doc, dict):
        raise ParamsError(f"{what} document must be a JSON object")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ParamsError(f"unknown keys in {what}: {sorted(unknown)}")


def save_params(path, p: CarlemanParams, d: DomainParams):
    Path(path).write_text(json.dumps({"carleman": p.to_dict(), "domain": d.to_dict()},
                                     indent=2, sort_keys=True))


def load_params(path):
    doc = json.loads(Path(path).read_text())
    _check_keys(doc, {"carleman", "domain"}, "parameter file")
    return (CarlemanParams.from_dict(doc.get("carleman", {})),
            DomainParams.from_dict(doc.get("domain", {})))


# ---------------------------------------------------------------------------
# geometry


def level(p: CarlemanParams, d: DomainParams, X):
    """``psi - alpha0`` on coordinate jets (or plain arrays) ``X``."""
    c = d.center
    out = p.delta * X[0]
    for k in range(1, d.ndim):
        out = out + 0.5 * (X[k] - c[k]) * (X[k] - c[k])
    return out


def level_values(p, d, pts):
    pts = np.atleast_2d(pts)
    return level(p, d, [pts[:, k] for k in range(pts.shape[1])])


def in_domain(p, d, pts):
    pts = np.atleast_2d(pts)
    s = level_values(p, d, pts)
    return (pts[:, 0] > 0) & (s > 0) & (s < p.gamma)


# ---------------------------------------------------------------------------
# conditions


def gamma_upper_bound(M, m, eps0):
    """Largest admissible gamma: min{1/2, (4/3)(M(M m^2/eps0 + m^2 + m(m+1)))^(-1/2)}."""
    inner = M * (M * m * m / eps0 + m * m + m * (m + 1))
    if inner <= 0:
        return 0.5
    return min(0.5, (4.0 / 3.0) / math.sqrt(inner))


def compute_beta0(n, m, M, gamma):
    return n + 2 + M * m * ((1 + 3 * math.sqrt(2 * gamma)) * m + 1)


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    slack: float
    detail: str = ""
    informational: bool = False


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple

    @property
    def ok(self):
        return all(c.passed for c in self.conditions if not c.informational)

    def failed(self):
        return [c for c in self.conditions if not c.passed and not c.informational]

    def get(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"ok": self.ok, "conditions": [dataclasses.asdict(c) for c in self.conditions]}


def validate_params(p: CarlemanParams, d: DomainParams) -> ValidationReport:
    """Check every smallness/largeness condition; failures are reported, never raised."""
    conds = []

    def add(name, slack, detail="", strict=True, info=False):
        passed = slack > 0 if strict else slack >= 0
        conds.append(Condition(name, bool(passed), float(slack), detail, info))

    add("dims", min(d.n, d.m) - 2, "n >= 2 and m >= 2", strict=False)
    gb = gamma_upper_bound(p.M, d.m, p.eps0) if p.eps0 > 0 else 0.0
    add("gamma_range", min(p.gamma, 1 - p.gamma), "0 < gamma < 1")
    add("gamma_bound", gb - p.gamma, f"gamma < {gb:.12g}")
    add("alpha0_positive", p.alpha0, "alpha0 > 0")
    add("rho_lt_1", 1 - p.rho, "rho = gamma + alpha0 < 1")
    add("eta0_identity", -abs(2 * p.eta0 - min(p.alpha0, p.gamma)),
        "2 eta0 = min(alpha0, gamma)", strict=False)
    add("delta_gt_4", p.delta - 4, "delta > 4")
    add("lambda_positive", p.lam, "lambda > 0")
    add("nu_gt_1", p.nu - 1, "nu > 1")
    add("alpha1_positive", p.alpha1, "alpha1 > 0")
    add("eps0_range", min(p.eps0, p.alpha1 / (4 * d.m) - p.eps0), "0 < eps0 < alpha1/(4m)")
    add("M_nonnegative", p.M, "M >= 0", strict=False)
    beta0 = compute_beta0(d.n, d.m, p.M, p.gamma)
    nu_min = p.delta ** -4 * (1 + beta0 ** 2 + (0.75 * p.gamma) ** 2)
    add("nu_reduction_bound", p.nu - nu_min,
        f"nu >= delta^-4 (1 + beta0^2 + (3 gamma/4)^2) = {nu_min:.6g}", strict=False)
    tight = d.tight_box(p)
    box = d.box(p)
    contain = min(min(t[0] - b[0], b[1] - t[1]) for t, b in zip(tight, box))
    add("box_contains_domain", contain, "bounding box encloses Omega_gamma", strict=False)
    add("tilde_domain_note", 0.0,
        "change of variables needs x1 > eta0^2/2",
        strict=False, info=True)
    return ValidationReport(tuple(conds))


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class Thresholds:
    beta0: float
    l1: float
    M1: float
    M2: float
    M3: float
    M4: float
    M5_beta4: float
    M5_eq19: float
    delta0: float
    delta1: float
    delta2: float
    delta3: float
    delta4: float
    delta_star: float
    lambda0: float
    lambda1: float
    lambda2: float
    lambda_star: float
    lambda_star_reduction: float
    safety: float = 2.0
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in dataclasses.fields(cls)}
        _check_keys(doc, names, "Thresholds")
        return cls(**doc)


def estimate_thresholds(coeffs, p: CarlemanParams, d: DomainParams, resolution=8,
                        safety=2.0) -> Thresholds:
    """Estimate the existence constants M1..M5 as sampled suprema times ``safety``.

    Suprema are taken over the interior midpoint grid of ``Omega_gamma`` with
    ``resolution`` cells per axis.  Derived thresholds follow the closed-form
    assembly rules (delta2 = 2 M1, lambda1 = max(M2, sqrt(M3)), ...).
    """
    from . import carleman, quadrature, reduction

    if safety <= 0:
        raise ParamsError("safety factor must be positive")
    if resolution < 2:
        raise ParamsError("threshold grid needs at least 2 points per axis")
    n, m, g, M = d.n, d.m, p.gamma, p.M
    pts, _ = quadrature.domain_points(p, d, resolution)
    beta0 = compute_beta0(n, m, M, g)
    sups = carleman.threshold_suprema(coeffs, p, d, pts)
    M1 = safety * sups["sigma31_tilde"]
    M2 = safety * sups["sigma32"]
    M3 = safety * sups["sigma33"]
    M4 = safety * sups["beta31_tilde"]
    M5b = safety * sups["beta4"]
    M5r = safety * reduction.reduction_bound_constant(coeffs, p, d, pts)
    r2g = math.sqrt(2 * g)
    l1 = (1 + (n - 1) * M * 0.75 * g
          + (2 * n * M + 3 * M * M * m * m) * (1 + 2 * r2g) * 0.75 * math.sqrt(g / 2))
    delta1 = (2 / p.alpha1) * (1 + 0.75 * m * beta0 * g * M)
    delta2 = 2 * M1
    delta3 = (4 * m / p.alpha1) * r2g * l1
    delta4 = math.sqrt(2 * M4)
    delta0 = max(4.0, delta3, delta4)
    lambda1 = max(M2, math.sqrt(M3))
    lambda2 = M5b
    lambda0 = lambda2
    return Thresholds(
        beta0=beta0, l1=l1, M1=M1, M2=M2, M3=M3, M4=M4, M5_beta4=M5b, M5_eq19=M5r,
        delta0=delta0, delta1=delta1, delta2=delta2, delta3=delta3, delta4=delta4,
        delta_star=max(delta0, delta1, delta2),
        lambda0=lambda0, lambda1=lambda1, lambda2=lambda2,
        lambda_star=max(lambda0, lambda1),
        lambda_star_reduction=12 * M5r * max(n, m) * (1 + g),
        safety=float(safety),
        notes={"resolution": resolution, "points": int(len(pts)), "delta_used": p.delta},
    )


def admissible_params(coeffs, p: CarlemanParams, d: DomainParams, resolution=8,
                      safety=2.0, margin=1.01, max_iter=20):
    """Raise delta (then lambda) until they exceed the estimated thresholds.

    The domain shrinks as delta grows, so the estimate is iterated to a fixed
    point.  Returns ``(params, thresholds)``.
    """
    for _ in range(max_iter):
        th = estimate_thresholds(coeffs, p, d, resolution, safety)
        if p.delta > th.delta_star:
            break
        p = p.replace(delta=margin * th.delta_star)
    else:
        raise ParamsError("delta threshold iteration did not settle")
    return p.replace(lam=max(p.lam, margin * th.lambda_star)), th
