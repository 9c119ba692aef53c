"""Result containers shared by the checkers, with JSON and CSV serialisation."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np


def params_hash(*docs):
    """Short stable hash of parameter snapshots (sorted-key JSON)."""
    blob = json.dumps(docs, sort_keys=True, default=_jsonable).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"not serialisable: {type(v)!r}")


def fmt(x):
    """Fixed repr for CSV cells so identical runs give identical bytes."""
    return repr(float(x))


@dataclass
class InequalityReport:
    """Left side, labelled right-side terms, divergence and margin of one check.

    Arrays are per point (length P) in pointwise mode and length 1 in
    integrated mode.  ``margin = lhs - sum(rhs_terms) - divergence`` and is
    recomputable from the stored parts.  ``scale`` is the largest absolute
    contribution at each location and sets the relative tolerance.
    """

    name: str
    lhs: np.ndarray
    rhs_terms: dict
    divergence: np.ndarray
    location: object                  # (P, N) array or "integrated"
    params: dict = field(default_factory=dict)
    kind: str = "inequality"          # or "identity"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lhs = np.atleast_1d(np.asarray(self.lhs, dtype=float))
        self.divergence = np.broadcast_to(
            np.atleast_1d(np.asarray(self.divergence, dtype=float)), self.lhs.shape).copy()
        self.rhs_terms = {k: np.broadcast_to(np.atleast_1d(np.asarray(v, dtype=float)),
                                             self.lhs.shape).copy()
                          for k, v in self.rhs_terms.items()}

    @property
    def rhs(self):
        out = np.zeros_like(self.lhs)
        for v in self.rhs_terms.values():
            out = out + v
        return out

    @property
    def margin(self):
        return self.lhs - self.rhs - self.divergence

    @property
    def scale(self):
        parts = [np.abs(self.lhs), np.abs(self.divergence)]
        parts += [np.abs(v) for v in self.rhs_terms.values()]
        return np.max(np.stack(parts), axis=0)

    @property
    def relative(self):
        s = self.scale
        return np.where(s > 0, self.margin / np.where(s > 0, s, 1.0), 0.0)

    def min_margin(self):
        return float(self.margin.min())

    def max_abs_relative(self):
        return float(np.abs(self.relative).max())

    def passed(self, tol=1e-9):
        if self.kind == "identity":
            return self.max_abs_relative() <= tol
        return bool(np.all(self.margin >= -tol * self.scale))

    def violations(self, tol=1e-9):
        if self.kind == "identity":
            return np.flatnonzero(np.abs(self.relative) > tol)
        return np.flatnonzero(self.margin < -tol * self.scale)

    # -- serialisation -----------------------------------------------------
    def to_dict(self):
        loc = self.location if isinstance(self.location, str) else np.asarray(self.location)
        return {"name": self.name, "kind": self.kind, "lhs": self.lhs,
                "rhs_terms": self.rhs_terms, "divergence": self.divergence,
                "margin": self.margin, "scale": self.scale, "location": loc,
                "params": self.params, "params_hash": params_hash(self.params),
                "extras": self.extras}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)

    def csv_rows(self):
        h = params_hash(self.params)
        margin, lhs, rhs, div = self.margin, self.lhs, self.rhs, self.divergence
        for k in range(len(lhs)):
            if isinstance(self.location, str):
                point = self.location
            else:
                point = " ".join(fmt(v) for v in np.asarray(self.location)[k])
            yield [self.name, point, fmt(margin[k]), fmt(lhs[k]), fmt(rhs[k]), fmt(div[k]), h]

    CSV_HEADER = ["check", "point", "margin", "lhs", "rhs", "divergence", "params_hash"]

    def to_csv(self):
        return rows_to_csv(self.CSV_HEADER, self.csv_rows())


def rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def merge(reports, name=None):
    """Concatenate pointwise reports of the same check (order-independent min)."""
    reports = list(reports)
    first = reports[0]
    keys = list(first.rhs_terms)
    return InequalityReport(
        name=name or first.name,
        lhs=np.concatenate([r.lhs for r in reports]),
        rhs_terms={k: np.concatenate([r.rhs_terms[k] for r in reports]) for k in keys},
        divergence=np.concatenate([r.divergence for r in reports]),
        location=np.concatenate([np.asarray(r.location) for r in reports]),
        params=first.params, kind=first.kind)
