"""Truncated Taylor jets (order <= 3) evaluated on batches of points.

A :class:`Jet` stores the value and the first ``order`` derivative tensors of
a scalar field at ``P`` points in ``R^N``.  Arithmetic follows the Leibniz and
Faa di Bruno rules, so every composite expression built from exact input jets
carries exact derivatives (up to round-off).  ``Jet.d(i)`` differentiates a
jet, lowering its order by one; this is how divergence expressions are
evaluated without any finite differencing.
"""

from __future__ import annotations

import numpy as np

MAX_ORDER = 3


def _sym3(h, g):
    # (h (x) g) symmetrised over the three index slots: h_ij g_k + h_ik g_j + h_jk g_i
    return (h[:, :, :, None] * g[:, None, None, :]
            + h[:, :, None, :] * g[:, None, :, None]
            + h[:, None, :, :] * g[:, :, None, None])


class Jet:
    __slots__ = ("v", "g", "h", "t", "order")

    def __init__(self, v, g=None, h=None, t=None):
        self.v = np.asarray(v, dtype=float)
        self.g, self.h, self.t = g, h, t
        if g is None:
            self.order = 0
        elif h is None:
            self.order = 1
        elif t is None:
            self.order = 2
        else:
            self.order = 3

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, c, npts, ndim, order):
        v = np.full(npts, float(c))
        parts = [np.zeros((npts,) + (ndim,) * k) for k in range(1, order + 1)]
        return cls(v, *parts)

    @property
    def npts(self):
        return self.v.shape[0]

    @property
    def ndim(self):
        return self.g.shape[1] if self.g is not None else None

    def parts(self):
        return [p for p in (self.v, self.g, self.h, self.t)[: self.order + 1]]

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(*self.parts()[: order + 1])

    def d(self, i):
        """Partial derivative along axis ``i`` as a jet of one order less."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        v = self.g[:, i]
        g = self.h[:, i, :] if self.order >= 2 else None
        h = self.t[:, i, :, :] if self.order >= 3 else None
        return Jet(v, g, h)

    # -- arithmetic ---------------------------------------------------------
    def _scaled(self, c):
        c = np.asarray(c, dtype=float)
        if c.ndim == 0:
            return Jet(*[p * c for p in self.parts()])
        # per-point factor
        return Jet(*[p * c.reshape(c.shape + (1,) * (p.ndim - 1)) for p in self.parts()])

    def __neg__(self):
        return self._scaled(-1.0)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, *self.parts()[1:])
        k = min(self.order, other.order)
        return Jet(*[a + b for a, b in zip(self.parts()[: k + 1], other.parts()[: k + 1])])

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self._scaled(other)
        a, b = self, other
        k = min(a.order, b.order)
        av, bv = a.v, b.v
        v = av * bv
        if k == 0:
            return Jet(v)
        g = a.g * bv[:, None] + av[:, None] * b.g
        if k == 1:
            return Jet(v, g)
        gg = a.g[:, :, None] * b.g[:, None, :]
        h = a.h * bv[:, None, None] + av[:, None, None] * b.h + gg + np.swapaxes(gg, 1, 2)
        if k == 2:
            return Jet(v, g, h)
        t = (a.t * bv[:, None, None, None] + av[:, None, None, None] * b.t
             + _sym3(a.h, b.g) + _sym3(b.h, a.g))
        return Jet(v, g, h, t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self._scaled(1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) and 0 <= p <= 4:
            out = None
            for _ in range(p):
                out = self if out is None else out * self
            if out is None:
                return Jet.constant(1.0, self.npts, self.ndim or 1, self.order)
            return out
        return self.power(float(p))

    # -- composition with univariate functions ------------------------------
    def compose(self, derivs):
        """Apply F to this jet given ``derivs = [F, F', F'', F''']`` at ``self.v``."""
        k = self.order
        v = derivs[0]
        if k == 0:
            return Jet(v)
        f1 = derivs[1]
        g = f1[:, None] * self.g
        if k == 1:
            return Jet(v, g)
        f2 = derivs[2]
        gg = self.g[:, :, None] * self.g[:, None, :]
        h = f2[:, None, None] * gg + f1[:, None, None] * self.h
        if k == 2:
            return Jet(v, g, h)
        f3 = derivs[3]
        ggg = gg[:, :, :, None] * self.g[:, None, None, :]
        t = (f3[:, None, None, None] * ggg + f2[:, None, None, None] * _sym3(self.h, self.g)
             + f1[:, None, None, None] * self.t)
        return Jet(v, g, h, t)

    def power(self, p):
        u = self.v
        if np.any(u <= 0) and not float(p).is_integer():
            raise ValueError("non-integer power of a non-positive jet")
        c = [1.0, p, p * (p - 1), p * (p - 1) * (p - 2)]
        return self.compose([c[k] * u ** (p - k) for k in range(4)])

    def reciprocal(self):
        u = self.v
        if np.any(u == 0):
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        r = 1.0 / u
        return self.compose([r, -r ** 2, 2 * r ** 3, -6 * r ** 4])

    def exp(self, shift=None):
        """exp(self - shift); ``shift`` defaults to 0 and may be a per-point array."""
        e = np.exp(self.v if shift is None else self.v - shift)
        return self.compose([e, e, e, e])

    def log(self):
        u = self.v
        return self.compose([np.log(u), 1 / u, -1 / u ** 2, 2 / u ** 3])

    def sqrt(self):
        return self.power(0.5)

    def sin(self):
        s, c = np.sin(self.v), np.cos(self.v)
        return self.compose([s, c, -s, -c])

    def cos(self):
        s, c = np.sin(self.v), np.cos(self.v)
        return self.compose([c, -s, -c, s])


def coordinates(points, order=2):
    """Jets of the coordinate functions ``z_k`` at ``points`` (shape (P, N))."""
    if order > MAX_ORDER:
        raise ValueError(f"order must be <= {MAX_ORDER}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    npts, ndim = pts.shape
    eye = np.eye(ndim)
    out = []
    for k in range(ndim):
        parts = [pts[:, k].copy()]
        if order >= 1:
            parts.append(np.broadcast_to(eye[k], (npts, ndim)).copy())
        for q in range(2, order + 1):
            parts.append(np.zeros((npts,) + (ndim,) * q))
        out.append(Jet(*parts))
    return out


def vsum(jets):
    out = None
    for j in jets:
        out = j if out is None else out + j
    return out

