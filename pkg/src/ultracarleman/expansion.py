"""The fourteen-term expansion of 4 lam nu A C behind Lemma 2.

With ``theta = chi * phi`` one has ``(L0 phi) chi = A + 2 lam nu psi^(-nu-1) C``
where

* ``A = c1^-1 th_x1x1 + c1 (Lap' th - sum a_ij th_yiyj) + th K``,
* ``C = delta c1^-1 th_x1 + c1 (grad' psi . grad' th - sum a_ij psi_yi th_yj)``,

``c1 = x1 + eta0`` and ``K = c1^-1 delta^2 phi1 + c1 (phi2 - phi3)``.  Hence
``psi^(nu+1) (L0 phi)^2 chi^2 >= 4 lam nu A C = T1 + ... + T14``.  Each
``T_k`` splits into a divergence ``d_k`` and a remainder ``R_k``; the
remainders are given here in closed form, and five of them are bounded below
by the explicit estimates ``B_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import vsum

EXACT = (1, 2, 4, 5, 6, 7, 8, 10, 14)
BOUNDED = (3, 9, 11, 12, 13)


def _ctx(fc):
    g, p = fc.geo, fc.p
    return g, p, fc.lam * p.nu, p.delta


# ---------------------------------------------------------------------------
# T_k


def t_terms(fc):
    """Values of T_1..T_14 (per chi(p)^2)."""
    g, p, ln, dl = _ctx(fc)
    T = fc.Th
    th, tg, H = T.v, T.g, T.h
    c = g.c1.v
    m, xs, ys = g.m, g.xs, g.ys
    gp = [q.v for q in g.gpsi]
    a = [[g.a(i, j).v for j in range(m)] for i in range(m)]
    aux = fc.aux
    lap_x = sum(H[:, k, k] for k in xs) if xs else 0.0
    a_yy = sum(a[i][j] * H[:, ys[i], ys[j]] for i in range(m) for j in range(m))
    psi_th_x = sum(gp[k] * tg[:, k] for k in xs) if xs else 0.0
    a_psi_th = sum(a[i][j] * gp[ys[i]] * tg[:, ys[j]] for i in range(m) for j in range(m))
    K = aux.K.v
    f = 4 * ln
    return {
        1: f * dl * c ** -2 * tg[:, 0] * H[:, 0, 0],
        2: f * dl * tg[:, 0] * lap_x,
        3: -f * dl * tg[:, 0] * a_yy,
        4: f * dl ** 3 * c ** -2 * th * tg[:, 0] * aux.phi1.v,
        5: f * dl * tg[:, 0] * th * aux.phi2.v,
        6: -f * dl * tg[:, 0] * th * aux.phi3.v,
        7: f * psi_th_x * H[:, 0, 0],
        8: f * c ** 2 * psi_th_x * lap_x,
        9: -f * c ** 2 * psi_th_x * a_yy,
        10: f * psi_th_x * th * c * K,
        11: -f * a_psi_th * H[:, 0, 0],
        12: -f * c ** 2 * a_psi_th * lap_x,
        13: f * c ** 2 * a_psi_th * a_yy,
        14: -f * c * a_psi_th * th * K,
    }


def ac_product(fc):
    """4 lam nu A C computed directly from A and C."""
    g, p, ln, dl = _ctx(fc)
    T = fc.Th
    tg, H = T.g, T.h
    c = g.c1.v
    m, xs, ys = g.m, g.xs, g.ys
    gp = [q.v for q in g.gpsi]
    a = [[g.a(i, j).v for j in range(m)] for i in range(m)]
    lap_x = sum(H[:, k, k] for k in xs) if xs else 0.0
    a_yy = sum(a[i][j] * H[:, ys[i], ys[j]] for i in range(m) for j in range(m))
    A = H[:, 0, 0] / c + c * (lap_x - a_yy) + T.v * fc.aux.K.v
    psi_th_x = sum(gp[k] * tg[:, k] for k in xs) if xs else 0.0
    a_psi_th = sum(a[i][j] * gp[ys[i]] * tg[:, ys[j]] for i in range(m) for j in range(m))
    C = dl * tg[:, 0] / c + c * (psi_th_x - a_psi_th)
    return A, C, 4 * ln * A * C


# ---------------------------------------------------------------------------
# d_k (exact divergences evaluated through jets)


def d_terms(fc):
    g, p, ln, dl = _ctx(fc)
    T = fc.Th
    m, xs, ys = g.m, g.xs, g.ys
    c1 = g.c1
    c2 = c1 * c1
    gp = g.gpsi
    a = g.a
    aux = fc.aux
    t = [T.d(k) for k in range(g.N)]
    T2 = T * T
    out = {}
    out[1] = 2 * ln * dl * (c1.power(-2) * t[0] * t[0]).d(0).v
    out[2] = 4 * ln * dl * _sum([(t[0] * t[i]).d(i).v - 0.5 * (t[i] * t[i]).d(0).v
                                  for i in xs])
    out[3] = -2 * ln * dl * _sum([2 * (a(i, j) * t[ys[i]] * t[0]).d(ys[j]).v
                                  - (a(i, j) * t[ys[i]] * t[ys[j]]).d(0).v
                                  for i in range(m) for j in range(m)])
    out[4] = 2 * ln * dl ** 3 * (c1.power(-2) * T2 * aux.phi1).d(0).v
    out[5] = 2 * ln * dl * (T2 * aux.phi2).d(0).v
    out[6] = -2 * ln * dl * (T2 * aux.phi3).d(0).v
    out[7] = 4 * ln * _sum([(gp[i] * t[i] * t[0]).d(0).v - 0.5 * (gp[i] * t[0] * t[0]).d(i).v
                            for i in xs])
    out[8] = 2 * ln * _sum([2 * (gp[i] * t[i] * t[j] * c2).d(j).v
                            - c2.v * (gp[i] * t[j] * t[j]).d(i).v
                            for i in xs for j in xs])
    out[9] = -2 * ln * c2.v * _sum([2 * (gp[i] * a(k, s) * t[i] * t[ys[k]]).d(ys[s]).v
                                    - (gp[i] * a(k, s) * t[ys[k]] * t[ys[s]]).d(i).v
                                    for i in xs for k in range(m) for s in range(m)])
    out[10] = 2 * ln * _sum([(T2 * gp[i] * aux.G).d(i).v for i in xs])
    out[11] = -4 * ln * _sum([(a(i, j) * gp[ys[i]] * t[ys[j]] * t[0]).d(0).v
                              - 0.5 * (a(i, j) * gp[ys[i]] * t[0] * t[0]).d(ys[j]).v
                              for i in range(m) for j in range(m)])
    out[12] = -4 * ln * _sum([(c2 * a(i, j) * gp[ys[i]] * t[ys[j]] * t[s]).d(s).v
                              - 0.5 * (c2 * a(i, j) * gp[ys[i]] * t[s] * t[s]).d(ys[j]).v
                              for i in range(m) for j in range(m) for s in xs])
    out[13] = 2 * ln * c2.v * _sum(
        [2 * (a(i, j) * gp[ys[i]] * t[ys[j]] * t[ys[k]] * a(k, s)).d(ys[s]).v
         - (a(i, j) * a(k, s) * gp[ys[i]] * t[ys[k]] * t[ys[s]]).d(ys[j]).v
         for i in range(m) for j in range(m) for k in range(m) for s in range(m)])
    out[14] = -2 * ln * _sum([(a(i, j) * gp[ys[i]] * T2 * aux.G).d(ys[j]).v
                              for i in range(m) for j in range(m)])
    return out


def _sum(items):
    items = list(items)
    if not items:
        return 0.0
    return sum(items[1:], items[0])


def divergence_D1(fc):
    """D1(theta) = sum of d_k as an order-0 jet (value array wrapped)."""
    from .jets import Jet

    return Jet(sum(d_terms(fc).values()))


# ---------------------------------------------------------------------------
# closed-form remainders R_k = T_k - d_k


def _theta2_coefficients(g, aux, lam, nu, dl):
    """R_k / theta^2 for the terms that are pure theta^2 multiples (k = 4,5,6,10,14)."""
    ln = lam * nu
    c = g.c1.v
    m, n, xs, ys = g.m, g.n, g.xs, g.ys
    gx2 = g.grad_xp_sq
    gx2 = gx2.v if not isinstance(gx2, float) else np.zeros_like(c)
    pv = lambda e: g.pw(e).v  # noqa: E731
    q = {}
    q[4] = (4 * ln * dl ** 3 * c ** -3 * aux.phi1.v
            + 4 * ln * dl ** 4 * (nu + 1) * c ** -2 * aux.phi4.v)
    q[5] = 4 * ln * dl ** 2 * (nu + 1) * (aux.phi4.v * gx2
                                          + 0.5 * (n - 1) * ln * pv(-nu - 2))
    q[6] = 2 * ln * dl * aux.phi3.d(0).v
    q[10] = -2 * ln * _sum([(g.gpsi[i] * aux.G).d(i).v for i in xs])
    q[14] = 2 * ln * _sum([(g.a(i, j) * g.gpsi[ys[i]] * aux.G).d(ys[j]).v
                           for i in range(m) for j in range(m)])
    return q


def r_terms(fc):
    g, p, ln, dl = _ctx(fc)
    T = fc.Th
    th, tg = T.v, T.g
    c = g.c1.v
    m, n, xs, ys = g.m, g.n, g.xs, g.ys
    gp = [q.v for q in g.gpsi]
    a = lambda i, j: g.a(i, j)  # noqa: E731
    gxt = sum(tg[:, k] ** 2 for k in xs) if xs else 0.0
    q = _theta2_coefficients(g, fc.aux, fc.lam, p.nu, dl)
    t2 = th ** 2
    R = {k: q[k] * t2 for k in q}
    R[1] = 4 * ln * dl * c ** -3 * tg[:, 0] ** 2
    R[2] = np.zeros_like(th)
    R[3] = -2 * ln * dl * _sum([-2 * a(i, j).g[:, ys[j]] * tg[:, ys[i]] * tg[:, 0]
                                + a(i, j).g[:, 0] * tg[:, ys[i]] * tg[:, ys[j]]
                                for i in range(m) for j in range(m)])
    R[7] = 2 * ln * (n - 1) * tg[:, 0] ** 2
    R[8] = -2 * ln * c ** 2 * (2 - (n - 1)) * gxt
    R[9] = 2 * ln * c ** 2 * _sum(
        [2 * gp[i] * a(k, s).g[:, ys[s]] * tg[:, ys[k]] * tg[:, i]
         - (a(k, s).v + gp[i] * a(k, s).g[:, i]) * tg[:, ys[k]] * tg[:, ys[s]]
         for i in xs for k in range(m) for s in range(m)])
    R[11] = (4 * ln * _sum([a(i, j).g[:, 0] * gp[ys[i]] * tg[:, ys[j]] * tg[:, 0]
                            for i in range(m) for j in range(m)])
             - 2 * ln * _sum([(a(i, j).g[:, ys[j]] * gp[ys[i]] + (a(i, j).v if i == j else 0.0))
                              * tg[:, 0] ** 2 for i in range(m) for j in range(m)]))
    R[12] = (4 * ln * c ** 2 * _sum([a(i, j).g[:, s] * gp[ys[i]] * tg[:, ys[j]] * tg[:, s]
                                     for i in range(m) for j in range(m) for s in xs])
             - 2 * ln * c ** 2 * _sum([(a(i, j).g[:, ys[j]] * gp[ys[i]]
                                        + (a(i, j).v if i == j else 0.0)) * tg[:, s] ** 2
                                       for i in range(m) for j in range(m) for s in xs]))
    r13 = 0.0
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for s in range(m):
                    aap = g.a(i, j) * g.a(k, s) * g.gpsi[ys[i]]
                    r13 = r13 + (2 * aap.g[:, ys[s]] * tg[:, ys[j]] * tg[:, ys[k]]
                                 - aap.g[:, ys[j]] * tg[:, ys[k]] * tg[:, ys[s]])
    R[13] = -2 * ln * c ** 2 * r13
    return R


# ---------------------------------------------------------------------------
# lower bounds for the five inequality terms


def b_bounds(fc):
    g, p, ln, dl = _ctx(fc)
    T = fc.Th
    tg = T.g
    c = g.c1.v
    m, n, xs, ys = g.m, g.n, g.xs, g.ys
    M, a1, e0 = p.M, p.alpha1, p.eps0
    r = np.sqrt(2 * p.gamma)
    gy = sum(tg[:, k] ** 2 for k in ys)
    gx = sum(tg[:, k] ** 2 for k in xs) if xs else 0.0
    t1 = tg[:, 0] ** 2
    return {
        3: 2 * ln * dl * (a1 - m * c * e0) * gy - 2 * ln * dl * m ** 2 * M ** 2 / (e0 * c) * t1,
        9: -2 * ln * c ** 2 * M * (1 + r) * (2 * m * n * gy + m ** 2 * gx),
        11: (-2 * ln * c * r * m * gy - 2 * ln * M / c * m ** 2 * t1
             - 2 * ln * M * r * m ** 2 * t1 - 2 * ln * M * m * t1),
        12: (-2 * ln * c ** 2 * M * r * (m ** 2 * gx + (n - 1) * m * gy)
             - 2 * ln * c ** 2 * M * m * (r * m + 1) * gx),
        13: -6 * ln * c ** 2 * M ** 2 * (2 * r + 1) * m ** 3 * gy,
    }


@dataclass
class ExpansionReport:
    T: dict
    d: dict
    R: dict
    B: dict
    ac: np.ndarray

    def identity_residual(self, k):
        """|T_k - d_k - R_k| / max(|T_k|, |d_k|, |R_k|) per point."""
        res = self.T[k] - self.d[k] - self.R[k]
        scale = np.maximum.reduce([np.abs(self.T[k]), np.abs(self.d[k]), np.abs(self.R[k])])
        return np.where(scale > 0, np.abs(res) / np.where(scale > 0, scale, 1.0), 0.0)

    def sum_residual(self):
        """Relative gap between sum(T_k) and 4 lam nu A C."""
        tot = sum(self.T.values())
        scale = np.max(np.abs(np.stack(list(self.T.values()))), axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return np.abs(tot - self.ac) / scale

    def bound_margin(self, k):
        """R_k - B_k (>= 0 when the bound holds) and its scale."""
        margin = self.R[k] - self.B[k]
        scale = np.maximum(np.abs(self.R[k]), np.abs(self.B[k]))
        return margin, scale


def expand_T_terms(fc) -> ExpansionReport:
    _, _, ac = ac_product(fc)
    return ExpansionReport(t_terms(fc), d_terms(fc), r_terms(fc), b_bounds(fc), ac)


# ---------------------------------------------------------------------------
# beta_3, beta_4 from the exact theta^2 coefficient


def beta34(geo):
    """(beta3, beta4, beta31) with sum_k R_k / theta^2 = (lam nu)^3 beta3 + (lam nu)^2 beta4.

    The pure theta^2 part of the remainders is a polynomial in lambda with
    only cubic and quadratic terms, so two evaluations recover both
    coefficients exactly (up to round-off).
    """
    from .carleman import aux_functions

    p = geo.p
    nu, dl = p.nu, p.delta

    def G(lam):
        q = _theta2_coefficients(geo, aux_functions(geo, lam), lam, nu, dl)
        return sum(q.values()) / (lam * nu) ** 2

    g1, g2 = G(1.0), G(2.0)
    b3 = (g2 - g1) / nu
    b4 = 2 * g1 - g2
    c = geo.c1.v
    gx2 = geo.grad_xp_sq
    gx2 = gx2.v if not isinstance(gx2, float) else np.zeros_like(c)
    pv = lambda e: geo.pw(e).v  # noqa: E731
    lead = (4 * dl ** 3 * c ** -3 * pv(-2 * nu - 2)
            + 4 * dl ** 4 * (nu + 1) * c ** -2 * pv(-2 * nu - 3)
            + 4 * dl ** 2 * (nu + 1) * pv(-2 * nu - 3) * gx2)
    return b3, b4, b3 - lead
