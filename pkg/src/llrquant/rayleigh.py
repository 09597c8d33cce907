"""
Closed-form Rayleigh averages of Gaussian probabilities.

Every cell probability of a quantized min-distance LLR under Rayleigh block
fading is a sum of terms ``E[Phi(alpha / H + beta H); h1 <= H < h2]`` with
``H`` Rayleigh distributed (density ``2 h exp(-h^2)``). Integrating by parts
leaves integrals of ``exp(-a / h^2 - b h^2)`` and ``exp(-a / h^2 - b h^2) / h^2``,
whose antiderivatives are combinations of ``erf(sqrt(b) h +- sqrt(a) / h)``.
The exponentially large prefactors are absorbed with ``erfcx``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, erfcx, ndtr

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_PI = math.sqrt(math.pi)


def _log_ep(alpha, beta, h):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        arg = alpha / h + beta * h
        out = -0.5 * arg * arg - h * h
    return np.where(np.isfinite(out), out, -np.inf)


def _ep(alpha, beta, h):
    return np.exp(_log_ep(alpha, beta, h))


def _xy(alpha, beta, h):
    sa = np.abs(alpha) / math.sqrt(2.0)
    sb = np.sqrt(1.0 + 0.5 * beta * beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(h > 0, sa / h, np.inf)
        sbh = np.where(np.isfinite(h), sb * h, np.inf)
        x = sbh + inv
        y = np.where(np.isfinite(h), sbh - inv, np.inf)
        y = np.where(h > 0, y, -np.inf)
    return x, y


def _erfcx_ep(x, alpha, beta, h):
    """``erfcx(x) * Ep(h)`` with the 0 * inf limits resolved to 0."""
    e = _ep(alpha, beta, h)
    with np.errstate(invalid="ignore"):
        v = erfcx(x) * e
    return np.where(e == 0, 0.0, v)


def expect_phi(alpha, beta, h1, h2):
    """``E[Phi(alpha/H + beta H) 1{h1 <= H < h2}]`` for Rayleigh ``H`` with ``E[H^2] = 1``.

    All arguments broadcast; ``h1`` may be 0 and ``h2`` may be ``inf``.
    Empty intervals (``h2 <= h1``) give 0.
    """
    alpha, beta, h1, h2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (alpha, beta, h1, h2)))
    out = np.zeros(alpha.shape)
    live = h2 > h1
    if not live.any():
        return out
    a, b, lo, hi = alpha[live], beta[live], h1[live], h2[live]

    def boundary(h):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            arg = np.where(h > 0, a / h + b * h, np.where(a == 0, 0.0, np.sign(a) * np.inf))
        return np.where(np.isfinite(h), np.exp(-h * h) * ndtr(np.where(np.isfinite(h), arg, 0.0)), 0.0)

    res = boundary(lo) - boundary(hi)

    zero = a == 0
    # alpha == 0: remaining integral is beta / sqrt(2 pi) * int exp(-b h^2) dh
    if zero.any():
        bz = b[zero]
        sb = np.sqrt(1.0 + 0.5 * bz * bz)
        e_hi = np.where(np.isfinite(hi[zero]), erf(sb * np.where(np.isfinite(hi[zero]), hi[zero], 0.0)), 1.0)
        e_lo = erf(sb * lo[zero])
        res[zero] += bz / _SQRT_2PI * (_SQRT_PI / (2.0 * sb)) * (e_hi - e_lo)

    nz = ~zero
    if nz.any():
        an, bn, l, u = a[nz], b[nz], lo[nz], hi[nz]
        sa = np.abs(an) / math.sqrt(2.0)
        sb = np.sqrt(1.0 + 0.5 * bn * bn)
        c0 = _SQRT_PI / (4.0 * sb)
        c2 = _SQRT_PI / (4.0 * sa)
        xl, yl = _xy(an, bn, l)
        xu, yu = _xy(an, bn, u)
        # exp(-alpha beta) * [exp(2 sqrt(ab)) erf(X)]_l^u
        t_plus = _erfcx_ep(xl, an, bn, l) - _erfcx_ep(xu, an, bn, u)
        # exp(-alpha beta) * [exp(-2 sqrt(ab)) erf(Y)]_l^u
        pos = yl >= 0
        neg = yu <= 0
        mid = ~(pos | neg)
        t_minus = np.empty_like(t_plus)
        t_minus[pos] = _erfcx_ep(yl[pos], an[pos], bn[pos], l[pos]) - _erfcx_ep(yu[pos], an[pos], bn[pos], u[pos])
        t_minus[neg] = _erfcx_ep(-yu[neg], an[neg], bn[neg], u[neg]) - _erfcx_ep(-yl[neg], an[neg], bn[neg], l[neg])
        if mid.any():
            pref = np.exp(-an[mid] * bn[mid] - 2.0 * sa[mid] * sb[mid])
            t_minus[mid] = pref * (erf(yu[mid]) - erf(yl[mid]))
        res[nz] += ((bn * c0 + an * c2) * t_plus + (bn * c0 - an * c2) * t_minus) / _SQRT_2PI

    out[live] = res
    return out


def _edge_phi_mass(c, h1, h2):
    """``E[Phi(c H); h1 <= H < h2]`` with ``c`` possibly infinite."""
    c = np.asarray(c, dtype=float)
    finite = np.isfinite(c)
    prob = _rayleigh_prob(h1, h2)
    fin = expect_phi(0.0, np.where(finite, c, 0.0), h1, h2)
    return np.where(finite, fin, np.where(c > 0, prob, 0.0))


def _rayleigh_prob(h1, h2):
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    e1 = np.exp(-h1 * h1)
    e2 = np.where(np.isfinite(h2), np.exp(-np.where(np.isfinite(h2), h2, 0.0) ** 2), 0.0)
    return np.where(h2 > h1, e1 - e2, 0.0)


def _region_bound(tau, G):
    """Boundary ``c`` of ``{h > 0 : tau / h^2 >= G}`` for one sign of ``tau``.

    For ``tau >= 0`` the set is ``[0, c)``; for ``tau < 0`` it is ``[c, inf)``.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = tau / G
        root = np.sqrt(np.where(ratio > 0, ratio, 0.0))
    pos = tau >= 0
    c_pos = np.where(G <= 0, np.inf, np.where(tau > 0, root, 0.0))
    c_neg = np.where(G < 0, root, np.inf)
    return np.where(pos, c_pos, c_neg)


def rayleigh_lower_tail(pll, t, sigma2: float) -> np.ndarray:
    """``P(lambda < t | b)`` under Rayleigh fading for each value in ``t``.

    ``pll`` is a :class:`PiecewiseLinearLlr`. Returns shape ``(len(t), 2)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = math.sqrt(sigma2 / 2.0)
    A, B = pll.slope, pll.intercept
    e_lo, e_hi = pll.edges[:-1], pll.edges[1:]
    with np.errstate(invalid="ignore"):
        g_lo = np.where(np.isfinite(e_lo), A * e_lo + B, -np.sign(A) * np.inf)
        g_hi = np.where(np.isfinite(e_hi), A * e_hi + B, np.sign(A) * np.inf)
    g_max, g_min = np.maximum(g_lo, g_hi), np.minimum(g_lo, g_hi)

    tau = (t * sigma2)[:, None, None]
    x = pll.levels[None, :, None]
    A3, B3 = A[None, None, :], B[None, None, :]
    gmax3, gmin3 = g_max[None, None, :], g_min[None, None, :]
    c_max = _region_bound(tau, gmax3)
    c_min = _region_bound(tau, gmin3)
    pos = tau >= 0
    # full region: g(z) < r on the whole segment
    f1 = np.where(pos, 0.0, c_max)
    f2 = np.where(pos, c_max, np.inf)
    # partial region: the crossing lies inside the segment
    p1 = np.where(pos, c_max, c_min)
    p2 = np.where(pos, c_min, c_max)

    with np.errstate(invalid="ignore"):
        c_up = (e_hi[None, None, :] - x) / s
        c_dn = (e_lo[None, None, :] - x) / s
    full = _edge_phi_mass(c_up, f1, f2) - _edge_phi_mass(c_dn, f1, f2)

    alpha = tau / (A3 * s)
    beta = -(B3 / A3 + x) / s
    cross = expect_phi(alpha, beta, p1, p2)
    partial = np.where(A3 > 0, cross - _edge_phi_mass(c_dn, p1, p2),
                       _edge_phi_mass(c_up, p1, p2) - cross)

    per_level = (full + partial).sum(axis=2)
    out = np.empty((len(t), 2))
    for b in (0, 1):
        sel = pll.bits == b
        out[:, b] = per_level[:, sel].mean(axis=1)
    return out


def _negated(pll):
    from .constellation import PiecewiseLinearLlr

    return PiecewiseLinearLlr(pll.k, pll.edges, -pll.slope, -pll.intercept, pll.near0,
                              pll.near1, pll.levels, 1 - pll.bits)


CHUNK = 128


def _chunked(pll, t, sigma2):
    return np.concatenate([rayleigh_lower_tail(pll, t[i:i + CHUNK], sigma2)
                           for i in range(0, len(t), CHUNK)])


def rayleigh_cell_pmf(pll, thresholds, sigma2: float) -> np.ndarray:
    """Exact ``p(v | b)`` of the quantized LLR averaged over Rayleigh fading.

    Cells on the positive side are computed from upper tails so that small
    probabilities in either tail keep full relative precision.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    L = len(thresholds) + 1
    if L == 1:
        return np.ones((1, 2))
    neg = thresholds <= 0
    lower = np.zeros((len(thresholds), 2))
    upper = np.zeros((len(thresholds), 2))
    if neg.any():
        lower[neg] = _chunked(pll, thresholds[neg], sigma2)
    if (~neg).any():
        # P(lambda >= t | b) = P(-lambda <= -t | b); the negated LLR swaps bit labels
        upper[~neg] = _chunked(_negated(pll), -thresholds[~neg], sigma2)[:, ::-1]
    out = np.empty((L, 2))
    for l in range(L):
        lo_t = thresholds[l - 1] if l > 0 else -np.inf
        hi_t = thresholds[l] if l < L - 1 else np.inf
        if hi_t <= 0:
            out[l] = lower[l] - (lower[l - 1] if l > 0 else 0.0)
        elif lo_t > 0:
            out[l] = upper[l - 1] - (upper[l] if l < L - 1 else 0.0)
        else:
            below = lower[l - 1] if l > 0 else 0.0
            above = upper[l] if l < L - 1 else 0.0
            out[l] = 1.0 - below - above
    return np.clip(out, 0.0, None)
