"""
Exact PMFs of quantized min-distance LLR indices.

For a fixed channel gain the LLR is a piecewise-linear function of the
received axis coordinate, so each quantization cell pulls back to a finite
union of intervals on that axis. The conditional PMF is then a sum of Gaussian
interval masses, one per transmitted PAM level. Rayleigh averages are exact
(see :mod:`llrquant.rayleigh`); Gauss-Legendre quadrature over the gain is kept
as an independent check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .constellation import PiecewiseLinearLlr
from .errors import ConfigError, QuadratureNotConverged
from .quantizer import PerBitQuantizer
from .rayleigh import rayleigh_cell_pmf

FORMAT_VERSION = 1
TINY = 1e-300

AWGN = "awgn"
RAYLEIGH = "rayleigh"


@dataclass(frozen=True)
class ChannelModel:
    """Memoryless channel seen by one QAM symbol.

    ``cn_db`` is ``10 log10(E[|h s|^2] / sigma2)`` with unit-energy symbols and
    ``E[h^2] = 1``.
    """

    kind: str
    cn_db: float

    def __post_init__(self):
        if self.kind not in (AWGN, RAYLEIGH):
            raise ConfigError(f"unknown channel kind {self.kind!r}")

    @property
    def sigma2(self) -> float:
        return 10.0 ** (-self.cn_db / 10.0)

    def at(self, cn_db: float) -> "ChannelModel":
        return ChannelModel(self.kind, cn_db)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cn_db": self.cn_db}


@dataclass(frozen=True)
class LlrPmfTable:
    """Conditional and marginal PMFs of the quantized LLR index of one bit.

    ``p_cond[v - 1, b] = p(V = v | B = b)`` and ``p_marg = p_cond.mean(axis=1)``.
    """

    k: int
    w: int
    q: float
    p_cond: np.ndarray
    channel: ChannelModel | None = None

    @property
    def p_marg(self) -> np.ndarray:
        return 0.5 * (self.p_cond[:, 0] + self.p_cond[:, 1])

    @property
    def L(self) -> int:
        return self.p_cond.shape[0]

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "k": self.k,
            "w": self.w,
            "q": None if not np.isfinite(self.q) else self.q,
            "channel": None if self.channel is None else self.channel.to_dict(),
            "p_cond": self.p_cond.tolist(),
            "p_marg": self.p_marg.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LlrPmfTable":
        if d.get("version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported PMF table version {d.get('version')}")
        ch = d.get("channel")
        return cls(
            k=d["k"],
            w=d["w"],
            q=math.nan if d["q"] is None else d["q"],
            p_cond=np.asarray(d["p_cond"], dtype=float),
            channel=None if ch is None else ChannelModel(ch["kind"], ch["cn_db"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "LlrPmfTable":
        return cls.from_dict(json.loads(s))


def gaussian_mass(lo, hi):
    """P(lo <= X < hi) for standard normal X, accurate in both tails."""
    upper = lo > 0
    return np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


def _pullback(pll: PiecewiseLinearLlr, t: np.ndarray):
    """Elementary z-intervals and their cell indices (0-based) for thresholds ``t``.

    ``t`` are quantizer thresholds in normalized LLR units.
    """
    pieces = [pll.edges[1:-1]] + pll.preimages(t)
    bp = np.unique(np.concatenate(pieces))
    if len(bp) == 0:
        return np.array([-np.inf, np.inf]), np.zeros(1, dtype=np.int64)
    z = np.concatenate([[-np.inf], bp, [np.inf]])
    reps = np.empty(len(z) - 1)
    reps[1:-1] = 0.5 * (bp[1:] + bp[:-1])
    reps[0], reps[-1] = bp[0] - 1.0, bp[-1] + 1.0
    cells = np.searchsorted(t, pll.g(reps), side="right")
    return z, cells


def cell_pmf(pll: PiecewiseLinearLlr, thresholds, h: float, sigma2: float) -> np.ndarray:
    """``p(v | b)`` for arbitrary sorted finite LLR thresholds at fixed gain.

    Returns an array of shape ``(len(thresholds) + 1, 2)``.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    t = thresholds * sigma2 / (h * h)
    z, cells = _pullback(pll, t)
    sigma_z = math.sqrt(sigma2 / 2.0) / h
    x = pll.levels[:, None]
    mass = gaussian_mass((z[None, :-1] - x) / sigma_z, (z[None, 1:] - x) / sigma_z)
    L = len(thresholds) + 1
    out = np.empty((L, 2))
    for b in (0, 1):
        sel = pll.bits == b
        per_interval = mass[sel].sum(axis=0) / sel.sum()
        out[:, b] = np.bincount(cells, weights=per_interval, minlength=L)
    out[out < TINY] = 0.0
    return out


def pmf_awgn(quantizer: PerBitQuantizer, pll: PiecewiseLinearLlr, h: float, sigma2: float,
             channel: ChannelModel | None = None) -> LlrPmfTable:
    """Closed-form conditional PMF of the quantized LLR index at gain ``h``."""
    if h <= 0 or sigma2 <= 0:
        raise ValueError("h and sigma2 must be positive")
    p = cell_pmf(pll, quantizer.thresholds, h, sigma2)
    return LlrPmfTable(quantizer.k, quantizer.w, quantizer.q, p, channel)


# Rayleigh gain h with E[h^2] = 1 has density 2 h exp(-h^2); mass beyond
# H_MAX is exp(-H_MAX^2) < 1e-18.
H_MAX = 6.5
DEFAULT_PANELS = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, H_MAX])


def rayleigh_nodes(order: int, panels=DEFAULT_PANELS) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights for ``E[f(H)]``, H ~ Rayleigh(E[H^2]=1).

    ``order`` is the number of nodes per panel.
    """
    x, wt = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(panels[:-1], panels[1:]):
        h = 0.5 * (b - a) * x + 0.5 * (b + a)
        nodes.append(h)
        weights.append(0.5 * (b - a) * wt * 2.0 * h * np.exp(-h * h))
    return np.concatenate(nodes), np.concatenate(weights)


def fading_cell_pmf(pll: PiecewiseLinearLlr, thresholds, sigma2: float, order: int) -> np.ndarray:
    nodes, weights = rayleigh_nodes(order)
    acc = 0.0
    for h, wgt in zip(nodes, weights):
        acc = acc + wgt * cell_pmf(pll, thresholds, h, sigma2)
    # the quadrature weights integrate to 1 - exp(-H_MAX^2) up to rounding
    acc = acc / weights.sum()
    acc[acc < TINY] = 0.0
    return acc


DEFAULT_ORDER = 8
MAX_ORDER = 64
QUAD_TOL = 1e-8


def converged_fading_pmf(pll, thresholds, sigma2, order=DEFAULT_ORDER, max_order=MAX_ORDER,
                         tol=QUAD_TOL) -> tuple[np.ndarray, int]:
    """Fading PMF with the quadrature order doubled until cells move by less than ``tol``.

    Returns the PMF at the accepted order and that order.

    Raises:
        QuadratureNotConverged: if ``max_order`` is reached without convergence.
    """
    prev = fading_cell_pmf(pll, thresholds, sigma2, order)
    while order < max_order:
        nxt = fading_cell_pmf(pll, thresholds, sigma2, 2 * order)
        if np.max(np.abs(nxt - prev)) < tol:
            return prev, order
        prev, order = nxt, 2 * order
    raise QuadratureNotConverged(f"Rayleigh PMF not converged at order {max_order}")


def pmf_fading(quantizer: PerBitQuantizer, pll: PiecewiseLinearLlr, channel: ChannelModel,
               order: int | None = None, method: str = "exact") -> LlrPmfTable:
    """PMF averaged over Rayleigh block fading.

    ``method="exact"`` uses the closed-form average. ``method="quadrature"``
    integrates over the gain instead: with ``order=None`` the order is found by
    the doubling test, otherwise the given per-panel order is used as is.
    """
    if channel.kind != RAYLEIGH:
        raise ConfigError("pmf_fading needs a Rayleigh channel")
    if method == "exact":
        p = rayleigh_cell_pmf(pll, quantizer.thresholds, channel.sigma2)
        p[p < TINY] = 0.0
    elif method == "quadrature":
        if order is None:
            p, _ = converged_fading_pmf(pll, quantizer.thresholds, channel.sigma2)
        else:
            p = fading_cell_pmf(pll, quantizer.thresholds, channel.sigma2, order)
    else:
        raise ConfigError(f"unknown fading method {method!r}")
    return LlrPmfTable(quantizer.k, quantizer.w, quantizer.q, p, channel)


def channel_cell_pmf(pll: PiecewiseLinearLlr, thresholds, channel: ChannelModel) -> np.ndarray:
    """``p(v | b)`` for arbitrary thresholds on either channel."""
    if channel.kind == AWGN:
        return cell_pmf(pll, thresholds, 1.0, channel.sigma2)
    p = rayleigh_cell_pmf(pll, thresholds, channel.sigma2)
    p[p < TINY] = 0.0
    return p


def pmf_for_channel(quantizer, pll, channel: ChannelModel) -> LlrPmfTable:
    if channel.kind == AWGN:
        return pmf_awgn(quantizer, pll, 1.0, channel.sigma2, channel)
    return pmf_fading(quantizer, pll, channel)
