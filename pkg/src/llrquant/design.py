"""
GMI-driven design of per-bit uniform LLR quantizers.

Two step-selection objectives are available:

* ``"mi"``: maximize ``I(B_k; V_k)``, the BGMI obtained with log-likelihood-ratio
  reconstruction values.
* ``"uniform"`` (default): maximize the BGMI obtained when cell ``v`` is
  reconstructed at its uniform mid-cell value ``(v - L/2 - 1/2) q`` and the
  decoder scaling ``x`` is optimized per bit.

Both objectives share the same search grid and bit-allocation machinery.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .constellation import Constellation, build_qam, llr_piecewise
from .errors import ConfigError, InfeasibleBudget, TooLarge
from .llr_stats import FORMAT_VERSION, ChannelModel, LlrPmfTable, channel_cell_pmf
from .quantizer import PerBitQuantizer, reconstruction_levels, uniform_thresholds

log = logging.getLogger(__name__)

W_MAX = 8
OBJECTIVES = ("uniform", "mi")
DEFAULT_OBJECTIVE = "uniform"

# coarse-to-fine step search
Q_MIN, Q_MAX, N_COARSE = 1e-3, 64.0, 200
ZOOM_POINTS = 21
MIN_ZOOM_ROUNDS = 2
Q_RESOLUTION = 0.005
GRID_VERSION = 1

X_BOUNDS = (1e-3, 50.0)
CACHE_ENV = "LLRQUANT_CACHE"


def _xlogy_ratio(p, m):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = p * np.log2(p / m)
    return np.where(p > 0, t, 0.0)


def bgmi(p_cond) -> float:
    """``I(B; V)`` for equiprobable ``B`` from the conditional PMF ``p_cond[v, b]``."""
    if isinstance(p_cond, LlrPmfTable):
        p_cond = p_cond.p_cond
    p_cond = np.asarray(p_cond, dtype=float)
    m = 0.5 * (p_cond[:, 0] + p_cond[:, 1])
    val = 0.5 * (_xlogy_ratio(p_cond[:, 0], m).sum() + _xlogy_ratio(p_cond[:, 1], m).sum())
    return float(min(max(val, 0.0), 1.0))


def bgmi_generalized(p_cond, recon, x: float) -> float:
    """BGMI of a decoder using metric ``recon[v]`` scaled by ``x``.

    ``1 - 1/2 sum_v [p(v|0) log2(1 + e^{x r_v}) + p(v|1) log2(1 + e^{-x r_v})]``.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    if isinstance(p_cond, LlrPmfTable):
        p_cond = p_cond.p_cond
    p_cond = np.asarray(p_cond, dtype=float)
    r = np.asarray(recon, dtype=float) * x
    loss = p_cond[:, 0] * np.logaddexp(0.0, r) + p_cond[:, 1] * np.logaddexp(0.0, -r)
    return float(1.0 - 0.5 * loss.sum() / math.log(2.0))


def uniform_recon(w: int, q: float) -> np.ndarray:
    """Mid-cell reconstruction ``(v - L/2 - 1/2) q`` for ``v = 1..L``.

    For ``w = 1`` the hard decision uses ``-1/2, +1/2``.
    """
    L = 1 << w
    if w == 1 or not np.isfinite(q):
        q = 1.0
    return (np.arange(1, L + 1) - L / 2 - 0.5) * q


def best_scaling(p_cond, recon) -> tuple[float, float]:
    """Maximize :func:`bgmi_generalized` over ``x``; returns ``(value, x)``.

    The objective is concave in ``x``, so a bounded scalar search suffices.
    """
    res = minimize_scalar(lambda x: -bgmi_generalized(p_cond, recon, x), bounds=X_BOUNDS,
                          method="bounded", options={"xatol": 1e-8})
    return -float(res.fun), float(res.x)


def uniform_bgmi(p_cond, w: int, q: float) -> float:
    return best_scaling(p_cond, uniform_recon(w, q))[0]


def objective_value(p_cond, w: int, q: float, objective: str) -> float:
    if objective == "mi":
        return bgmi(p_cond)
    if objective == "uniform":
        return uniform_bgmi(p_cond, w, q)
    raise ConfigError(f"unknown design objective {objective!r}")


@dataclass(frozen=True)
class StepResult:
    """Outcome of the step search for one ``(k, w)``.

    ``value`` is the maximized objective, ``mi`` the mutual information at ``q``.
    """

    k: int
    w: int
    q: float
    value: float
    mi: float


def _search_grid(f, lo=Q_MIN, hi=Q_MAX):
    """Coarse log grid, then 10x zoom rounds around the incumbent.

    At least ``MIN_ZOOM_ROUNDS`` rounds run, and more while the local grid
    spacing exceeds ``Q_RESOLUTION``. Returns ``(q, f(q))``.
    """
    grid = np.geomspace(lo, hi, N_COARSE)
    vals = np.array([f(q) for q in grid])
    rounds = 0
    while True:
        i = int(np.argmax(vals))
        left, right = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        spacing = max(grid[i] - left, right - grid[i])
        if rounds >= MIN_ZOOM_ROUNDS and spacing <= Q_RESOLUTION:
            return float(grid[i]), float(vals[i])
        grid = np.linspace(left, right, ZOOM_POINTS)
        vals = np.array([f(q) for q in grid])
        rounds += 1


def optimize_step(k: int, w: int, channel: ChannelModel, const: Constellation,
                  objective: str = DEFAULT_OBJECTIVE) -> StepResult:
    """Best uniform step for bit ``k`` with ``w`` bits.

    ``w = 0`` stores nothing (value 0); ``w = 1`` is a hard decision whose
    step is unused and reported as NaN.
    """
    if w < 0:
        raise ConfigError("w must be non-negative")
    if objective not in OBJECTIVES:
        raise ConfigError(f"unknown design objective {objective!r}")
    if w == 0:
        return StepResult(k, 0, math.nan, 0.0, 0.0)
    pll = llr_piecewise(const, k)
    if w == 1:
        p = channel_cell_pmf(pll, np.zeros(1), channel)
        return StepResult(k, 1, math.nan, objective_value(p, 1, math.nan, objective), bgmi(p))

    def f(q):
        return objective_value(channel_cell_pmf(pll, uniform_thresholds(w, q), channel), w, q, objective)

    q, val = _search_grid(f)
    mi = bgmi(channel_cell_pmf(pll, uniform_thresholds(w, q), channel))
    return StepResult(k, w, q, val, mi)


@dataclass(frozen=True)
class DesignTable:
    """Optimal steps and objective values for every ``k`` and ``w = 0..w_max``.

    ``q[k-1, w]`` and ``value[k-1, w]``; ``value[:, 0] = 0``.
    """

    M: int
    channel: ChannelModel
    objective: str
    q: np.ndarray
    value: np.ndarray
    mi: np.ndarray

    @property
    def nbits(self) -> int:
        return self.q.shape[0]

    @property
    def w_max(self) -> int:
        return self.q.shape[1] - 1

    def to_dict(self) -> dict:
        def enc(a):
            return [[None if not np.isfinite(x) else float(x) for x in row] for row in a]

        return {
            "version": FORMAT_VERSION,
            "grid_version": GRID_VERSION,
            "M": self.M,
            "channel": self.channel.to_dict(),
            "objective": self.objective,
            "q": enc(self.q),
            "value": enc(self.value),
            "mi": enc(self.mi),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignTable":
        if d.get("version") != FORMAT_VERSION or d.get("grid_version") != GRID_VERSION:
            raise ConfigError("design table version mismatch")

        def dec(rows):
            return np.array([[math.nan if x is None else x for x in row] for row in rows], dtype=float)

        ch = d["channel"]
        return cls(d["M"], ChannelModel(ch["kind"], ch["cn_db"]), d["objective"],
                   dec(d["q"]), dec(d["value"]), dec(d["mi"]))


def cache_dir(override: str | os.PathLike | None = None) -> Path | None:
    """Cache directory from the argument or the ``LLRQUANT_CACHE`` variable; None disables."""
    path = override if override is not None else os.environ.get(CACHE_ENV)
    if not path:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _cache_key(M, channel, objective, w_max) -> str:
    raw = json.dumps([M, channel.kind, round(channel.cn_db, 9), objective, w_max, GRID_VERSION])
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def build_design_table(M: int, channel: ChannelModel, w_max: int = W_MAX,
                       objective: str = DEFAULT_OBJECTIVE, cache: str | os.PathLike | None = None,
                       gray_pairs: bool = True) -> DesignTable:
    """Step search for every ``(k, w)``, optionally cached on disk.

    With ``gray_pairs`` the search runs on odd ``k`` only and is copied to
    ``k + 1``; both bits see the same PAM problem on orthogonal axes.
    """
    cdir = cache_dir(cache)
    path = None
    if cdir is not None:
        path = cdir / f"design-{M}-{channel.kind}-{_cache_key(M, channel, objective, w_max)}.json"
        if path.exists():
            try:
                return DesignTable.from_dict(json.loads(path.read_text()))
            except (ConfigError, KeyError, ValueError):
                log.warning("ignoring stale cache entry %s", path)
    const = build_qam(M)
    n = const.nbits
    q = np.full((n, w_max + 1), math.nan)
    val = np.zeros((n, w_max + 1))
    mi = np.zeros((n, w_max + 1))
    for k in range(1, n + 1):
        if gray_pairs and k % 2 == 0:
            q[k - 1], val[k - 1], mi[k - 1] = q[k - 2], val[k - 2], mi[k - 2]
            continue
        for w in range(1, w_max + 1):
            r = optimize_step(k, w, channel, const, objective)
            q[k - 1, w], val[k - 1, w], mi[k - 1, w] = r.q, r.value, r.mi
            log.debug("k=%d w=%d q=%.4f value=%.6f", k, w, r.q, r.value)
    table = DesignTable(M, channel, objective, q, val, mi)
    if path is not None:
        path.write_text(json.dumps(table.to_dict()))
    return table


def allocate_bits(i_table, W: int) -> np.ndarray:
    """Greedy allocation: add one bit at a time where the table gain is largest.

    ``i_table[k-1, w]`` must hold values for ``w = 0..w_max``. Ties go to the
    smallest ``k``.

    Raises:
        InfeasibleBudget: if ``W`` exceeds ``nbits * w_max`` or is negative.
    """
    i_table = np.asarray(i_table, dtype=float)
    n, cols = i_table.shape
    w_max = cols - 1
    if W < 0 or W > n * w_max:
        raise InfeasibleBudget(f"W={W} outside 0..{n * w_max}")
    w = np.zeros(n, dtype=np.int64)
    for _ in range(W):
        gains = np.full(n, -np.inf)
        room = w < w_max
        idx = np.nonzero(room)[0]
        gains[idx] = i_table[idx, w[idx] + 1] - i_table[idx, w[idx]]
        w[int(np.argmax(gains))] += 1
    return w


EXHAUSTIVE_LIMIT = 2_000_000


def allocate_bits_exhaustive(i_table, W: int) -> np.ndarray:
    """Globally optimal allocation by enumerating every ``w`` in ``[0, w_max]^n``.

    Raises:
        TooLarge: if the enumeration exceeds ``EXHAUSTIVE_LIMIT`` vectors.
        InfeasibleBudget: if no vector sums to ``W``.
    """
    i_table = np.asarray(i_table, dtype=float)
    n, cols = i_table.shape
    if cols**n > EXHAUSTIVE_LIMIT:
        raise TooLarge(f"{cols}^{n} allocations exceed the enumeration limit")
    if W < 0 or W > n * (cols - 1):
        raise InfeasibleBudget(f"W={W} outside 0..{n * (cols - 1)}")
    grids = np.indices((cols,) * n).reshape(n, -1).T
    grids = grids[grids.sum(axis=1) == W]
    totals = i_table[np.arange(n)[None, :], grids].sum(axis=1)
    return grids[int(np.argmax(totals))]


def allocation_value(i_table, w) -> float:
    i_table = np.asarray(i_table, dtype=float)
    return float(i_table[np.arange(len(w)), np.asarray(w)].sum())


def upper_convexity(i_table, tol: float = 1e-12) -> np.ndarray:
    """Per ``k``, whether the increments ``I_{k,w+1} - I_{k,w}`` are nonincreasing."""
    d = np.diff(np.asarray(i_table, dtype=float), axis=1)
    return np.all(np.diff(d, axis=1) <= tol, axis=1)


@dataclass
class QuantizerBank:
    """One quantizer per bit position, with reconstruction tables and PMFs."""

    M: int
    channel: ChannelModel
    quantizers: list[PerBitQuantizer]
    pmfs: list[LlrPmfTable] = field(repr=False)

    @property
    def w(self) -> np.ndarray:
        return np.array([qz.w for qz in self.quantizers])

    @property
    def W(self) -> int:
        return int(self.w.sum())

    @property
    def L(self) -> np.ndarray:
        return np.array([qz.L for qz in self.quantizers])

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "M": self.M,
            "channel": self.channel.to_dict(),
            "quantizers": [
                {"k": qz.k, "w": qz.w, "q": None if not np.isfinite(qz.q) else qz.q,
                 "recon": qz.recon.tolist()}
                for qz in self.quantizers
            ],
            "pmfs": [p.to_dict() for p in self.pmfs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizerBank":
        if d.get("version") != FORMAT_VERSION:
            raise ConfigError("quantizer bank version mismatch")
        ch = ChannelModel(d["channel"]["kind"], d["channel"]["cn_db"])
        qs = [PerBitQuantizer(e["k"], e["w"], math.nan if e["q"] is None else e["q"],
                              np.asarray(e["recon"], dtype=float)) for e in d["quantizers"]]
        return cls(d["M"], ch, qs, [LlrPmfTable.from_dict(p) for p in d["pmfs"]])


def bank_from_allocation(table: DesignTable, w, channel: ChannelModel | None = None) -> QuantizerBank:
    """Quantizers for allocation ``w`` using the table steps.

    PMFs are evaluated on ``channel`` (defaults to the design channel);
    reconstruction values always come from the design channel.
    """
    channel = channel or table.channel
    const = build_qam(table.M)
    qs, pmfs = [], []
    for k in range(1, table.nbits + 1):
        wk = int(w[k - 1])
        step = table.q[k - 1, wk] if wk >= 2 else math.nan
        pll = llr_piecewise(const, k)
        th = uniform_thresholds(wk, step) if wk >= 2 else (np.zeros(1) if wk == 1 else np.empty(0))
        p_design = channel_cell_pmf(pll, th, table.channel) if wk else np.ones((1, 2))
        p = p_design if channel == table.channel else (
            channel_cell_pmf(pll, th, channel) if wk else np.ones((1, 2)))
        qz = PerBitQuantizer(k, wk, step, reconstruction_levels(p_design))
        qs.append(qz)
        pmfs.append(LlrPmfTable(k, wk, step, p, channel))
    return QuantizerBank(table.M, channel, qs, pmfs)


def unopt_bank(M: int, w: int, channel: ChannelModel, eval_channel: ChannelModel | None = None,
               q: float | None = None) -> QuantizerBank:
    """Baseline with one shared ``w``-bit uniform quantizer for every bit.

    The shared step maximizes the summed MI over all bits unless ``q`` is given.
    """
    const = build_qam(M)
    plls = [llr_piecewise(const, k) for k in range(1, const.nbits + 1)]
    # Gray pairs share statistics, so odd bits suffice for the search
    odd = plls[0::2]
    if q is None:
        if w >= 2:
            q, _ = _search_grid(lambda s: sum(
                bgmi(channel_cell_pmf(p, uniform_thresholds(w, s), channel)) for p in odd))
        else:
            q = math.nan
    table = DesignTable(M, channel, "mi", np.full((const.nbits, w + 1), q), np.zeros((const.nbits, w + 1)),
                        np.zeros((const.nbits, w + 1)))
    return bank_from_allocation(table, np.full(const.nbits, w), eval_channel)


def total_gmi(bank_or_pmfs) -> float:
    """Sum over bit positions of ``I(B_k; V_k)``."""
    pmfs = bank_or_pmfs.pmfs if isinstance(bank_or_pmfs, QuantizerBank) else bank_or_pmfs
    return float(sum(bgmi(p) for p in pmfs))
