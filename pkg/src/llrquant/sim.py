"""
Monte Carlo link simulation and SNR-gap analysis.

Per symbol: draw the bits, map them to QAM, apply the channel gain and noise,
compute the min-distance LLRs, quantize, Huffman-encode, compress to the
fixed budget, optionally pass the fixed-size words through a row-column
interleaver and back, decode, and tabulate ``(b_k, v_k)`` counts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .compressor import (HuffmanCodebook, LossTable, build_huffman, build_loss_table,
                         compress_words)
from .constellation import build_qam, llr_piecewise
from .design import QuantizerBank, bank_from_allocation, bgmi
from .errors import ConfigError, MalformedWord, ShapeMismatch, TargetUnreachable
from .llr_stats import AWGN, ChannelModel, channel_cell_pmf

MIN_TRIALS = 10_000
BATCH = 100_000


# ---------------------------------------------------------------- sampling

def sample_channel(M: int, channel: ChannelModel, trials: int, rng: np.random.Generator):
    """Draw bits, gains and per-bit LLRs for ``trials`` symbols.

    Returns ``(bits, llr)``, both of shape ``(trials, log2 M)``.
    """
    const = build_qam(M)
    n = const.nbits
    P = len(const.pam_levels)
    sigma2 = channel.sigma2
    if channel.kind == AWGN:
        h = np.ones(trials)
    else:
        h = np.sqrt(rng.exponential(1.0, trials))
    idx = rng.integers(0, P, size=(trials, 2))
    noise = rng.normal(0.0, math.sqrt(sigma2 / 2.0), size=(trials, 2))
    # column 0 carries the imaginary axis (odd k), column 1 the real axis
    y = h[:, None] * const.pam_levels[idx] + noise
    bits = np.empty((trials, n), dtype=np.int8)
    llr = np.empty((trials, n))
    for k in range(1, n + 1):
        col = 0 if k % 2 == 1 else 1
        pll = llr_piecewise(const, k)
        bits[:, k - 1] = const.axis_map(k).bits[idx[:, col]]
        llr[:, k - 1] = (h * h / sigma2) * pll.g(y[:, col] / h)
    return bits, llr


def quantize_words(llr, bank: QuantizerBank) -> np.ndarray:
    v = np.empty(llr.shape, dtype=np.int64)
    for i, qz in enumerate(bank.quantizers):
        v[:, i] = np.searchsorted(qz.thresholds, llr[:, i], side="right") + 1
    return v


# ---------------------------------------------------------------- estimators

def joint_counts(bits, v, L) -> list[np.ndarray]:
    """Per position, a ``(L_k, 2)`` table of ``(v, b)`` counts."""
    out = []
    for i, Lk in enumerate(L):
        c = np.bincount((v[:, i] - 1) * 2 + bits[:, i], minlength=2 * Lk)
        out.append(c.reshape(Lk, 2))
    return out


def plugin_mi(counts) -> float:
    """Plug-in ``I(B; V)`` from a ``(L, 2)`` count table."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    pv = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log2(p / (pv * pb)), 0.0)
    return float(t.sum())


def plugin_mi_se(counts) -> float:
    """Standard error of :func:`plugin_mi` from the spread of the information density."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    p = counts / n
    pv = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(p > 0, np.log2(p / (pv * pb)), 0.0)
    mean = (p * dens).sum()
    var = (p * dens**2).sum() - mean**2
    return float(math.sqrt(max(var, 0.0) / n))


# ---------------------------------------------------------------- word transport

def encode_words(v_hat, codebook: HuffmanCodebook, budget: int) -> np.ndarray:
    """Vectorized encoder: ``(T, n)`` indices to a ``(T, budget)`` uint8 bit array."""
    T = len(v_hat)
    out = np.zeros((T, budget), dtype=np.uint8)
    offset = np.zeros(T, dtype=np.int64)
    rows = np.arange(T)
    for k, pos in enumerate(codebook.positions):
        vk = v_hat[:, k] - 1
        ln = pos.lengths[vk]
        wide = int(pos.lengths.max()) > 62
        codes = np.array([int(c) for c in pos.codes], dtype=object if wide else np.int64)[vk]
        for j in range(int(ln.max(initial=0))):
            live = j < ln
            shift = (ln - 1 - j)[live]
            if wide:
                bit = np.array([(int(c) >> int(s)) & 1 for c, s in zip(codes[live], shift)], dtype=np.uint8)
            else:
                bit = ((codes[live] >> shift) & 1).astype(np.uint8)
            out[rows[live], offset[live] + j] = bit
        offset += ln
    if (offset > budget).any():
        raise ConfigError("word longer than the budget")
    return out


def decode_words(payloads, codebook: HuffmanCodebook) -> np.ndarray:
    """Vectorized canonical decoder, inverse of :func:`encode_words`."""
    payloads = np.asarray(payloads, dtype=np.int64)
    T, budget = payloads.shape
    rows = np.arange(T)
    offset = np.zeros(T, dtype=np.int64)
    out = np.zeros((T, codebook.n), dtype=np.int64)
    for k, pos in enumerate(codebook.positions):
        if 0 in pos._first:
            out[:, k] = 1
            continue
        code = np.zeros(T, dtype=object)
        done = np.zeros(T, dtype=bool)
        for ln in range(1, max(pos._first) + 1):
            idx = offset + ln - 1
            if (~done & (idx >= budget)).any():
                raise MalformedWord("codeword runs past the word boundary")
            bit = payloads[rows, np.minimum(idx, budget - 1)]
            code = code * 2 + bit
            if ln in pos._first:
                off = code - int(pos._first[ln])
                syms = pos._symbols[ln]
                hit = ~done & (off >= 0) & (off < len(syms))
                if hit.any():
                    out[hit, k] = np.array(syms, dtype=np.int64)[off[hit].astype(np.int64)] + 1
                    offset[hit] += ln
                    done |= hit
            if done.all():
                break
    return out


def row_column_interleave(words, rows: int, cols: int, inverse: bool = False) -> np.ndarray:
    """Write ``rows x cols`` words row-wise and read them column-wise (or the inverse).

    Raises:
        ShapeMismatch: if the number of words is not ``rows * cols``.
    """
    words = np.asarray(words)
    if rows <= 0 or cols <= 0 or len(words) != rows * cols:
        raise ShapeMismatch(f"{len(words)} words do not fill a {rows}x{cols} block")
    tail = words.shape[1:]
    if inverse:
        return words.reshape(cols, rows, *tail).swapaxes(0, 1).reshape(len(words), *tail)
    return words.reshape(rows, cols, *tail).swapaxes(0, 1).reshape(len(words), *tail)


# ---------------------------------------------------------------- simulation

@dataclass
class SimConfig:
    bank: QuantizerBank
    channel: ChannelModel
    trials: int
    seed: int
    budget: int | None = None
    codebook: HuffmanCodebook | None = None
    losses: LossTable | None = None
    rows: int | None = None
    cols: int | None = None

    def __post_init__(self):
        if self.trials < MIN_TRIALS:
            raise ConfigError(f"trials must be at least {MIN_TRIALS}")
        if self.rows is not None and self.trials % (self.rows * self.cols):
            raise ConfigError("trials must be a multiple of rows * cols")


@dataclass
class SimReport:
    trials: int
    per_bit_gmi: np.ndarray
    per_bit_se: np.ndarray
    per_bit_gmi_uncompressed: np.ndarray
    length_hist: np.ndarray
    substitution_hist: np.ndarray
    words_compressed: int
    counts: list = field(repr=False)

    @property
    def gmi(self) -> float:
        return float(self.per_bit_gmi.sum())

    @property
    def gmi_se(self) -> float:
        return float(math.sqrt((self.per_bit_se**2).sum()))

    @property
    def compression_loss(self) -> float:
        return float(self.per_bit_gmi_uncompressed.sum() - self.per_bit_gmi.sum())

    def ccdf(self) -> tuple[np.ndarray, np.ndarray]:
        """``(N, P(length > N))`` of the pre-compression word length."""
        n = np.arange(len(self.length_hist))
        tail = self.length_hist[::-1].cumsum()[::-1]
        return n, np.concatenate([tail[1:], [0]]) / self.trials

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "gmi", "se", "gmi_uncompressed"])
            for k, (g, s, u) in enumerate(zip(self.per_bit_gmi, self.per_bit_se,
                                              self.per_bit_gmi_uncompressed), 1):
                wr.writerow([k, f"{g:.9f}", f"{s:.9f}", f"{u:.9f}"])
            wr.writerow(["total", f"{self.gmi:.9f}", f"{self.gmi_se:.9f}",
                         f"{self.per_bit_gmi_uncompressed.sum():.9f}"])

    def write_ccdf_csv(self, path):
        n, p = self.ccdf()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["N", "ccdf"])
            for a, b in zip(n, p):
                wr.writerow([int(a), f"{b:.9g}"])


def run_sim(cfg: SimConfig) -> SimReport:
    """Seeded Monte Carlo of the quantize-compress-store chain.

    Batches use independent child seeds so results do not depend on batching
    order.
    """
    bank = cfg.bank
    L = bank.L
    codebook = cfg.codebook
    if cfg.budget is not None and codebook is None:
        codebook = build_huffman(bank.pmfs)
    losses = cfg.losses
    if cfg.budget is not None and losses is None:
        losses = build_loss_table(bank.pmfs, codebook)
    batch = BATCH
    if cfg.rows is not None:
        block = cfg.rows * cfg.cols
        batch = max(block, BATCH // block * block)
    seeds = np.random.SeedSequence(cfg.seed).spawn(math.ceil(cfg.trials / batch))
    cnt = [np.zeros((Lk, 2), dtype=np.int64) for Lk in L]
    cnt_raw = [np.zeros((Lk, 2), dtype=np.int64) for Lk in L]
    length_hist = np.zeros(1, dtype=np.int64)
    sub_hist = np.zeros(1, dtype=np.int64)
    compressed = 0
    done = 0
    for ss in seeds:
        t = min(batch, cfg.trials - done)
        rng = np.random.default_rng(ss)
        bits, llr = sample_channel(bank.M, cfg.channel, t, rng)
        v = quantize_words(llr, bank)
        for i, c in enumerate(joint_counts(bits, v, L)):
            cnt_raw[i] += c
        v_hat = v
        if codebook is not None:
            lens = codebook.length_table()[np.arange(codebook.n), v - 1].sum(axis=1)
            length_hist = _add_hist(length_hist, lens)
        if cfg.budget is not None:
            v_hat, subs = compress_words(v, codebook, losses, cfg.budget)
            sub_hist = _add_hist(sub_hist, subs)
            compressed += int((subs > 0).sum())
            if cfg.rows is not None:
                words = encode_words(v_hat, codebook, cfg.budget)
                block = cfg.rows * cfg.cols
                moved = np.concatenate([
                    row_column_interleave(
                        row_column_interleave(words[s:s + block], cfg.rows, cfg.cols),
                        cfg.rows, cfg.cols, inverse=True)
                    for s in range(0, t, block)])
                if not np.array_equal(moved, words):
                    raise AssertionError("interleaver round trip altered the stored words")
                v_hat = decode_words(moved, codebook)
        for i, c in enumerate(joint_counts(bits, v_hat, L)):
            cnt[i] += c
        done += t
    return SimReport(
        trials=cfg.trials,
        per_bit_gmi=np.array([plugin_mi(c) for c in cnt]),
        per_bit_se=np.array([plugin_mi_se(c) for c in cnt]),
        per_bit_gmi_uncompressed=np.array([plugin_mi(c) for c in cnt_raw]),
        length_hist=length_hist,
        substitution_hist=sub_hist,
        words_compressed=compressed,
        counts=cnt,
    )


def _add_hist(h, values):
    b = np.bincount(values, minlength=len(h))
    if len(b) > len(h):
        h = np.concatenate([h, np.zeros(len(b) - len(h), dtype=h.dtype)])
    h[: len(b)] += b
    return h


# ---------------------------------------------------------------- GMI curves

def analytic_gmi(bank: QuantizerBank, channel: ChannelModel) -> float:
    """Sum of per-bit MI of the fixed quantizers evaluated on ``channel``."""
    const = build_qam(bank.M)
    memo = {}
    total = 0.0
    for qz in bank.quantizers:
        if qz.w == 0:
            continue
        # Gray pairs (2u-1, 2u) see identical statistics
        key = ((qz.k + 1) // 2, qz.w, None if qz.w < 2 else qz.q)
        if key not in memo:
            pll = llr_piecewise(const, qz.k)
            memo[key] = bgmi(channel_cell_pmf(pll, qz.thresholds, channel))
        total += memo[key]
    return total


UNQUANTIZED_CELLS = 4096


def unquantized_gmi(M: int, channel: ChannelModel, cells: int = UNQUANTIZED_CELLS) -> float:
    """Sum of ``I(B_k; Lambda_k)`` for the unquantized min-distance LLR.

    Evaluated through a fine quantizer uniform in ``tanh(lambda / 2)``; the
    value converges from below as ``cells`` grows.
    """
    const = build_qam(M)
    u = np.linspace(-1.0, 1.0, cells + 1)[1:-1]
    th = 2.0 * np.arctanh(u)
    total = 0.0
    for k in range(1, const.nbits + 1, 2):
        pll = llr_piecewise(const, k)
        total += 2.0 * bgmi(channel_cell_pmf(pll, th, channel))
    return total


@dataclass
class CompressedDesign:
    """Quantizer bank plus static codebook and loss table for a budget."""

    bank: QuantizerBank
    budget: int | None
    codebook: HuffmanCodebook | None = None
    losses: LossTable | None = None

    def __post_init__(self):
        if self.budget is not None and self.codebook is None:
            self.codebook = build_huffman(self.bank.pmfs)
            self.losses = build_loss_table(self.bank.pmfs, self.codebook)


def design_gmi(design: CompressedDesign, channel: ChannelModel, trials: int = 100_000,
               seed: int = 0) -> float:
    """GMI of a design on ``channel``.

    Without compression this is exact. With compression the analytic value is
    corrected by the Monte Carlo estimate of the compression loss (a control
    variate: both plug-in estimates share the same samples).
    """
    exact = analytic_gmi(design.bank, channel)
    if design.budget is None or design.codebook.max_length() <= design.budget:
        return exact
    rep = run_sim(SimConfig(design.bank, channel, trials, seed, design.budget,
                            design.codebook, design.losses))
    return exact - rep.compression_loss


def expected_compressed_gmi(design: CompressedDesign, channel: ChannelModel,
                            trials: int = 200_000, seed: int = 0) -> float:
    return design_gmi(design, channel, trials, seed)


GRID_STEP = 0.1
MAX_GAP = 10.0


def snr_gap(gmi_at, working_cn: float, target: float, step: float = GRID_STEP,
            max_gap: float = MAX_GAP) -> float:
    """C/N increase needed for ``gmi_at(cn)`` to reach ``target``.

    ``gmi_at`` is evaluated on a ``step`` grid above ``working_cn`` and the
    crossing is located by linear interpolation between grid points.

    Raises:
        TargetUnreachable: if the target is not met within ``max_gap`` dB.
    """
    prev_cn, prev = working_cn, gmi_at(working_cn)
    if prev >= target:
        return 0.0
    n = int(round(max_gap / step))
    for i in range(1, n + 1):
        cn = working_cn + i * step
        val = gmi_at(cn)
        if val >= target:
            frac = (target - prev) / (val - prev) if val > prev else 1.0
            return float(prev_cn - working_cn + frac * step)
        prev_cn, prev = cn, val
    raise TargetUnreachable(f"GMI {target:.4f} not reached within {max_gap} dB")


def design_gap(design: CompressedDesign, channel: ChannelModel, target: float | None = None,
               trials: int = 100_000, seed: int = 0) -> float:
    """SNR gap of a design against the unquantized reference at ``channel.cn_db``."""
    if target is None:
        target = unquantized_gmi(design.bank.M, channel)
    return snr_gap(lambda cn: design_gmi(design, channel.at(cn), trials, seed), channel.cn_db, target)


def meets_gap(design: CompressedDesign, channel: ChannelModel, gap_db: float, target: float,
              trials: int = 100_000, seed: int = 0) -> bool:
    """Whether the design reaches ``target`` within ``gap_db`` of the working point."""
    return design_gmi(design, channel.at(channel.cn_db + gap_db), trials, seed) >= target


def sweep_joint(table, budgets, w_candidates, channel: ChannelModel, target: float | None = None,
                trials: int = 100_000, seed: int = 0):
    """SNR gap for every ``(W, budget)`` pair with ``W >= budget``.

    Returns ``(best, matrix)``: ``best[budget] = (W, gap)`` and
    ``matrix[(W, budget)] = gap`` (``inf`` when unreachable).
    """
    from .design import allocate_bits

    if target is None:
        target = unquantized_gmi(table.M, channel)
    matrix, best = {}, {}
    for nb in budgets:
        for W in w_candidates:
            if W < nb:
                continue
            bank = bank_from_allocation(table, allocate_bits(table.value, W))
            design = CompressedDesign(bank, nb if W > nb else None)
            try:
                g = design_gap(design, channel, target, trials, seed)
            except TargetUnreachable:
                g = math.inf
            matrix[(W, nb)] = g
            if nb not in best or g < best[nb][1]:
                best[nb] = (W, g)
    return best, matrix
