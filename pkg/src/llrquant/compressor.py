"""
Fixed-budget lossy compression of quantizer index words.

Each bit position gets its own static Huffman code built from the marginal
index PMF. A word whose encoded length exceeds the budget is shortened by
greedily substituting indices with shorter-codeword ones, always picking the
substitution with the smallest average mutual-information loss.

Memory image layout: each word occupies exactly ``budget`` bits, codewords in
``k`` order, MSB of each codeword first, zero padding at the tail. Words are
packed back to back and bits are stored little-endian within bytes (bit ``i``
of the stream is bit ``i % 8`` of byte ``i // 8``).
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleBudget, MalformedWord
from .llr_stats import FORMAT_VERSION, LlrPmfTable

ZERO_WEIGHT = 1e-12


def huffman_lengths(weights) -> np.ndarray:
    """Codeword lengths of a binary Huffman code.

    The two lightest nodes are merged first; equal weights are ordered by the
    smallest original symbol index in each subtree. A single symbol gets a
    zero-length code.
    """
    weights = np.asarray(weights, dtype=float)
    n = len(weights)
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    heap = [(float(wt), i, [i]) for i, wt in enumerate(weights)]
    heapq.heapify(heap)
    lengths = np.zeros(n, dtype=np.int64)
    while len(heap) > 1:
        w1, i1, s1 = heapq.heappop(heap)
        w2, i2, s2 = heapq.heappop(heap)
        lengths[s1] += 1
        lengths[s2] += 1
        heapq.heappush(heap, (w1 + w2, min(i1, i2), s1 + s2))
    return lengths


def canonical_codes(lengths) -> np.ndarray:
    """Canonical codewords (as integers) for the given lengths.

    Symbols are ordered by ``(length, index)`` and receive consecutive codes.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    codes = [0] * len(lengths)
    code, prev = 0, 0
    for sym in sorted(range(len(lengths)), key=lambda s: (lengths[s], s)):
        code <<= int(lengths[sym]) - prev
        codes[sym] = code
        prev = int(lengths[sym])
        code += 1
    return np.array(codes, dtype=object)


@dataclass(frozen=True)
class PositionCode:
    """Prefix-free code over the indices ``1..L`` of one bit position."""

    lengths: np.ndarray
    codes: np.ndarray
    # canonical decoding tables: per length, first code, count and symbols
    _first: dict = field(repr=False, compare=False)
    _symbols: dict = field(repr=False, compare=False)

    @classmethod
    def from_lengths(cls, lengths) -> "PositionCode":
        lengths = np.asarray(lengths, dtype=np.int64)
        codes = canonical_codes(lengths)
        first, symbols = {}, {}
        for sym in sorted(range(len(lengths)), key=lambda s: (lengths[s], s)):
            ln = int(lengths[sym])
            if ln not in first:
                first[ln] = codes[sym]
                symbols[ln] = []
            symbols[ln].append(sym)
        return cls(lengths, codes, first, symbols)

    @property
    def L(self) -> int:
        return len(self.lengths)

    def bits(self, v: int) -> list[int]:
        """Codeword of 1-based index ``v`` as a list of bits, MSB first."""
        ln = int(self.lengths[v - 1])
        c = int(self.codes[v - 1])
        return [(c >> (ln - 1 - i)) & 1 for i in range(ln)]

    def read(self, bits, pos: int, end: int) -> tuple[int, int]:
        """Decode one index starting at ``bits[pos]``; returns ``(v, new_pos)``.

        Raises:
            MalformedWord: if no codeword completes before ``end``.
        """
        if 0 in self._first:
            return 1, pos
        code, ln = 0, 0
        max_len = max(self._first)
        while ln < max_len:
            if pos >= end:
                raise MalformedWord("codeword runs past the word boundary")
            code = (code << 1) | int(bits[pos])
            pos += 1
            ln += 1
            if ln in self._first:
                offset = code - int(self._first[ln])
                if 0 <= offset < len(self._symbols[ln]):
                    return self._symbols[ln][offset] + 1, pos
        raise MalformedWord("bit pattern is not a codeword")


@dataclass(frozen=True)
class HuffmanCodebook:
    """One :class:`PositionCode` per bit position ``k = 1..n``."""

    positions: tuple

    @property
    def n(self) -> int:
        return len(self.positions)

    def length_table(self) -> np.ndarray:
        """``m[k-1, v-1]`` padded with a large value beyond ``L_k``."""
        Lmax = max(p.L for p in self.positions)
        m = np.full((self.n, Lmax), 10**6, dtype=np.int64)
        for i, p in enumerate(self.positions):
            m[i, : p.L] = p.lengths
        return m

    def min_length(self) -> int:
        return int(sum(p.lengths.min() for p in self.positions))

    def max_length(self) -> int:
        return int(sum(p.lengths.max() for p in self.positions))

    def to_dict(self) -> dict:
        return {"version": FORMAT_VERSION, "lengths": [p.lengths.tolist() for p in self.positions]}

    @classmethod
    def from_dict(cls, d: dict) -> "HuffmanCodebook":
        if d.get("version") != FORMAT_VERSION:
            raise ConfigError("codebook version mismatch")
        return cls(tuple(PositionCode.from_lengths(ln) for ln in d["lengths"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_huffman(pmfs) -> HuffmanCodebook:
    """Per-position Huffman codes from marginal PMFs.

    ``pmfs`` holds :class:`LlrPmfTable` objects or 1-D marginal arrays.
    Zero-probability indices get weight ``1e-12`` so every index is encodable.
    """
    positions = []
    for p in pmfs:
        marg = p.p_marg if isinstance(p, LlrPmfTable) else np.asarray(p, dtype=float)
        if np.any(marg < 0):
            raise ConfigError("negative probability")
        wts = np.where(marg > 0, marg, ZERO_WEIGHT)
        positions.append(PositionCode.from_lengths(huffman_lengths(wts)))
    return HuffmanCodebook(tuple(positions))


def word_length(v, codebook: HuffmanCodebook):
    """Encoded length ``sum_k m[k, v_k]``; ``v`` has shape ``(n,)`` or ``(T, n)``."""
    v = np.asarray(v, dtype=np.int64)
    m = codebook.length_table()
    out = m[np.arange(codebook.n), v - 1].sum(axis=-1)
    return int(out) if out.ndim == 0 else out


def _cell_info(p0, p1):
    m = 0.5 * (p0 + p1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(p0 > 0, p0 * np.log2(p0 / m), 0.0)
        t1 = np.where(p1 > 0, p1 * np.log2(p1 / m), 0.0)
    return 0.5 * (t0 + t1)


def loss_matrix(p_cond) -> np.ndarray:
    """``delta[a-1, c-1]``: MI lost by merging cell ``a`` into cell ``c``."""
    if isinstance(p_cond, LlrPmfTable):
        p_cond = p_cond.p_cond
    p = np.asarray(p_cond, dtype=float)
    f = _cell_info(p[:, 0], p[:, 1])
    merged = _cell_info(p[:, 0][:, None] + p[:, 0][None, :], p[:, 1][:, None] + p[:, 1][None, :])
    d = f[:, None] + f[None, :] - merged
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def delta_loss(k: int, a: int, c: int, pmfs) -> float:
    """Average MI loss of replacing index ``a`` by ``c`` at position ``k`` (1-based)."""
    return float(loss_matrix(pmfs[k - 1])[a - 1, c - 1])


@dataclass(frozen=True)
class LossTable:
    """Substitution losses per position plus the greedy lookup tables.

    ``best_c[k, a, l]`` is the cheapest replacement for original index ``a``
    among indices with codeword length below ``l`` (ties to the smallest
    index), and ``best_cost`` its loss (``inf`` if none).
    """

    delta: tuple
    best_c: np.ndarray
    best_cost: np.ndarray


def build_loss_table(pmfs, codebook: HuffmanCodebook) -> LossTable:
    deltas = tuple(loss_matrix(p) for p in pmfs)
    n = len(deltas)
    Lmax = max(d.shape[0] for d in deltas)
    lmax = max(int(p.lengths.max()) for p in codebook.positions) + 1
    best_c = np.zeros((n, Lmax, lmax + 1), dtype=np.int64)
    best_cost = np.full((n, Lmax, lmax + 1), np.inf)
    for k, (d, pos) in enumerate(zip(deltas, codebook.positions)):
        lens = pos.lengths
        for ln in range(lmax + 1):
            allowed = lens < ln
            if not allowed.any():
                continue
            cost = np.where(allowed[None, :], d, np.inf)
            c = np.argmin(cost, axis=1)
            best_c[k, : d.shape[0], ln] = c + 1
            best_cost[k, : d.shape[0], ln] = cost[np.arange(d.shape[0]), c]
    return LossTable(deltas, best_c, best_cost)


def iteration_cap(initial_n: int, budget: int, L) -> int:
    return int(initial_n - budget + int(np.sum(L)))


def compress_word(v, codebook: HuffmanCodebook, losses: LossTable, budget: int) -> np.ndarray:
    """Greedy substitution until the encoded length fits ``budget``.

    Each step replaces one current index by a strictly shorter-codeword index,
    choosing the smallest loss relative to the original index; ties go to the
    smallest ``(k, c)``.

    Raises:
        InfeasibleBudget: if even the shortest codewords exceed ``budget``.
    """
    if codebook.min_length() > budget:
        raise InfeasibleBudget(f"shortest word needs {codebook.min_length()} bits > {budget}")
    v = np.asarray(v, dtype=np.int64)
    vh = v.copy()
    m = codebook.length_table()
    ks = np.arange(codebook.n)
    n_now = int(m[ks, vh - 1].sum())
    cap = iteration_cap(n_now, budget, [p.L for p in codebook.positions])
    it = 0
    while n_now > budget:
        best = (math.inf, 0, 0)
        for k in range(codebook.n):
            cur_len = m[k, vh[k] - 1]
            d = losses.delta[k][v[k] - 1]
            for c in range(len(d)):
                if m[k, c] < cur_len and d[c] < best[0]:
                    best = (d[c], k, c)
        _, k, c = best
        n_now -= int(m[k, vh[k] - 1] - m[k, c])
        vh[k] = c + 1
        it += 1
        assert it <= cap, "greedy compression exceeded its iteration bound"
    return vh


def compress_words(v, codebook: HuffmanCodebook, losses: LossTable, budget: int):
    """Vectorized :func:`compress_word` over words ``v`` of shape ``(T, n)``.

    Returns ``(v_hat, substitutions)`` with the per-word substitution count.
    """
    if codebook.min_length() > budget:
        raise InfeasibleBudget(f"shortest word needs {codebook.min_length()} bits > {budget}")
    v = np.asarray(v, dtype=np.int64)
    vh = v.copy()
    m = codebook.length_table()
    ks = np.arange(codebook.n)
    cur = m[ks, vh - 1]
    total = cur.sum(axis=1)
    subs = np.zeros(len(v), dtype=np.int64)
    cap = int((total - budget).max(initial=0)) + sum(p.L for p in codebook.positions)
    for _ in range(cap + 1):
        active = np.nonzero(total > budget)[0]
        if len(active) == 0:
            return vh, subs
        a = v[active] - 1
        ln = cur[active]
        cost = losses.best_cost[ks[None, :], a, ln]
        k = np.argmin(cost, axis=1)
        c = losses.best_c[k, a[np.arange(len(active)), k], ln[np.arange(len(active)), k]]
        new_len = m[k, c - 1]
        total[active] -= cur[active, k] - new_len
        cur[active, k] = new_len
        vh[active, k] = c
        subs[active] += 1
    raise AssertionError("greedy compression exceeded its iteration bound")


def encode(v_hat, codebook: HuffmanCodebook, budget: int) -> np.ndarray:
    """Payload of exactly ``budget`` bits (uint8 0/1 array), zero padded."""
    bits = []
    for k, vk in enumerate(np.asarray(v_hat, dtype=np.int64)):
        bits.extend(codebook.positions[k].bits(int(vk)))
    if len(bits) > budget:
        raise InfeasibleBudget(f"word needs {len(bits)} bits > {budget}")
    out = np.zeros(budget, dtype=np.uint8)
    out[: len(bits)] = bits
    return out


def decode(payload, codebook: HuffmanCodebook) -> np.ndarray:
    """Inverse of :func:`encode`.

    Raises:
        MalformedWord: if a codeword would extend past the payload.
    """
    payload = np.asarray(payload)
    pos, end = 0, len(payload)
    out = np.empty(codebook.n, dtype=np.int64)
    for k, code in enumerate(codebook.positions):
        out[k], pos = code.read(payload, pos, end)
    return out


def pack_words(payloads) -> bytes:
    """Concatenate fixed-size bit payloads into a little-endian bit stream."""
    bits = np.asarray(payloads, dtype=np.uint8).reshape(-1)
    return np.packbits(bits, bitorder="little").tobytes()


def unpack_words(image: bytes, budget: int, count: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(image, dtype=np.uint8), bitorder="little")
    return bits[: budget * count].reshape(count, budget)
