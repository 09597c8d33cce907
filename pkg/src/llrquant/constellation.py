"""
Gray-mapped square QAM constellations and min-distance LLRs.

Bits are numbered k = 1..log2(M). Odd k ride on the imaginary axis and even k
on the real axis; within an axis, bit positions are MSB-first, so k = 1, 2 are
the most protected bits and k = log2(M) - 1, log2(M) the least protected.

LLR sign convention: positive values favor b_k = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateSegment, UnsupportedSize

SUPPORTED_SIZES = (16, 64, 256, 1024, 4096)


def gray_code(nbits: int) -> np.ndarray:
    """Binary-reflected Gray code of ``0 .. 2**nbits - 1``."""
    i = np.arange(1 << nbits, dtype=np.int64)
    return i ^ (i >> 1)


def int_to_bits(values: np.ndarray, nbits: int) -> np.ndarray:
    """Expand integers into an ``(..., nbits)`` array of bits, MSB first."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(nbits - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.int8)


@dataclass(frozen=True)
class AxisMap:
    """One bit position viewed as a 1-D PAM problem.

    Attributes:
        axis: ``"imag"`` or ``"real"``.
        position: bit index within the axis label, 0 = MSB.
        levels: ascending PAM amplitudes (unit-energy scaling applied).
        bits: value of this bit for each entry of ``levels``.
    """

    axis: str
    position: int
    levels: np.ndarray
    bits: np.ndarray


@dataclass(frozen=True)
class Constellation:
    """Square M-QAM with per-axis binary-reflected Gray labels.

    ``points[j]`` carries the label ``labels[j]`` (bits b_1..b_n, n = log2 M).
    """

    M: int
    points: np.ndarray
    labels: np.ndarray
    pam_levels: np.ndarray
    pam_labels: np.ndarray
    axis_maps: dict = field(repr=False)

    @property
    def nbits(self) -> int:
        return self.labels.shape[1]

    @property
    def bits_per_axis(self) -> int:
        return self.pam_labels.shape[1]

    def axis_map(self, k: int) -> AxisMap:
        if not 1 <= k <= self.nbits:
            raise ValueError(f"bit index k={k} outside 1..{self.nbits}")
        return self.axis_maps[k]

    def subset(self, k: int, bit: int) -> np.ndarray:
        """Points whose k-th bit equals ``bit`` (the set S_k(bit))."""
        return self.points[self.labels[:, k - 1] == bit]

    @cached_property
    def min_distance(self) -> float:
        return float(self.pam_levels[1] - self.pam_levels[0])


def build_qam(M: int) -> Constellation:
    """Build a Gray-mapped square QAM with unit average symbol energy.

    Raises:
        UnsupportedSize: if ``M`` is not one of 16, 64, 256, 1024, 4096.
    """
    if M not in SUPPORTED_SIZES:
        raise UnsupportedSize(f"M={M} not in {SUPPORTED_SIZES}")
    nbits = int(round(np.log2(M)))
    per_axis = nbits // 2
    P = 1 << per_axis
    scale = 1.0 / np.sqrt(2.0 * (P * P - 1) / 3.0)
    pam_levels = (2.0 * np.arange(P) - (P - 1)) * scale
    pam_labels = int_to_bits(gray_code(per_axis), per_axis)

    # label index -> PAM level index on each axis
    gray = gray_code(per_axis)
    level_of_label = np.empty(P, dtype=np.int64)
    level_of_label[gray] = np.arange(P)

    labels = int_to_bits(np.arange(M), nbits)
    imag_label = _bits_to_int(labels[:, 0::2])
    real_label = _bits_to_int(labels[:, 1::2])
    points = pam_levels[level_of_label[real_label]] + 1j * pam_levels[level_of_label[imag_label]]

    axis_maps = {}
    for k in range(1, nbits + 1):
        position = (k - 1) // 2
        axis_maps[k] = AxisMap(
            axis="imag" if k % 2 == 1 else "real",
            position=position,
            levels=pam_levels,
            bits=pam_labels[:, position].copy(),
        )
    return Constellation(M, points, labels, pam_levels, pam_labels, axis_maps)


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1, dtype=np.int64)
    return (bits.astype(np.int64) * weights).sum(axis=-1)


def axis_coordinate(r, k: int) -> np.ndarray:
    """Coordinate of the received sample on the axis that carries bit k."""
    r = np.asarray(r)
    return np.imag(r) if k % 2 == 1 else np.real(r)


def pam_llr(y, levels, bits, h: float, sigma2: float) -> np.ndarray:
    """Min-distance LLR of a 1-D PAM bit.

    Computes ``-(min_{S(1)} (y - h s)^2 - min_{S(0)} (y - h s)^2) / sigma2`` by
    direct search over the level subsets.
    """
    y = np.asarray(y, dtype=float)
    levels = np.asarray(levels, dtype=float)
    bits = np.asarray(bits)
    d1 = ((y[..., None] - h * levels[bits == 1]) ** 2).min(axis=-1)
    d0 = ((y[..., None] - h * levels[bits == 0]) ** 2).min(axis=-1)
    return -(d1 - d0) / sigma2


def min_distance_llr(const: Constellation, r, h: float, sigma2: float, k: int) -> np.ndarray:
    """Min-distance LLR of bit k for received sample(s) ``r``.

    Uses the per-axis decomposition of Gray square QAM: the squared distance
    along the other axis cancels between the two minima.
    """
    if h <= 0:
        raise ValueError("channel gain must be positive")
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    amap = const.axis_map(k)
    return pam_llr(axis_coordinate(r, k), amap.levels, amap.bits, h, sigma2)


@dataclass(frozen=True)
class PiecewiseLinearLlr:
    """Exact piecewise-linear form of a min-distance PAM LLR.

    In the normalized coordinate ``z = y / h`` the LLR is
    ``lambda = (h**2 / sigma2) * (slope[u] * z + intercept[u])`` for
    ``z`` in ``[edges[u], edges[u + 1])``; ``edges`` starts at ``-inf`` and
    ends at ``+inf``.

    ``near1[u]`` / ``near0[u]`` are the nearest levels carrying bit 1 / bit 0
    on segment u, so ``slope = 2 (near1 - near0)`` and
    ``intercept = near0**2 - near1**2``.
    """

    k: int
    edges: np.ndarray
    slope: np.ndarray
    intercept: np.ndarray
    near1: np.ndarray
    near0: np.ndarray
    levels: np.ndarray
    bits: np.ndarray

    @property
    def n_segments(self) -> int:
        return len(self.slope)

    def g(self, z) -> np.ndarray:
        """LLR in normalized units (h = 1, sigma2 = 1) at coordinate ``z``."""
        z = np.asarray(z, dtype=float)
        u = np.searchsorted(self.edges[1:-1], z, side="right")
        return self.slope[u] * z + self.intercept[u]

    def __call__(self, y, h: float, sigma2: float) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return (h * h / sigma2) * self.g(y / h)

    def preimages(self, t) -> list[np.ndarray]:
        """Per segment, the z where the normalized LLR crosses each value in ``t``.

        Only crossings strictly inside the segment are returned.
        """
        t = np.asarray(t, dtype=float)
        out = []
        for u in range(self.n_segments):
            if self.slope[u] == 0:
                raise DegenerateSegment(f"segment {u} of bit {self.k} has zero slope")
            z = (t - self.intercept[u]) / self.slope[u]
            lo, hi = self.edges[u], self.edges[u + 1]
            out.append(z[(z > lo) & (z < hi)])
        return out


def _nearest_breaks(vals: np.ndarray) -> np.ndarray:
    return 0.5 * (vals[1:] + vals[:-1])


def piecewise_from_levels(levels, bits, k: int = 0) -> PiecewiseLinearLlr:
    """Build the piecewise-linear LLR for arbitrary 1-D levels and bit labels."""
    levels = np.asarray(levels, dtype=float)
    bits = np.asarray(bits).astype(np.int8)
    order = np.argsort(levels)
    levels, bits = levels[order], bits[order]
    s1, s0 = levels[bits == 1], levels[bits == 0]
    if len(s1) == 0 or len(s0) == 0:
        raise ValueError("both bit values must be present")
    inner = np.unique(np.concatenate([_nearest_breaks(s1), _nearest_breaks(s0)]))
    edges = np.concatenate([[-np.inf], inner, [np.inf]])
    # representative point per segment
    reps = np.empty(len(edges) - 1)
    reps[1:-1] = 0.5 * (edges[1:-2] + edges[2:-1])
    if len(inner):
        reps[0], reps[-1] = inner[0] - 1.0, inner[-1] + 1.0
    else:
        reps[0] = 0.0
    near1 = s1[np.abs(reps[:, None] - s1).argmin(axis=1)]
    near0 = s0[np.abs(reps[:, None] - s0).argmin(axis=1)]
    slope = 2.0 * (near1 - near0)
    intercept = near0**2 - near1**2
    return PiecewiseLinearLlr(k, edges, slope, intercept, near1, near0, levels, bits)


def llr_piecewise(const: Constellation, k: int) -> PiecewiseLinearLlr:
    """Piecewise-linear LLR of bit k of a Gray square QAM."""
    amap = const.axis_map(k)
    return piecewise_from_levels(amap.levels, amap.bits, k)
