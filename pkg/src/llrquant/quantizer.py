"""Uniform per-bit LLR quantizers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# recon clamp for cells where one conditional probability vanishes
RECON_CLAMP = math.log(1e12)


def uniform_thresholds(w: int, q: float) -> np.ndarray:
    """Finite boundaries ``d_l = (l - L/2) q`` for ``l = 1 .. L-1``, ``L = 2**w``."""
    L = 1 << w
    return (np.arange(1, L) - L / 2) * q


@dataclass(frozen=True)
class PerBitQuantizer:
    """Uniform quantizer for the LLR of bit ``k``.

    Indices are 1-based as in ``v = l`` iff ``lambda`` is in ``[d_{l-1}, d_l)``.
    ``w = 0`` is allowed and means the bit is not stored (a single cell).
    For ``w = 1`` the step is irrelevant and ``q`` is NaN.
    """

    k: int
    w: int
    q: float
    recon: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.w < 0:
            raise ValueError("w must be non-negative")
        if self.w >= 2 and not (self.q > 0):
            raise ValueError(f"step must be positive for w={self.w}, got {self.q}")

    @property
    def L(self) -> int:
        return 1 << self.w

    @property
    def thresholds(self) -> np.ndarray:
        if self.w == 0:
            return np.empty(0)
        if self.w == 1:
            return np.zeros(1)
        return uniform_thresholds(self.w, self.q)

    @property
    def boundaries(self) -> np.ndarray:
        """All ``L + 1`` boundaries including the infinite ends."""
        return np.concatenate([[-np.inf], self.thresholds, [np.inf]])

    def with_recon(self, recon) -> "PerBitQuantizer":
        return PerBitQuantizer(self.k, self.w, self.q, np.asarray(recon, dtype=float))

    def reconstruct(self, v) -> np.ndarray:
        if self.recon is None:
            raise ValueError("quantizer has no reconstruction table")
        return self.recon[np.asarray(v) - 1]


def quantize(llr, quantizer: PerBitQuantizer):
    """Map LLR value(s) to 1-based cell indices."""
    v = np.searchsorted(quantizer.thresholds, llr, side="right") + 1
    return int(v) if np.ndim(v) == 0 else v


def reconstruction_levels(p_cond: np.ndarray) -> np.ndarray:
    """``ln(p(v|1) / p(v|0))`` per cell, clamped to ``+-ln(1e12)``."""
    p0, p1 = p_cond[:, 0], p_cond[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log(p1) - np.log(p0)
    r = np.where((p0 == 0) & (p1 == 0), 0.0, r)
    return np.clip(r, -RECON_CLAMP, RECON_CLAMP)
