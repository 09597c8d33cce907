"""
De-interleaver memory accounting for conventional and quantized receivers.

Sizes are exact bit counts. Display values use Mbit = 10**6 bits truncated to
two decimals; savings are truncated to one decimal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

CONV = "CONV"
QUANT = "QUANT"
QUANT_COMP = "QUANT_COMP"

# DVB-C2 worst case: 16 OFDM blocks x 3236 cells, 64800-bit LDPC frames
N_S_DVBC2 = 51776
N_B_DVBC2 = 64800


def truncate(x: float, digits: int) -> float:
    f = 10**digits
    return math.floor(x * f + 1e-9) / f


@dataclass(frozen=True)
class MemoryReport:
    scheme: str
    N_S: int
    N_B: int
    M: int
    W: int
    B_S: int | None = None
    B_H: int | None = None
    N_bar: int | None = None

    @property
    def sd_bits(self) -> int:
        if self.scheme == CONV:
            return self.N_S * (2 * self.B_S + self.B_H)
        return self.N_S * self.N_bar

    @property
    def bd_bits(self) -> int:
        nbits = int(round(math.log2(self.M))) if self.M > 1 else 1
        num = self.N_B * self.W
        if num % nbits:
            raise ValueError("N_B * W must be a multiple of log2(M)")
        return num // nbits

    @property
    def total_bits(self) -> int:
        return self.sd_bits + self.bd_bits

    def mbit(self) -> tuple[float, float, float]:
        """``(SD, BD, total)`` in Mbit, truncated to two decimals."""
        return tuple(truncate(b / 1e6, 2) for b in (self.sd_bits, self.bd_bits, self.total_bits))

    def savings(self, reference: "MemoryReport") -> float:
        """Percent saved relative to ``reference``, truncated to one decimal."""
        if reference.total_bits == 0:
            return 0.0
        return truncate(100.0 * (1.0 - self.total_bits / reference.total_bits), 1)


def conv_memory(N_S: int, B_S: int, B_H: int, N_B: int, W: int, M: int) -> MemoryReport:
    """Conventional receiver storing the received sample and channel gain per cell."""
    return MemoryReport(CONV, N_S, N_B, M, W, B_S=B_S, B_H=B_H)


def proposed_memory(N_S: int, N_bar: int | None, N_B: int, W: int, M: int,
                    compressed: bool = False) -> MemoryReport:
    """Receiver storing quantized (and optionally compressed) LLR words."""
    if not compressed:
        if N_bar is not None and N_bar != W:
            raise ValueError("without compression the word size equals W")
        N_bar = W
    return MemoryReport(QUANT_COMP if compressed else QUANT, N_S, N_B, M, W, N_bar=N_bar)


def table6():
    """Rows ``(target, report, reference)`` of the DVB-C2 memory comparison."""
    rows = []
    for target, bs, bh, wq, (wc, nc) in (("0.1 dB", 15, 14, 38, (42, 32)),
                                          ("0.2 dB", 14, 13, 32, (36, 29))):
        ref = conv_memory(N_S_DVBC2, bs, bh, N_B_DVBC2, 60, 4096)
        rows.append((target, ref, None))
        rows.append((target, proposed_memory(N_S_DVBC2, None, N_B_DVBC2, wq, 4096), ref))
        rows.append((target, proposed_memory(N_S_DVBC2, nc, N_B_DVBC2, wc, 4096, compressed=True), ref))
    return rows


def write_table_csv(rows, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["target", "scheme", "B_S", "B_H", "W", "N_bar", "sd_bits", "bd_bits",
                     "total_bits", "sd_mbit", "bd_mbit", "total_mbit", "saved_pct"])
        for target, rep, ref in rows:
            sd, bd, tot = rep.mbit()
            wr.writerow([target, rep.scheme, rep.B_S or "", rep.B_H or "", rep.W,
                         rep.N_bar or "", rep.sd_bits, rep.bd_bits, rep.total_bits,
                         f"{sd:.2f}", f"{bd:.2f}", f"{tot:.2f}",
                         "" if ref is None else f"{rep.savings(ref):.1f}"])
