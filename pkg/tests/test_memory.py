import csv

import pytest

from llrquant.memory import (CONV, QUANT, QUANT_COMP, N_B_DVBC2, N_S_DVBC2, conv_memory,
                             proposed_memory, table6, truncate, write_table_csv)


def test_truncate():
    assert truncate(1.969, 2) == 1.96
    assert truncate(16.59, 1) == 16.5
    # values that are exact in decimal are not pushed down by float error
    assert truncate(0.29, 2) == 0.29


def test_conventional_bits():
    r = conv_memory(N_S_DVBC2, 15, 14, N_B_DVBC2, 60, 4096)
    assert r.sd_bits == 51776 * 44
    assert r.bd_bits == 64800 * 5
    assert r.total_bits == r.sd_bits + r.bd_bits
    assert r.scheme == CONV


def test_proposed_bits():
    q = proposed_memory(N_S_DVBC2, None, N_B_DVBC2, 38, 4096)
    assert q.scheme == QUANT and q.N_bar == 38
    assert q.sd_bits == 51776 * 38 and q.bd_bits == 64800 * 38 // 12
    c = proposed_memory(N_S_DVBC2, 32, N_B_DVBC2, 42, 4096, compressed=True)
    assert c.scheme == QUANT_COMP
    # the bit-deinterleaver still holds the full W-bit quantized words
    assert c.sd_bits == 51776 * 32 and c.bd_bits == 64800 * 42 // 12
    with pytest.raises(ValueError):
        proposed_memory(N_S_DVBC2, 30, N_B_DVBC2, 38, 4096)


def test_bd_divisibility():
    with pytest.raises(ValueError):
        proposed_memory(10, None, 7, 5, 4096).bd_bits


def test_table6_savings():
    rows = table6()
    assert [r.scheme for _, r, _ in rows] == [CONV, QUANT, QUANT_COMP] * 2
    saved = [r.savings(ref) for _, r, ref in rows if ref is not None]
    assert saved == [16.5, 27.6, 25.2, 30.6]
    assert rows[0][1].savings(rows[0][1]) == 0.0


def test_csv(tmp_path):
    write_table_csv(table6(), tmp_path / "m.csv")
    with open(tmp_path / "m.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert rows[0]["saved_pct"] == "" and rows[1]["saved_pct"] == "16.5"
    assert int(rows[0]["total_bits"]) == 51776 * 44 + 64800 * 5
