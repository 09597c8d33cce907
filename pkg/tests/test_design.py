import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llrquant.constellation import build_qam, llr_piecewise
from llrquant.design import (DesignTable, QuantizerBank, allocate_bits, allocate_bits_exhaustive,
                             allocation_value, bank_from_allocation, best_scaling, bgmi,
                             bgmi_generalized, build_design_table, optimize_step, total_gmi,
                             unopt_bank, upper_convexity)
from llrquant.errors import ConfigError, InfeasibleBudget, TooLarge
from llrquant.llr_stats import ChannelModel, pmf_awgn
from llrquant.quantizer import PerBitQuantizer, reconstruction_levels


def test_bgmi_examples():
    assert bgmi([[1, 0], [0, 1]]) == pytest.approx(1.0)
    assert bgmi([[0.5, 0.5], [0.5, 0.5]]) == pytest.approx(0.0)
    # binary symmetric channel with crossover 0.1
    h = -(0.1 * math.log2(0.1) + 0.9 * math.log2(0.9))
    assert bgmi([[0.9, 0.1], [0.1, 0.9]]) == pytest.approx(1 - h)


pmf_strategy = st.lists(st.tuples(st.floats(1e-3, 1), st.floats(1e-3, 1)), min_size=2, max_size=8)


def _normalize(pairs):
    p = np.array(pairs, dtype=float)
    return p / p.sum(axis=0)


@settings(max_examples=60, deadline=None)
@given(pmf_strategy)
def test_matched_metric_attains_mi(pairs):
    p = _normalize(pairs)
    mi = bgmi(p)
    for x in (0.25, 1.0, 4.0):
        recon = np.log(p[:, 1] / p[:, 0]) / x
        assert bgmi_generalized(p, recon, x) == pytest.approx(mi, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(pmf_strategy, st.floats(0.1, 5), st.integers(0, 2**31 - 1))
def test_mismatched_metric_is_lower(pairs, x, seed):
    p = _normalize(pairs)
    recon = np.log(p[:, 1] / p[:, 0])
    noisy = recon + np.random.default_rng(seed).normal(0, 0.5, len(recon))
    assert bgmi_generalized(p, noisy, x) <= bgmi(p) + 1e-12
    # the product x * recon is all that matters
    assert bgmi_generalized(p, 2 * noisy, x / 2) == pytest.approx(bgmi_generalized(p, noisy, x), abs=1e-12)


def test_best_scaling_recovers_mi_for_scaled_metric():
    p = _normalize([(0.6, 0.1), (0.3, 0.2), (0.1, 0.7)])
    val, x = best_scaling(p, 3.0 * np.log(p[:, 1] / p[:, 0]))
    assert val == pytest.approx(bgmi(p), abs=1e-9)
    assert x == pytest.approx(1 / 3, rel=1e-4)


def test_data_processing():
    pll = llr_piecewise(build_qam(64), 3)
    s2 = 10 ** -1.6
    fine = pmf_awgn(PerBitQuantizer(3, 5, 0.4), pll, 1.0, s2).p_cond
    coarse = pmf_awgn(PerBitQuantizer(3, 4, 0.8), pll, 1.0, s2).p_cond
    # merging neighbouring cell pairs of the fine quantizer gives the coarse one
    np.testing.assert_allclose(fine.reshape(16, 2, 2).sum(axis=1), coarse, atol=1e-14)
    assert bgmi(coarse) <= bgmi(fine) + 1e-12


@pytest.fixture(scope="module")
def table16():
    return build_design_table(16, ChannelModel("awgn", 12.0), w_max=5, cache=None)


@pytest.fixture(scope="module")
def table64():
    return build_design_table(64, ChannelModel("awgn", 18.0), w_max=4, objective="mi", cache=None)


def test_table_shape_and_monotone(table16):
    assert table16.value.shape == (4, 6)
    assert np.all(table16.value[:, 0] == 0)
    assert np.all(np.diff(table16.mi, axis=1) >= -1e-9)
    assert np.all((table16.mi >= 0) & (table16.mi <= 1))


def test_gray_pair_copy_matches_direct_search(table16):
    r = optimize_step(2, 3, table16.channel, build_qam(16))
    assert r.q == pytest.approx(table16.q[1, 3], abs=1e-9)
    assert r.value == pytest.approx(table16.value[1, 3], abs=1e-12)


def test_direct_search_matches_gray_copy():
    t_pair = build_design_table(16, ChannelModel("awgn", 9.0), w_max=3, cache=None)
    t_full = build_design_table(16, ChannelModel("awgn", 9.0), w_max=3, cache=None, gray_pairs=False)
    np.testing.assert_allclose(t_full.value, t_pair.value, atol=1e-12)


@pytest.mark.parametrize("W", range(0, 21))
def test_greedy_equals_exhaustive_16qam(table16, W):
    if not upper_convexity(table16.value).all():
        pytest.skip("greedy optimality needs concave increments")
    g = allocate_bits(table16.value, W)
    e = allocate_bits_exhaustive(table16.value, W)
    assert g.sum() == W
    assert allocation_value(table16.value, g) == pytest.approx(allocation_value(table16.value, e), abs=1e-12)


@pytest.mark.parametrize("W", [0, 3, 7, 12, 17, 24])
def test_greedy_equals_exhaustive_64qam(table64, W):
    g = allocate_bits(table64.value, W)
    e = allocate_bits_exhaustive(table64.value, W)
    assert allocation_value(table64.value, g) == pytest.approx(allocation_value(table64.value, e), abs=1e-12)


def test_allocation_edge_cases(table16):
    assert allocate_bits(table16.value, 0).tolist() == [0, 0, 0, 0]
    assert allocate_bits(table16.value, 20).tolist() == [5, 5, 5, 5]
    with pytest.raises(InfeasibleBudget):
        allocate_bits(table16.value, 21)
    with pytest.raises(InfeasibleBudget):
        allocate_bits(table16.value, -1)
    with pytest.raises(TooLarge):
        allocate_bits_exhaustive(np.zeros((12, 9)), 30)


def test_greedy_tie_goes_to_smallest_index():
    t = np.array([[0, 1, 1.5], [0, 1, 1.5], [0, 1, 1.5]])
    assert allocate_bits(t, 1).tolist() == [1, 0, 0]
    assert allocate_bits(t, 4).tolist() == [2, 1, 1]


def test_table_round_trip(table16):
    u = DesignTable.from_dict(table16.to_dict())
    np.testing.assert_array_equal(u.value, table16.value)
    np.testing.assert_array_equal(np.isnan(u.q), np.isnan(table16.q))
    d = table16.to_dict()
    d["version"] = -1
    with pytest.raises(ConfigError):
        DesignTable.from_dict(d)


def test_cache_reuse(tmp_path):
    ch = ChannelModel("awgn", 10.0)
    a = build_design_table(16, ch, w_max=2, cache=tmp_path)
    assert len(list(tmp_path.glob("design-16-awgn-*.json"))) == 1
    b = build_design_table(16, ch, w_max=2, cache=tmp_path)
    np.testing.assert_array_equal(a.value, b.value)


def test_bank(table16):
    w = allocate_bits(table16.value, 10)
    bank = bank_from_allocation(table16, w)
    assert bank.W == 10 and bank.L.tolist() == [1 << int(x) for x in w]
    assert total_gmi(bank) == pytest.approx(table16.mi[np.arange(4), w].sum(), abs=1e-9)
    for qz, p in zip(bank.quantizers, bank.pmfs):
        np.testing.assert_allclose(qz.recon, reconstruction_levels(p.p_cond))
        assert np.all(np.diff(qz.recon) >= 0)
    u = QuantizerBank.from_dict(bank.to_dict())
    assert u.w.tolist() == bank.w.tolist()
    assert total_gmi(u) == pytest.approx(total_gmi(bank), abs=1e-12)


def test_optimized_allocation_beats_shared_quantizer(table64):
    # same total budget, the MI-objective table against one shared 3-bit quantizer
    opt = total_gmi(bank_from_allocation(table64, allocate_bits(table64.value, 18)))
    assert opt >= total_gmi(unopt_bank(64, 3, table64.channel)) - 1e-9


def test_invalid_objective():
    with pytest.raises(ConfigError):
        optimize_step(1, 2, ChannelModel("awgn", 10), build_qam(16), objective="bogus")
