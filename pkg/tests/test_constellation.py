import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llrquant.constellation import (SUPPORTED_SIZES, build_qam, gray_code, llr_piecewise,
                                    min_distance_llr, pam_llr, piecewise_from_levels)
from llrquant.errors import DegenerateSegment, UnsupportedSize


@pytest.mark.parametrize("M", SUPPORTED_SIZES)
def test_qam_invariants(M):
    c = build_qam(M)
    assert len(np.unique(np.round(c.points, 12))) == M
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12
    as_int = c.labels.astype(np.int64) @ (1 << np.arange(c.nbits - 1, -1, -1))
    assert sorted(as_int) == list(range(M))
    # neighbours along each axis differ in exactly one label bit
    for lab in (c.pam_labels,):
        assert np.all(np.abs(np.diff(lab.astype(int), axis=0)).sum(axis=1) == 1)


def test_16qam_levels():
    c = build_qam(16)
    np.testing.assert_allclose(c.pam_levels, np.array([-3, -1, 1, 3]) / np.sqrt(10))


def test_4096_geometry():
    c = build_qam(4096)
    assert len(c.pam_levels) == 64 and c.nbits == 12 and c.bits_per_axis == 6


@pytest.mark.parametrize("M", [4, 8, 32, 100])
def test_unsupported(M):
    with pytest.raises(UnsupportedSize):
        build_qam(M)


def test_gray_code_is_gray():
    g = gray_code(6)
    assert all(bin(a ^ b).count("1") == 1 for a, b in zip(g[:-1], g[1:]))


def test_axis_assignment():
    c = build_qam(64)
    for k in range(1, 7):
        coord = np.imag(c.points) if k % 2 else np.real(c.points)
        # the bit is a function of the coordinate on its own axis
        for x in np.unique(np.round(coord, 9)):
            assert len(set(c.labels[np.isclose(coord, x), k - 1])) == 1
        assert c.axis_map(k).axis == ("imag" if k % 2 else "real")


def brute_llr(c, r, h, sigma2, k):
    d1 = np.min(np.abs(r - h * c.subset(k, 1)) ** 2)
    d0 = np.min(np.abs(r - h * c.subset(k, 0)) ** 2)
    return -(d1 - d0) / sigma2


@pytest.mark.parametrize("M", [16, 64, 256])
def test_min_distance_llr_matches_2d_search(M):
    c = build_qam(M)
    rng = np.random.default_rng(3)
    for _ in range(50):
        r = complex(*rng.normal(0, 0.8, 2))
        h = rng.uniform(0.2, 2.0)
        s2 = 10 ** rng.uniform(-3, 0)
        for k in range(1, c.nbits + 1):
            assert min_distance_llr(c, r, h, s2, k) == pytest.approx(brute_llr(c, r, h, s2, k), rel=1e-9, abs=1e-9)


def test_llr_sign_convention():
    c = build_qam(16)
    for idx, p in enumerate(c.points):
        for k in range(1, 5):
            lam = min_distance_llr(c, p, 1.0, 0.01, k)
            assert (lam > 0) == bool(c.labels[idx, k - 1])


def test_msb_segment_count_4096():
    assert llr_piecewise(build_qam(4096), 1).n_segments == 63


@settings(max_examples=200, deadline=None)
@given(M=st.sampled_from([16, 64, 256, 1024, 4096]), y=st.floats(-3, 3),
       h=st.floats(0.05, 3), s2=st.floats(1e-4, 1.0), kk=st.integers(0, 11))
def test_piecewise_matches_brute_force(M, y, h, s2, kk):
    c = build_qam(M)
    k = kk % c.nbits + 1
    pll = llr_piecewise(c, k)
    amap = c.axis_map(k)
    ref = pam_llr(y, amap.levels, amap.bits, h, s2)
    assert pll(y, h, s2) == pytest.approx(ref, rel=1e-9, abs=1e-9 * h * h / s2)


@pytest.mark.parametrize("M,k", list(itertools.product([16, 64, 256], [1, 2, 3])))
def test_piecewise_continuity(M, k):
    c = build_qam(M)
    k = min(k, c.nbits)
    pll = llr_piecewise(c, k)
    inner = pll.edges[1:-1]
    left = pll.slope[:-1] * inner + pll.intercept[:-1]
    right = pll.slope[1:] * inner + pll.intercept[1:]
    np.testing.assert_allclose(left, right, atol=1e-12)
    assert np.all(np.diff(inner) > 0)


def test_degenerate_segment():
    pll = piecewise_from_levels([-1.0, 1.0], [0, 1])
    bad = type(pll)(pll.k, pll.edges, np.zeros_like(pll.slope), pll.intercept, pll.near1,
                    pll.near0, pll.levels, pll.bits)
    with pytest.raises(DegenerateSegment):
        bad.preimages([0.5])
