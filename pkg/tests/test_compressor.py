import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llrquant.compressor import (HuffmanCodebook, build_huffman, build_loss_table, canonical_codes,
                                 compress_word, compress_words, decode, delta_loss, encode,
                                 huffman_lengths, iteration_cap, loss_matrix, pack_words,
                                 unpack_words, word_length)
from llrquant.design import bgmi
from llrquant.errors import InfeasibleBudget, MalformedWord

weights = st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=32)


def test_huffman_examples():
    assert huffman_lengths([0.25] * 4).tolist() == [2, 2, 2, 2]
    assert huffman_lengths([0.5, 0.25, 0.125, 0.125]).tolist() == [1, 2, 3, 3]
    assert huffman_lengths([1.0]).tolist() == [0]


@settings(max_examples=100, deadline=None)
@given(weights)
def test_huffman_kraft_and_entropy_bound(w):
    p = np.array(w) / sum(w)
    ln = huffman_lengths(p)
    assert sum(2.0 ** -ln) == pytest.approx(1.0)
    h = -(p * np.log2(p)).sum()
    assert h - 1e-9 <= (p * ln).sum() <= h + 1 + 1e-9


@settings(max_examples=100, deadline=None)
@given(weights)
def test_canonical_codes_are_prefix_free(w):
    ln = huffman_lengths(w)
    codes = canonical_codes(ln)
    words = [format(int(c), f"0{int(n)}b") for c, n in zip(codes, ln)]
    for a, b in itertools.permutations(words, 2):
        assert not b.startswith(a)


def _pmfs(rng, L_list):
    out = []
    for L in L_list:
        p = rng.dirichlet(np.ones(L), size=2).T
        out.append(p)
    return out


def _brute_delta(p, a, c):
    q = p.copy()
    q[c - 1] += q[a - 1]
    q[a - 1] = 0
    return bgmi(p) - bgmi(q)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 4, 8, 16]))
def test_delta_matches_brute_force(seed, L):
    p = _pmfs(np.random.default_rng(seed), [L])[0]
    d = loss_matrix(p)
    assert np.all(d >= 0) and np.all(np.diag(d) == 0)
    for a in range(1, L + 1):
        for c in range(1, L + 1):
            if a != c:
                assert d[a - 1, c - 1] == pytest.approx(_brute_delta(p, a, c), abs=1e-12)


def test_delta_loss_indexing():
    p = np.array([[0.6, 0.1], [0.3, 0.3], [0.1, 0.6]])
    assert delta_loss(1, 1, 2, [p]) == pytest.approx(_brute_delta(p, 1, 2), abs=1e-15)


def _setup(M_L=(4, 4, 2), seed=0):
    pmfs = _pmfs(np.random.default_rng(seed), M_L)
    cb = build_huffman([p.mean(axis=1) for p in pmfs])
    return pmfs, cb, build_loss_table(pmfs, cb)


def test_word_length_and_noop_when_fits():
    pmfs, cb, lt = _setup()
    v = np.array([1, 2, 1])
    n = word_length(v, cb)
    assert n == sum(int(cb.positions[k].lengths[v[k] - 1]) for k in range(3))
    np.testing.assert_array_equal(compress_word(v, cb, lt, n), v)


def test_small_compression_example():
    # position 1: cells 1, 2 common and short; 3, 4 rare
    p = np.array([[0.45, 0.05], [0.05, 0.45], [0.45, 0.05], [0.05, 0.45]])
    marg = np.array([0.5, 0.3, 0.15, 0.05])
    cb = build_huffman([marg])
    assert cb.positions[0].lengths.tolist() == [1, 2, 3, 3]
    lt = build_loss_table([p], cb)
    # index 4 (3 bits) into a 2-bit budget must move to index 2, the only shorter cell
    # with the same likely bit
    assert compress_word([4], cb, lt, 2).tolist() == [2]
    assert compress_word([4], cb, lt, 1).tolist() == [1]
    with pytest.raises(InfeasibleBudget):
        compress_word([4], cb, lt, 0)


def _is_greedy_valid(v, vh, cb, budget):
    assert word_length(vh, cb) <= budget
    m = cb.length_table()
    for k in range(cb.n):
        if vh[k] != v[k]:
            assert m[k, vh[k] - 1] < m[k, v[k] - 1]


@pytest.mark.parametrize("seed", range(5))
def test_scalar_and_vectorized_agree(seed):
    pmfs, cb, lt = _setup((8, 8, 4, 4, 2), seed)
    rng = np.random.default_rng(seed + 100)
    v = np.column_stack([rng.integers(1, p.shape[0] + 1, 400) for p in pmfs])
    budget = cb.min_length() + 3
    vh, subs = compress_words(v, cb, lt, budget)
    for i in range(len(v)):
        s = compress_word(v[i], cb, lt, budget)
        np.testing.assert_array_equal(vh[i], s)
        _is_greedy_valid(v[i], s, cb, budget)
        assert subs[i] <= iteration_cap(word_length(v[i], cb), budget, [p.shape[0] for p in pmfs])


@pytest.mark.parametrize("seed", range(3))
def test_encode_decode_round_trip(seed):
    pmfs, cb, lt = _setup((8, 4, 4, 2), seed)
    rng = np.random.default_rng(seed)
    budget = cb.min_length() + 4
    for _ in range(200):
        v = np.array([rng.integers(1, p.shape[0] + 1) for p in pmfs])
        vh = compress_word(v, cb, lt, budget)
        payload = encode(vh, cb, budget)
        assert len(payload) == budget
        np.testing.assert_array_equal(decode(payload, cb), vh)


def test_decode_rejects_truncated_word():
    cb = build_huffman([np.array([0.5, 0.25, 0.125, 0.125])])
    with pytest.raises(MalformedWord):
        decode(np.array([1, 1], dtype=np.uint8), cb)


def test_encode_rejects_overlong():
    cb = build_huffman([np.array([0.5, 0.25, 0.125, 0.125])])
    with pytest.raises(InfeasibleBudget):
        encode([4], cb, 2)


def test_pack_unpack():
    rng = np.random.default_rng(3)
    words = rng.integers(0, 2, (7, 13)).astype(np.uint8)
    image = pack_words(words)
    assert len(image) == (7 * 13 + 7) // 8
    np.testing.assert_array_equal(unpack_words(image, 13, 7), words)
    # bit 0 of the stream is the least significant bit of byte 0
    assert pack_words([[1, 0, 0, 0, 0, 0, 0, 0]]) == b"\x01"


def test_codebook_round_trip():
    _, cb, _ = _setup()
    u = HuffmanCodebook.from_dict(cb.to_dict())
    np.testing.assert_array_equal(u.length_table(), cb.length_table())


def test_zero_probability_symbols_stay_encodable():
    cb = build_huffman([np.array([0.7, 0.3, 0.0, 0.0])])
    for v in range(1, 5):
        np.testing.assert_array_equal(decode(encode([v], cb, 8), cb), [v])
