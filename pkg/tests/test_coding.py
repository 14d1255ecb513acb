import math

import numpy as np
import pytest

from molchan import coding, fpt, infotheory as it, permchan as pc, receiver as rc
from molchan.blocks import all_blocks, identity_channel

PINNED = fpt.FptModel(diff_coeff=0.25, distance=1.0, drift=1.0)


def test_block_code_validation_and_rate():
    code = coding.BlockCode(np.array([[0, 0, 0], [1, 1, 1]], dtype=np.int8))
    assert code.m_codewords == 2 and code.n == 3
    assert code.rate == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        coding.BlockCode(np.array([[0, 1], [0, 1]], dtype=np.int8))


def test_random_code_shapes_and_limits():
    single = coding.random_code(1, 4, [0.5, 0.5], np.random.default_rng(0))
    assert single.m_codewords == 1 and single.rate == 0.0
    full = coding.random_code(8, 3, [0.5, 0.5], np.random.default_rng(1))
    assert sorted(map(tuple, full.codewords.tolist())) == \
        sorted(map(tuple, all_blocks(3, 2).tolist()))
    assert full.rate == pytest.approx(1.0)
    with pytest.raises(ValueError):
        coding.random_code(9, 3, [0.5, 0.5], np.random.default_rng(2))


def test_random_code_golden_pinned_seed():
    code = coding.random_code(4, 8, [0.5, 0.5], np.random.default_rng(1234))
    golden = [
        (1, 0, 1, 0, 0, 0, 0, 0), (1, 0, 0, 1, 1, 1, 1, 1),
        (1, 0, 0, 1, 0, 1, 1, 1), (0, 1, 0, 1, 0, 0, 1, 0),
    ]
    assert [tuple(int(s) for s in cw) for cw in code.codewords] == golden


def test_ml_decode_hand_example_and_ties():
    code = coding.BlockCode(np.array([[0, 0, 0], [1, 1, 1]], dtype=np.int8))
    ch = rc.dmc_block(rc.bsc(0.1), 3)
    # y = 001 is Hamming-nearest the first codeword
    assert coding.ml_decode([[0, 0, 1]], code, ch).tolist() == [0]
    assert coding.ml_decode([[1, 1, 0]], code, ch).tolist() == [1]
    flat = rc.BlockChannel(n=1, in_alphabet=2, out_alphabet=2,
                           matrix=np.array([[0.5, 0.5], [0.5, 0.5]]))
    two = coding.BlockCode(np.array([[0], [1]], dtype=np.int8))
    # equal likelihoods resolve to the first codeword
    assert coding.ml_decode([[0], [1]], two, flat).tolist() == [0, 0]


def test_ml_decode_kernel_and_matrix_routes_agree():
    rng = np.random.default_rng(3)
    code = coding.random_code(5, 3, [0.5, 0.5], rng)
    kernel_ch = rc.dmc_block(rc.bsc(0.23), 3)
    matrix_only = rc.BlockChannel(n=3, in_alphabet=2, out_alphabet=2,
                                  matrix=kernel_ch.matrix)
    ys = rng.integers(0, 2, size=(200, 3)).astype(np.int8)
    assert np.array_equal(coding.ml_decode(ys, code, kernel_ch),
                          coding.ml_decode(ys, code, matrix_only))


def test_hamming_decode_equals_ml_for_bsc():
    rng = np.random.default_rng(4)
    code = coding.random_code(6, 5, [0.5, 0.5], rng)
    ch = rc.dmc_block(rc.bsc(0.2), 5)
    ys = rng.integers(0, 2, size=(300, 5)).astype(np.int8)
    assert np.array_equal(coding.hamming_decode(ys, code),
                          coding.ml_decode(ys, code, ch))


def test_ml_decode_requires_exact_law():
    code = coding.BlockCode(np.array([[0, 0], [1, 1]], dtype=np.int8))
    sampler_only = rc.BlockChannel(n=2, in_alphabet=2, out_alphabet=2,
                                   sampler=lambda x, r: x)
    with pytest.raises(ValueError):
        coding.ml_decode([[0, 1]], code, sampler_only)


def test_evaluate_code_noiseless_and_coin_channel():
    code = coding.BlockCode(np.array([[0, 0, 0], [1, 1, 1]], dtype=np.int8))
    ev0 = coding.evaluate_code(code, identity_channel(3, 2), 1000,
                               np.random.default_rng(5), decoder="ml")
    assert ev0.lambda_max == 0.0

    flat = rc.BlockChannel(n=3, in_alphabet=2, out_alphabet=2,
                           matrix=np.full((8, 8), 1 / 8),
                           kernel=np.array([[0.5, 0.5], [0.5, 0.5]]))
    ev = coding.evaluate_code(code, flat, 4000, np.random.default_rng(6), decoder="ml")
    se = math.sqrt(0.25 / 4000)
    assert ev.lambda_max >= 0.5 - 3 * se
    with pytest.raises(ValueError):
        coding.evaluate_code(code, flat, 10, np.random.default_rng(7))


def test_evaluate_repetition_code_golden():
    # two or three flips: 3 p^2 (1-p) + p^3 = 0.028 at p = 0.1
    code = coding.BlockCode(np.array([[0, 0, 0], [1, 1, 1]], dtype=np.int8))
    ch = rc.dmc_block(rc.bsc(0.1), 3)
    ev = coding.evaluate_code(code, ch, 100_000, np.random.default_rng(8), decoder="ml")
    assert ev.lambda_max == pytest.approx(0.028, abs=0.005)


def test_ml_minimizes_average_error_pointwise():
    # average error decomposes per output block, so checking the picked
    # codeword maximizes the likelihood at every y is an exhaustive search
    # over all decoders
    rng = np.random.default_rng(9)
    for n, m_codewords in ((2, 3), (3, 4)):
        code = coding.random_code(m_codewords, n, [0.5, 0.5], rng)
        ch = rc.dmc_block(rc.bsc(0.15), n)
        ys = all_blocks(n, 2)
        picks = coding.ml_decode(ys, code, ch)
        liks = np.stack([ch.row(cw) for cw in code.codewords])  # (M, 2^n)
        for yi in range(ys.shape[0]):
            assert liks[picks[yi], yi] == pytest.approx(liks[:, yi].max(), rel=1e-9)


def test_error_monotone_in_bsc_noise():
    rng = np.random.default_rng(10)
    code = coding.random_code(4, 8, [0.5, 0.5], rng)
    trials = 20_000
    evs = {}
    for p in (0.05, 0.15):
        ch = rc.dmc_block(rc.bsc(p), 8)
        evs[p] = coding.evaluate_code(code, ch, trials, np.random.default_rng(11),
                                      decoder="ml")
    se = 3 * math.sqrt(0.25 / trials)
    assert evs[0.05].lambda_max <= evs[0.15].lambda_max + 3 * se


def test_experiment_noiseless_channel_and_rate_guard():
    factory = lambda n: identity_channel(n, 2)
    rows = coding.coding_theorem_experiment(
        factory, 1.0, [4, 6], [0.5], np.random.default_rng(12), trials=1000,
        codes_per_rate=2, decoder="ml", decode_channel_factory=factory)
    assert all(r.lambda_best == 0.0 for r in rows)
    with pytest.raises(ValueError):
        coding.coding_theorem_experiment(
            factory, 1.0, [4], [1.5], np.random.default_rng(13), trials=1000)


def test_source_channel_noiseless_identity():
    res = coding.source_channel_experiment(
        np.array([0.5, 0.5]), identity_channel(8, 2), 8, 2000,
        np.random.default_rng(14), rate=0.9, decoder="hamming")
    # uniform source at rate 0.9: typical-set misses dominate, decoding is clean
    assert res.p_error == pytest.approx(res.typical_miss, abs=0.02)


def test_source_channel_entropy_guard():
    quaternary = np.full(4, 0.25)  # two bits per symbol cannot ride a binary symbol
    with pytest.raises(ValueError):
        coding.source_channel_experiment(quaternary, identity_channel(4, 2), 4,
                                         1000, np.random.default_rng(15), rate=0.5)
    with pytest.raises(ValueError):
        coding.source_channel_experiment(np.array([0.5, 0.5]), identity_channel(4, 2),
                                         4, 1000, np.random.default_rng(16), rate=1.0)


def test_source_channel_bernoulli_over_near_noiseless_molecular():
    # pilot-pinned: gap-4 schedule and a 0.002-crossover receiver leave the
    # typical-set index mostly intact at rate 3/4
    window = pc.Window(start=0, length=16, margin=4)
    channel = rc.molecular_channel(window, fpt.Synchronous(4.0), PINNED,
                                   rc.dmc_block(rc.bsc(0.002), 16))
    res = coding.source_channel_experiment(
        np.array([0.89, 0.11]), channel, 16, 3000, np.random.default_rng(99),
        rate=0.75, decoder="hamming")
    assert res.source_entropy == pytest.approx(it.binary_entropy(0.11), abs=1e-12)
    assert res.p_error < 0.1
