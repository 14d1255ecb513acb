import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molchan import fpt, infotheory as it, permchan as pc, receiver as rc
from molchan.blocks import all_blocks, identity_channel

PINNED = fpt.FptModel(diff_coeff=0.25, distance=1.0, drift=1.0)


def bern_prod(p, n):
    return it.FiniteDistribution.from_dense(it.iid_product([1 - p, p], n), n, 2)


def pinned_molecular(n):
    window = pc.Window(start=0, length=n, margin=4)
    return rc.molecular_channel(window, fpt.Synchronous(1.0), PINNED,
                                rc.dmc_block(rc.bsc(0.05), n))


def test_variational_distance_basics():
    p = it.FiniteDistribution(np.array([[0], [1]]), [0.7, 0.3])
    q = it.FiniteDistribution(np.array([[0], [1]]), [0.5, 0.5])
    assert it.variational_distance(p, q) == pytest.approx(0.2, abs=1e-12)
    assert it.variational_distance(p, p) == 0.0
    a = it.FiniteDistribution(np.array([[0, 0]]), [1.0])
    b = it.FiniteDistribution(np.array([[1, 1]]), [1.0])
    assert it.variational_distance(a, b) == 1.0
    with pytest.raises(ValueError):
        it.variational_distance(p, a)


def test_distribution_validation():
    with pytest.raises(ValueError):
        it.FiniteDistribution(np.array([[0], [1]]), [0.6, 0.6])
    with pytest.raises(ValueError):
        it.FiniteDistribution(np.array([[0], [1]]), [1.2, -0.2])


def test_hamming_cost():
    assert it.hamming_cost((0, 1, 1, 0), (0, 0, 1, 0)) == 0.25
    assert it.hamming_cost((1, 1), (1, 1)) == 0.0
    assert it.hamming_cost((0, 1), (1, 0)) == 1.0
    with pytest.raises(ValueError):
        it.hamming_cost((0, 1), (0, 1, 1))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.data())
def test_hamming_is_a_metric(n, data):
    blk = st.lists(st.integers(0, 2), min_size=n, max_size=n)
    u, v, w = data.draw(blk), data.draw(blk), data.draw(blk)
    duv = it.hamming_cost(u, v)
    assert duv == it.hamming_cost(v, u)
    assert 0.0 <= duv <= 1.0
    assert (duv == 0.0) == (u == v)
    assert duv <= it.hamming_cost(u, w) + it.hamming_cost(w, v) + 1e-12


def test_dbar_exact_golden_cases():
    p = bern_prod(0.3, 2)
    same, coupling = it.dbar_exact(p, p)
    assert same <= 1e-12
    assert np.allclose(coupling.table.sum(axis=1), p.probs, atol=1e-9)

    u = it.FiniteDistribution(np.array([[0, 1, 1, 0]]), [1.0])
    w = it.FiniteDistribution(np.array([[0, 0, 1, 0]]), [1.0])
    point, _ = it.dbar_exact(u, w)
    assert point == pytest.approx(0.25, abs=1e-12)

    # per-letter maximal coupling gives |p - q|; the mean-difference bound
    # matches it from below, so the product value is exactly 0.2
    prod, _ = it.dbar_exact(bern_prod(0.3, 2), bern_prod(0.5, 2))
    assert prod == pytest.approx(0.2, abs=1e-9)


def test_dbar_exact_guard():
    big_p = it.FiniteDistribution(all_blocks(11, 2), np.full(2048, 1 / 2048))
    with pytest.raises(ValueError):
        it.dbar_exact(big_p, big_p)


def test_dbar_metric_properties_quick():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        blocks = all_blocks(n, 2)
        def rand_dist():
            k = int(rng.integers(1, blocks.shape[0] + 1))
            sel = rng.choice(blocks.shape[0], size=k, replace=False)
            pr = rng.random(k) + 1e-3
            return it.FiniteDistribution(blocks[sel], pr / pr.sum())
        a, b, c = rand_dist(), rand_dist(), rand_dist()
        dab, _ = it.dbar_exact(a, b)
        dba, _ = it.dbar_exact(b, a)
        dac, _ = it.dbar_exact(a, c)
        dcb, _ = it.dbar_exact(c, b)
        assert abs(dab - dba) <= 1e-9
        assert dab <= dac + dcb + 1e-9


def test_dbar_empirical_degenerate_and_calibrated():
    def shared_seed_sampler(count, rng):
        return np.random.default_rng(123).integers(0, 2, size=(count, 3)).astype(np.int8)

    est = it.dbar_empirical(shared_seed_sampler, shared_seed_sampler, 3, 2000,
                            np.random.default_rng(0))
    assert est.value == 0.0

    a = np.array([0, 1, 1, 0], dtype=np.int8)
    b = np.array([0, 0, 1, 0], dtype=np.int8)
    est_pt = it.dbar_empirical(lambda c, r: np.tile(a, (c, 1)),
                               lambda c, r: np.tile(b, (c, 1)), 4, 1000,
                               np.random.default_rng(1))
    assert est_pt.value == pytest.approx(0.25, abs=1e-12)

    rng = np.random.default_rng(2)
    p_sampler = lambda c, r: (r.random((c, 2)) < 0.3).astype(np.int8)
    q_sampler = lambda c, r: (r.random((c, 2)) < 0.5).astype(np.int8)
    est_b = it.dbar_empirical(p_sampler, q_sampler, 2, 10_000, rng)
    assert est_b.value == pytest.approx(0.2, abs=0.02)
    # the empirical matching over-estimates in expectation
    exact, _ = it.dbar_exact(bern_prod(0.3, 2), bern_prod(0.5, 2))
    assert exact <= est_b.value + 3 * est_b.se

    with pytest.raises(ValueError):
        it.dbar_empirical(p_sampler, q_sampler, 2, 500, rng)


def test_entropy_values():
    assert it.entropy([1.0]) == pytest.approx(0.0, abs=1e-15)
    assert it.entropy([0.5, 0.5]) == 1.0
    # direct formula evaluation, kept independent of the implementation
    want = -(0.11 * math.log2(0.11) + 0.89 * math.log2(0.89))
    assert it.binary_entropy(0.11) == pytest.approx(want, abs=1e-12)
    assert abs(it.binary_entropy(0.11) - 0.4999) <= 1e-3


def test_mutual_information_exact_cases():
    assert it.mutual_information_exact([0.5, 0.5], identity_channel(1, 2)) == \
        pytest.approx(1.0, abs=1e-12)
    flat = rc.BlockChannel(n=1, in_alphabet=2, out_alphabet=2,
                           matrix=np.array([[0.4, 0.6], [0.4, 0.6]]))
    assert abs(it.mutual_information_exact([0.5, 0.5], flat)) <= 1e-12
    bsc11 = rc.dmc_block(rc.bsc(0.11), 1)
    assert it.mutual_information_exact([0.5, 0.5], bsc11) == \
        pytest.approx(1 - it.binary_entropy(0.11), abs=1e-3)
    sampler_only = rc.BlockChannel(n=1, in_alphabet=2, out_alphabet=2,
                                   sampler=lambda x, r: x)
    with pytest.raises(ValueError):
        it.mutual_information_exact([0.5, 0.5], sampler_only)


def test_sample_mutual_information_cases():
    iden = identity_channel(2, 2)
    src = it.iid_product([0.5, 0.5], 2)
    assert it.sample_mutual_information((0, 1), (0, 1), src, iden) == \
        pytest.approx(1.0, abs=1e-12)
    flat = rc.BlockChannel(n=1, in_alphabet=2, out_alphabet=2,
                           matrix=np.array([[0.4, 0.6], [0.4, 0.6]]))
    assert it.sample_mutual_information((1,), (0,), [0.5, 0.5], flat) == \
        pytest.approx(0.0, abs=1e-12)
    with pytest.raises(it.ZeroProbabilityError):
        it.sample_mutual_information((0, 1), (1, 0), src, iden)


def test_sample_mutual_information_golden_pinned_pair():
    # all-zero pair at blocklength 8: per-letter ratio is log2(2 * 0.89)
    ch = rc.dmc_block(rc.bsc(0.11), 8)
    src = it.iid_product([0.5, 0.5], 8)
    want = 1 + math.log2(0.89)
    got = it.sample_mutual_information((0,) * 8, (0,) * 8, src, ch)
    assert got == pytest.approx(want, abs=1e-12)


def test_mean_sample_information_equals_mutual_information():
    ch = rc.dmc_block(rc.DmcSpec(np.array([[0.7, 0.2, 0.1],
                                           [0.1, 0.6, 0.3],
                                           [0.25, 0.25, 0.5]])), 2)
    src = it.iid_product([0.2, 0.5, 0.3], 2)
    joint = it.joint_table(src, ch)
    blocks = all_blocks(2, 3)
    acc = 0.0
    for xi in range(9):
        for yi in range(9):
            if joint[xi, yi] > 0:
                acc += joint[xi, yi] * it.sample_mutual_information(
                    blocks[xi], blocks[yi], src, ch)
    assert acc == pytest.approx(it.mutual_information_exact(src, ch), abs=1e-9)


def test_draw_mi_samples_matches_table_route():
    kernel = rc.bsc(0.11).matrix
    vals, excluded = it.draw_mi_samples([0.5, 0.5], kernel, 3, 4000,
                                        np.random.default_rng(5))
    assert excluded == 0
    ch = rc.dmc_block(rc.bsc(0.11), 3)
    src = it.iid_product([0.5, 0.5], 3)
    table_vals = {
        round(it.sample_mutual_information(x, y, src, ch), 9)
        for x in all_blocks(3, 2) for y in all_blocks(3, 2)
    }
    assert {round(float(v), 9) for v in vals} <= table_vals


def test_quantile_capacity_conventions():
    assert it.quantile_capacity([2.5] * 10, 0.05) == 2.5
    assert it.quantile_capacity([2.5] * 10, 0.9) == 2.5
    xs = list(range(1, 11))
    assert it.quantile_capacity(xs, 0.05) == 1
    assert it.quantile_capacity(xs, 0.2) == 2
    assert it.quantile_capacity(xs, 0.25) == 3
    assert it.quantile_capacity([1.0] * 5, 0.999) == 1.0
    with pytest.raises(ValueError):
        it.quantile_capacity(xs, 0.0)
    with pytest.raises(ValueError):
        it.quantile_capacity([], 0.5)


def test_quantile_capacity_identity_channel_is_source_entropy():
    vals, _ = it.draw_mi_samples([0.5, 0.5], np.eye(2), 4, 2000,
                                 np.random.default_rng(6))
    for lam in (0.1, 0.05, 0.01):
        assert it.quantile_capacity(vals, lam) == 1.0


def test_quantile_capacity_bsc_matches_exact_order_statistic():
    # exact oracle: i takes value 1 + log2(0.89) + (d/16) log2(0.11/0.89)
    # with d binomial(16, 0.11); the 5% left quantile lands at d = 4
    vals, _ = it.draw_mi_samples([0.5, 0.5], rc.bsc(0.11).matrix, 16, 10_000,
                                 np.random.default_rng(7))
    d4 = 1 + math.log2(0.89) + (4 / 16) * math.log2(0.11 / 0.89)
    assert it.quantile_capacity(vals, 0.05) == pytest.approx(d4, abs=1e-9)


def test_adima_scan_exact_families():
    dmc = rc.finite_memory_channel(rc.bsc(0.2).matrix, w=0)
    rows = it.adima_scan(dmc, 3, [0, 1, 2], np.random.default_rng(0), pairs=8)
    assert all(g == 0.0 for _, g, _ in rows)

    kern = np.random.default_rng(1).random((8, 2))
    kern /= kern.sum(axis=1, keepdims=True)
    fmc = rc.finite_memory_channel(kern, w=2)
    rows2 = it.adima_scan(fmc, 4, [0, 1, 2, 3], np.random.default_rng(2), pairs=16)
    gaps = {m: g for m, g, _ in rows2}
    assert gaps[0] > 0 and gaps[1] > 0
    assert gaps[2] == 0.0 and gaps[3] == 0.0


def test_adima_scan_molecular_golden_curve():
    mol = pinned_molecular(3)
    rows = it.adima_scan(mol, 3, [0, 1, 2, 3, 4, 5], np.random.default_rng(777),
                         trials=10_000, pairs=8)
    golden = [(0, 0.2237), (1, 0.0307), (2, 0.008), (3, 0.0021), (4, 0.0013),
              (5, 0.0005)]
    assert [(m, round(g, 6)) for m, g, _ in rows] == golden
    gaps = [g for _, g, _ in rows]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_dbar_continuity_exact_families():
    dmc = rc.finite_memory_channel(rc.bsc(0.2).matrix, w=0)
    assert all(v == 0.0 for _, v, _ in
               it.dbar_continuity_scan(dmc, [2, 4], np.random.default_rng(3)))
    k1 = np.random.default_rng(4).random((4, 2))
    k1 /= k1.sum(axis=1, keepdims=True)
    fm = rc.finite_memory_channel(k1, w=1)
    for n, v, _ in it.dbar_continuity_scan(fm, [2, 4, 8], np.random.default_rng(5)):
        assert v <= 1.0 / n + 1e-9  # at most w boundary letters can differ


def test_dbar_continuity_molecular_golden():
    mol = pinned_molecular(3)
    rows = it.dbar_continuity_scan(mol, [2, 4, 6], np.random.default_rng(55),
                                   trials=4000, pairs=3)
    golden = [(2, 0.123875), (4, 0.079438), (6, 0.057875)]
    assert [(n, round(v, 6)) for n, v, _ in rows] == golden
    vals = [v for _, v, _ in rows]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_strong_mixing_scan_memoryless_and_trivial_events():
    dmc = rc.finite_memory_channel(rc.bsc(0.2).matrix, w=0)
    x = np.zeros(40, dtype=np.int8)
    # k = 2 is the first shift at which the two length-2 windows are disjoint
    rows = it.strong_mixing_scan(dmc, x, -10, (0, (0, 1)), (0, (1, 0)),
                                 [2, 4, 8], 20_000, np.random.default_rng(8))
    for k, g, s in rows:
        assert g <= 3 * s + 1e-9
    # whole-space events factorize exactly
    rows_triv = it.strong_mixing_scan(dmc, x, -10, (0, ()), (0, ()),
                                      [3], 1000, np.random.default_rng(9))
    assert rows_triv[0][1] == 0.0
    assert it.dmc_mixing_gap_exact(rc.bsc(0.2).matrix, x, -10,
                                   (0, (0, 1)), (0, (1, 0)), 5) <= 1e-15
    with pytest.raises(ValueError):
        it.strong_mixing_scan(dmc, x, -10, (0, (0, 1, 0, 1)), (0, (1,)),
                              [2], 1000, np.random.default_rng(10))


def test_ergodic_mean_check():
    sampler = lambda n, r: (r.random(n) < 0.3).astype(np.int8)
    assert it.ergodic_mean_check(sampler, (), 1000, np.random.default_rng(0)) == 1.0
    assert it.ergodic_mean_check(sampler, (2,), 1000, np.random.default_rng(1)) == 0.0
    mean = it.ergodic_mean_check(sampler, (1,), 100_000, np.random.default_rng(2))
    assert mean == pytest.approx(0.3, abs=0.005)
    with pytest.raises(ValueError):
        it.ergodic_mean_check(sampler, (1,), 0, np.random.default_rng(3))


def test_variational_contrast_with_flat_transport_distance():
    vs, ds = [], []
    for n in (1, 2, 4, 8, 12):
        p = it.iid_product([0.7, 0.3], n)
        q = it.iid_product([0.5, 0.5], n)
        vs.append(it.variational_distance_dense(p, q))
        if n <= 8:
            d, _ = it.dbar_exact(
                it.FiniteDistribution.from_dense(p, n, 2),
                it.FiniteDistribution.from_dense(q, n, 2))
            ds.append(d)
    assert all(a < b for a, b in zip(vs, vs[1:]))
    assert all(abs(d - 0.2) <= 1e-6 for d in ds)
    # blocklength 12 is beyond the exact guard: estimate empirically
    rng = np.random.default_rng(11)
    est = it.dbar_empirical(
        lambda c, r: (r.random((c, 12)) < 0.3).astype(np.int8),
        lambda c, r: (r.random((c, 12)) < 0.5).astype(np.int8),
        12, 10_000, rng)
    assert est.value == pytest.approx(0.2, abs=0.02)
