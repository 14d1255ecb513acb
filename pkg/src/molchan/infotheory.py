"""Distances, information functionals, and the diagnostic scans.

Distributions over blocks are stored sparsely (observed outcomes + weights)
in canonical block-code order.  The per-letter-normalized Hamming transport
distance is solved exactly as a transportation LP; its empirical counterpart
matches equal batches of samples optimally and reports a batch standard
error.  Entropies and information quantities are in bits throughout.

Diagnostic scans accept two kinds of channel object, duck-typed:

  exact windowed law   .law(x_ext, x_start, out_lo, out_len) -> dense probs
                       .context_width
  Monte-Carlo          .batch_outputs(x_rows, x_start, trials, rng,
                                      share_noise=...) -> (rows, trials, n)
                       .sequence_outputs(x, x_start, out_lo, out_len,
                                         trials, rng) -> (trials, out_len)
                       .context_width

Sampled laws are compared under common random numbers, so two inputs that
agree on every influential symbol give gap exactly zero rather than
Monte-Carlo noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .blocks import BlockChannel, all_blocks, block_indices

DBAR_CELL_GUARD = 1_000_000


class ZeroProbabilityError(ValueError):
    """A sample pair has zero probability under the declared law."""


@dataclass
class FiniteDistribution:
    """Probabilities over a finite set of blocks, in canonical row order."""

    outcomes: np.ndarray  # (K, n) symbols
    probs: np.ndarray     # (K,)

    def __post_init__(self) -> None:
        self.outcomes = np.atleast_2d(np.asarray(self.outcomes))
        self.probs = np.asarray(self.probs, dtype=float)
        if self.outcomes.shape[0] != self.probs.shape[0]:
            raise ValueError("outcomes and probs must have equal length")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be nonnegative")
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1 within 1e-9, got {total}")
        key = np.lexsort(self.outcomes.T[::-1])
        self.outcomes = self.outcomes[key]
        self.probs = self.probs[key]

    @property
    def n(self) -> int:
        return self.outcomes.shape[1]

    @classmethod
    def from_dense(cls, probs, n: int, alphabet: int) -> "FiniteDistribution":
        return cls(outcomes=all_blocks(n, alphabet), probs=np.asarray(probs, dtype=float))

    @classmethod
    def from_samples(cls, blocks: np.ndarray) -> "FiniteDistribution":
        uniq, counts = np.unique(np.atleast_2d(blocks), axis=0, return_counts=True)
        return cls(outcomes=uniq, probs=counts / counts.sum())

    def dense(self, alphabet: int) -> np.ndarray:
        out = np.zeros(alphabet**self.n)
        out[block_indices(self.outcomes, alphabet)] = self.probs
        return out


@dataclass
class Coupling:
    """Joint table over outcome pairs with declared marginals."""

    table: np.ndarray
    row_outcomes: np.ndarray
    col_outcomes: np.ndarray
    row_probs: np.ndarray
    col_probs: np.ndarray

    def __post_init__(self) -> None:
        r = float(np.max(np.abs(self.table.sum(axis=1) - self.row_probs)))
        c = float(np.max(np.abs(self.table.sum(axis=0) - self.col_probs)))
        if max(r, c) > 1e-9:
            raise ValueError(f"coupling marginals off by {max(r, c):.3e}")


def variational_distance(p: FiniteDistribution, q: FiniteDistribution) -> float:
    """Half the L1 gap, which on finite spaces equals the sup over events."""
    if p.n != q.n:
        raise ValueError("distributions are over different block lengths")
    merged, pi, qi = _align(p, q)
    return float(0.5 * np.abs(pi - qi).sum())


def _align(p: FiniteDistribution, q: FiniteDistribution):
    """Union the supports and return aligned probability vectors."""
    both = np.concatenate([p.outcomes, q.outcomes], axis=0)
    uniq, inv = np.unique(both, axis=0, return_inverse=True)
    pv = np.zeros(uniq.shape[0])
    qv = np.zeros(uniq.shape[0])
    np.add.at(pv, inv[: p.outcomes.shape[0]], p.probs)
    np.add.at(qv, inv[p.outcomes.shape[0] :], q.probs)
    return uniq, pv, qv


def variational_distance_dense(p: np.ndarray, q: np.ndarray) -> float:
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


def hamming_cost(u_block, w_block) -> float:
    """Fraction of positions at which the blocks differ."""
    u = np.asarray(u_block)
    w = np.asarray(w_block)
    if u.shape != w.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {w.shape}")
    return float(np.mean(u != w))


def _cost_matrix(a_outcomes: np.ndarray, b_outcomes: np.ndarray) -> np.ndarray:
    return (a_outcomes[:, None, :] != b_outcomes[None, :, :]).mean(axis=2)


def dbar_exact(p: FiniteDistribution, q: FiniteDistribution) -> tuple[float, Coupling]:
    """Minimal expected normalized Hamming distortion over couplings.

    Solved as a dense transportation LP (HiGHS).  The product coupling is
    always feasible, so failure indicates a numerical problem and raises.
    """
    if p.n != q.n:
        raise ValueError("distributions are over different block lengths")
    k1, k2 = p.outcomes.shape[0], q.outcomes.shape[0]
    if k1 * k2 > DBAR_CELL_GUARD:
        raise ValueError(f"coupling table {k1}x{k2} exceeds guard {DBAR_CELL_GUARD}")
    cost = _cost_matrix(p.outcomes, q.outcomes)
    value, table = _transport(p.probs, q.probs, cost)
    coupling = Coupling(
        table=table,
        row_outcomes=p.outcomes,
        col_outcomes=q.outcomes,
        row_probs=p.probs,
        col_probs=q.probs,
    )
    return value, coupling


def _transport(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> tuple[float, np.ndarray]:
    k1, k2 = cost.shape
    if k1 == 1:
        return float(cost[0] @ b), b[None, :].copy()
    if k2 == 1:
        return float(a @ cost[:, 0]), a[:, None].copy()
    row_id = sparse.kron(sparse.eye(k1), np.ones((1, k2)), format="csr")
    col_id = sparse.kron(np.ones((1, k1)), sparse.eye(k2), format="csr")
    a_eq = sparse.vstack([row_id, col_id[:-1]], format="csc")  # last column sum is redundant
    b_eq = np.concatenate([a, b[:-1]])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transportation solve failed: {res.message}")
    table = res.x.reshape(k1, k2)
    # clean tiny solver negatives so the coupling validates
    table[table < 0] = 0.0
    return float(cost.ravel() @ res.x), table


@dataclass
class DbarEstimate:
    value: float
    se: float
    batch_values: np.ndarray


def dbar_empirical(
    sampler_p, sampler_q, n: int, trials: int, rng: np.random.Generator, batches: int = 10
) -> DbarEstimate:
    """Optimal matching cost between equal batches of samples from each law.

    Samplers map (count, rng) to (count, n) blocks.  Each batch's two sample
    multisets are paired up optimally (a square assignment problem, which
    equals the transportation optimum between the empirical measures); the
    batch mean upper-bounds the true distance in expectation and is reported
    with the batch standard error.
    """
    if trials < 1000:
        raise ValueError("need at least 1e3 trials for a usable estimate")
    from scipy.optimize import linear_sum_assignment

    per = trials // batches
    vals = []
    for _ in range(batches):
        xs = np.asarray(sampler_p(per, rng))
        ys = np.asarray(sampler_q(per, rng))
        if xs.shape != (per, n) or ys.shape != (per, n):
            raise ValueError("samplers must return (count, n) blocks")
        cost = _cost_matrix(xs, ys)
        rows, cols = linear_sum_assignment(cost)
        vals.append(float(cost[rows, cols].mean()))
    vals = np.asarray(vals)
    se = float(vals.std(ddof=1) / math.sqrt(batches)) if batches > 1 else 0.0
    return DbarEstimate(value=float(vals.mean()), se=se, batch_values=vals)


def entropy(probs) -> float:
    """Shannon entropy in bits; 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def binary_entropy(p: float) -> float:
    return entropy([p, 1.0 - p])


def iid_product(sym_probs, n: int) -> np.ndarray:
    """Dense block law of an i.i.d. source, in block-code order."""
    out = np.ones(1)
    sym = np.asarray(sym_probs, dtype=float)
    for _ in range(n):
        out = np.kron(out, sym)
    return out


def joint_table(source_probs: np.ndarray, channel: BlockChannel) -> np.ndarray:
    if channel.matrix is None:
        if channel.kernel is None:
            raise ValueError("channel has no exact law")
        matrix = np.stack([channel.row(b) for b in all_blocks(channel.n, channel.in_alphabet)])
    else:
        matrix = channel.matrix
    src = np.asarray(source_probs, dtype=float)
    if src.shape[0] != matrix.shape[0]:
        raise ValueError("source length does not match the channel input space")
    return src[:, None] * matrix


def mutual_information_exact(source_probs, channel: BlockChannel) -> float:
    """(1/n) [H(X^n) + H(Y^n) - H(X^n, Y^n)] from the exact joint table, bits/symbol."""
    joint = joint_table(np.asarray(source_probs, dtype=float), channel)
    hx = entropy(joint.sum(axis=1))
    hy = entropy(joint.sum(axis=0))
    hxy = entropy(joint)
    return (hx + hy - hxy) / channel.n


def sample_mutual_information(x_block, y_block, source_probs, channel: BlockChannel) -> float:
    """Per-symbol log-likelihood ratio of the pair vs the product of marginals."""
    joint = joint_table(np.asarray(source_probs, dtype=float), channel)
    xi = block_indices(np.atleast_2d(x_block), channel.in_alphabet)[0]
    yi = block_indices(np.atleast_2d(y_block), channel.out_alphabet)[0]
    pxy = joint[xi, yi]
    px = joint[xi].sum()
    py = joint[:, yi].sum()
    if pxy <= 0 or px <= 0 or py <= 0:
        raise ZeroProbabilityError(f"pair ({xi}, {yi}) has a zero-probability factor")
    return float(math.log2(pxy / (px * py)) / channel.n)


def draw_mi_samples(
    sym_probs, kernel: np.ndarray, n: int, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    """Sample i_n for an i.i.d. source through a memoryless channel.

    Factorizes per position, so blocklength n costs O(count * n).  Returns
    (values in bits/symbol, number of excluded zero-probability pairs);
    sampled pairs can only hit zeros through zero kernel rows, but the
    exclusion count is reported for uniformity with the table-based path.
    """
    sym = np.asarray(sym_probs, dtype=float)
    py = sym @ kernel
    xs = rng.choice(sym.size, size=(count, n), p=sym)
    ys = (rng.random((count, n))[:, :, None] > np.cumsum(kernel, axis=1)[xs]).sum(axis=2)
    with np.errstate(divide="ignore"):
        log_k = np.log2(kernel)
        log_py = np.log2(py)
    vals = log_k[xs, ys].sum(axis=1) / n - log_py[ys].sum(axis=1) / n
    keep = np.isfinite(vals)
    return vals[keep], int((~keep).sum())


def quantile_capacity(i_samples, lam: float) -> float:
    """sup{r : empirical P(i <= r) < lam}, the left-continuous sample quantile."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    xs = np.sort(np.asarray(i_samples, dtype=float).ravel())
    if xs.size == 0:
        raise ValueError("need at least one sample")
    k = max(1, math.ceil(lam * xs.size))
    return float(xs[k - 1])


def _adversarial_pair(
    rng: np.random.Generator, lo: int, hi: int, agree_lo: int, agree_hi: int, alphabet: int
) -> tuple[np.ndarray, np.ndarray]:
    """Random input on [lo, hi) and a copy maximally differing outside [agree_lo, agree_hi)."""
    x = rng.integers(0, alphabet, size=hi - lo).astype(np.int8)
    x2 = x.copy()
    outside = np.ones(hi - lo, dtype=bool)
    a0 = max(agree_lo - lo, 0)
    a1 = min(agree_hi - lo, hi - lo)
    if a0 < a1:
        outside[a0:a1] = False
    x2[outside] = (x2[outside] + 1) % alphabet
    return x, x2


def _law_pair_gap_mc(
    family, x, x2, x_start: int, n: int, trials: int, rng: np.random.Generator,
    alphabet: int, batches: int = 10,
) -> tuple[float, float]:
    """Variational gap between sampled conditional laws, common random numbers."""
    outs = family.batch_outputs(
        np.stack([x, x2]), x_start, trials, rng, share_noise=True, out_lo=0, out_len=n
    )
    codes = block_indices(outs.reshape(-1, n), alphabet).reshape(2, trials)
    size = alphabet**n
    p = np.bincount(codes[0], minlength=size) / trials
    q = np.bincount(codes[1], minlength=size) / trials
    gap = variational_distance_dense(p, q)
    per = trials // batches
    bvals = []
    for b in range(batches):
        sl = slice(b * per, (b + 1) * per)
        pb = np.bincount(codes[0, sl], minlength=size) / per
        qb = np.bincount(codes[1, sl], minlength=size) / per
        bvals.append(variational_distance_dense(pb, qb))
    se = float(np.std(bvals, ddof=1) / math.sqrt(batches))
    return gap, se


def adima_scan(
    family, n: int, m_values, rng: np.random.Generator,
    trials: int = 20_000, pairs: int = 20, alphabet: int = 2,
) -> list[tuple[int, float, float]]:
    """Sup variational gap between conditional block laws vs agreement margin.

    For each margin m, draws adversarial input pairs that agree exactly on
    [-m, n+m) and differ symbol-by-symbol everywhere else in the simulated
    extent, and takes the worst observed gap.  Exact-law families are
    evaluated exactly (se = 0); sampled families use common random numbers.
    """
    m_values = [int(m) for m in m_values]
    pad = max(m_values) + getattr(family, "context_width", 0) + 4
    lo, hi = -pad, n + pad
    results = []
    exact = hasattr(family, "law")
    for m in m_values:
        worst, worst_se = 0.0, 0.0
        for _ in range(pairs):
            x, x2 = _adversarial_pair(rng, lo, hi, -m, n + m, alphabet)
            if exact:
                gap = variational_distance_dense(
                    family.law(x, lo, 0, n), family.law(x2, lo, 0, n)
                )
                se = 0.0
            else:
                gap, se = _law_pair_gap_mc(family, x, x2, lo, n, trials, rng, alphabet)
            if gap > worst:
                worst, worst_se = gap, se
        results.append((m, worst, worst_se))
    return results


def dbar_continuity_scan(
    family, n_values, rng: np.random.Generator,
    trials: int = 4000, pairs: int = 6, alphabet: int = 2,
) -> list[tuple[int, float, float]]:
    """Worst transport distance between laws of inputs agreeing on the block.

    Input pairs agree exactly on [0, n) and differ at every other simulated
    index.  Exact-law families are solved exactly (se = 0); sampled families
    are estimated from independently drawn conditional samples (no shared
    noise, which would bias a coupling-based distance downward).
    """
    exact = hasattr(family, "law")
    results = []
    for n in n_values:
        n = int(n)
        pad = getattr(family, "context_width", 0) + 4
        lo, hi = -pad, n + pad
        worst, worst_se = 0.0, 0.0
        for _ in range(pairs):
            x, x2 = _adversarial_pair(rng, lo, hi, 0, n, alphabet)
            if exact:
                blocks = all_blocks(n, alphabet)
                p = FiniteDistribution(blocks, family.law(x, lo, 0, n))
                q = FiniteDistribution(blocks, family.law(x2, lo, 0, n))
                value, _ = dbar_exact(p, q)
                se = 0.0
            else:
                def sampler(row):
                    def draw(count, r):
                        return family.batch_outputs(
                            row[None, :], lo, count, r, share_noise=False,
                            out_lo=0, out_len=n,
                        )[0]
                    return draw
                est = dbar_empirical(sampler(x), sampler(x2), n, trials, rng)
                value, se = est.value, est.se
            if value > worst:
                worst, worst_se = value, se
        results.append((n, worst, worst_se))
    return results


def strong_mixing_scan(
    family, x, x_start: int, f1: tuple[int, tuple], f2: tuple[int, tuple],
    k_values, trials: int, rng: np.random.Generator, batches: int = 10,
) -> list[tuple[int, float, float]]:
    """|P(A and shifted B) - P(A) P(B)| with batch standard errors.

    f1 = (offset, pattern) fixes A; f2's offset is shifted by each k.  The
    pooled signed statistic is reported in absolute value; the SE comes from
    batch replicates of the signed statistic.
    """
    o1, pat1 = int(f1[0]), np.asarray(f1[1], dtype=np.int8)
    o2, pat2 = int(f2[0]), np.asarray(f2[1], dtype=np.int8)
    if max(pat1.size, pat2.size) > 3:
        raise ValueError("cylinder patterns are limited to length <= 3")
    results = []
    for k in k_values:
        k = int(k)
        out_lo = min(o1, o2 + k)
        out_hi = max(o1 + pat1.size, o2 + k + pat2.size)
        outs = family.sequence_outputs(x, x_start, out_lo, out_hi - out_lo, trials, rng)
        a = np.all(outs[:, o1 - out_lo : o1 - out_lo + pat1.size] == pat1, axis=1)
        b = np.all(outs[:, o2 + k - out_lo : o2 + k - out_lo + pat2.size] == pat2, axis=1)
        signed = float((a & b).mean() - a.mean() * b.mean())
        per = trials // batches
        bvals = []
        for bi in range(batches):
            sl = slice(bi * per, (bi + 1) * per)
            bvals.append(float((a[sl] & b[sl]).mean() - a[sl].mean() * b[sl].mean()))
        se = float(np.std(bvals, ddof=1) / math.sqrt(batches))
        results.append((k, abs(signed), se))
    return results


def dmc_cylinder_prob(kernel: np.ndarray, x, x_start: int, constraints: dict[int, int]) -> float:
    """Exact probability that a memoryless channel's outputs match fixed symbols."""
    p = 1.0
    x_arr = np.asarray(x)
    for pos, sym in constraints.items():
        p *= float(kernel[int(x_arr[pos - x_start]), int(sym)])
    return p


def dmc_mixing_gap_exact(
    kernel: np.ndarray, x, x_start: int, f1: tuple[int, tuple], f2: tuple[int, tuple], k: int
) -> float:
    """Exact mixing gap for a memoryless channel; zero whenever the windows are disjoint."""
    c1 = {f1[0] + i: s for i, s in enumerate(f1[1])}
    c2 = {f2[0] + k + i: s for i, s in enumerate(f2[1])}
    joint = dict(c1)
    for pos, sym in c2.items():
        if pos in joint and joint[pos] != sym:
            p_joint = 0.0
            break
        joint[pos] = sym
    else:
        p_joint = dmc_cylinder_prob(kernel, x, x_start, joint)
    pa = dmc_cylinder_prob(kernel, x, x_start, c1)
    pb = dmc_cylinder_prob(kernel, x, x_start, c2)
    return abs(p_joint - pa * pb)


def ergodic_mean_check(source_sampler, pattern, horizon: int, rng: np.random.Generator) -> float:
    """Time average of a cylinder indicator along one sampled trajectory."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    pat = np.asarray(pattern, dtype=np.int8)
    path = np.asarray(source_sampler(horizon + pat.size - 1, rng))
    if pat.size == 0:
        return 1.0
    windows = np.lib.stride_tricks.sliding_window_view(path, pat.size)[:horizon]
    return float(np.all(windows == pat, axis=1).mean())
