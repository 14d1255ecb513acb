"""The permutation channel induced by arrival order of first-passage times.

Transmission i carries symbol x_i and arrives at time X_i; the receiver reads
symbols in arrival order, so the output sequence is the input reordered by
arrival ranks.  Everything here works on finite windows: a core window of
`length` positions fenced by `margin` extra indices on each side (the
enlarged window), simulated inside whatever span of symbols the caller
provides.  Rank 1 means earliest arrival throughout; ties (possible only in
floating point) are broken toward the earlier transmission index.

`local_version` restricts a full ranking row to a sub-index set and re-ranks
the survivors; that operation is orientation-agnostic, so it reproduces
rankings stated in either earliest-first or latest-first conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockChannel, GuardError, all_blocks, block_indices
from .fpt import ArrivalSequence, draw_passage, union_crossing_bound

MAX_MATRIX_WINDOW = 6
LOW_CONFIDENCE_TRIALS = 10_000


@dataclass(frozen=True)
class Window:
    """Core output window [start, start+length) with outlier margin on each side."""

    start: int
    length: int
    margin: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")

    @property
    def core_lo(self) -> int:
        return self.start

    @property
    def core_hi(self) -> int:
        return self.start + self.length

    @property
    def extended_lo(self) -> int:
        return self.start - self.margin

    @property
    def extended_hi(self) -> int:
        return self.start + self.length + self.margin

    @property
    def extended_len(self) -> int:
        return self.length + 2 * self.margin


@dataclass(frozen=True)
class LocalPermutation:
    """Bijection from a strictly increasing index set onto ranks 1..k."""

    indices: tuple[int, ...]
    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        k = len(self.indices)
        if k == 0:
            raise ValueError("index set must be nonempty")
        if len(self.ranks) != k:
            raise ValueError("indices and ranks must have equal length")
        if any(b >= a for a, b in zip(self.indices[1:], self.indices)):
            raise ValueError("indices must be strictly increasing")
        if sorted(self.ranks) != list(range(1, k + 1)):
            raise ValueError(f"ranks must be a permutation of 1..{k}")

    def __len__(self) -> int:
        return len(self.indices)

    @classmethod
    def identity(cls, indices) -> "LocalPermutation":
        idx = tuple(int(i) for i in indices)
        return cls(indices=idx, ranks=tuple(range(1, len(idx) + 1)))

    def inverse(self) -> "LocalPermutation":
        """Same index set, with ranks inverted as a permutation of 1..k."""
        inv = [0] * len(self.ranks)
        for pos, r in enumerate(self.ranks):
            inv[r - 1] = pos + 1
        return LocalPermutation(indices=self.indices, ranks=tuple(inv))


def local_version(full_ranks, indices, index_base: int = 1) -> LocalPermutation:
    """Restrict a full ranking row to a sub-index set and re-rank.

    `full_ranks[j]` is the rank of position index_base + j; the selected
    entries are replaced by their rank (1 = smallest) among themselves.
    Example: row (5, 4, 3, 1, 2) restricted to {1, 3, 5} has entries 5, 3, 2
    and re-ranks to (3, 2, 1).
    """
    idx = tuple(int(i) for i in indices)
    if not idx:
        raise ValueError("index set must be nonempty")
    row = np.asarray(full_ranks)
    selected = np.array([row[i - index_base] for i in idx])
    order = np.argsort(selected, kind="stable")
    ranks = np.empty(len(idx), dtype=int)
    ranks[order] = np.arange(1, len(idx) + 1)
    return LocalPermutation(indices=idx, ranks=tuple(int(r) for r in ranks))


def order_to_local_permutation(arrivals, indices) -> LocalPermutation:
    """Rank the selected arrivals, earliest = 1, ties toward the smaller index.

    `indices` are 1-based transmission indices into the arrival sequence.
    """
    times = arrivals.times if isinstance(arrivals, ArrivalSequence) else np.asarray(arrivals, dtype=float)
    idx = tuple(int(i) for i in indices)
    if not idx:
        raise ValueError("index set must be nonempty")
    if any(i < 1 or i > times.size for i in idx):
        raise ValueError(f"indices must lie in 1..{times.size}")
    selected = times[[i - 1 for i in idx]]
    order = np.argsort(selected, kind="stable")
    ranks = np.empty(len(idx), dtype=int)
    ranks[order] = np.arange(1, len(idx) + 1)
    return LocalPermutation(indices=idx, ranks=tuple(int(r) for r in ranks))


def apply_permutation(x_block, perm: LocalPermutation) -> np.ndarray:
    """Reorder a block: the symbol at position i lands at position ranks[i]."""
    x = np.asarray(x_block)
    if x.shape[0] != len(perm):
        raise ValueError(f"block length {x.shape[0]} != permutation length {len(perm)}")
    y = np.empty_like(x)
    y[np.asarray(perm.ranks) - 1] = x
    return y


@dataclass
class PermDistribution:
    """Empirical law over local permutations of an extended window.

    Trials on which the outlier event fired are pooled into `outlier_mass`
    rather than attributed to a permutation cell, so cell probabilities plus
    outlier_mass sum to one.
    """

    support: dict[LocalPermutation, float]
    outlier_mass: float
    trials: int
    low_confidence: bool = field(default=False)

    def __post_init__(self) -> None:
        total = sum(self.support.values()) + self.outlier_mass
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"cell masses + outlier mass must sum to 1, got {total}")
        if any(p < 0 for p in self.support.values()) or self.outlier_mass < 0:
            raise ValueError("probabilities must be nonnegative")

    def cell_se(self, p: float) -> float:
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.trials)


def simulate_slots(
    span: int, schedule, model, trials: int, rng: np.random.Generator
) -> np.ndarray:
    """Arrival-order positions for `span` consecutive transmissions.

    Returns an int array (trials, span): entry [t, j] is the 0-based position
    within the span at which transmission j is read out (0 = read first).
    Ties break toward the earlier index via stable argsort.
    """
    d = draw_passage(model, rng, (trials, span))
    times = d.copy()
    if span > 1:
        gaps = schedule.sample_gaps(rng, (trials, span - 1))
        times[:, 1:] += np.cumsum(gaps, axis=1)
    order = np.argsort(times, axis=1, kind="stable")
    slots = np.empty_like(order)
    np.put_along_axis(slots, order, np.arange(span)[None, :].repeat(trials, axis=0), axis=1)
    return slots


def _check_span(x, x_start: int, window: Window) -> np.ndarray:
    x_arr = np.asarray(x)
    span_lo, span_hi = x_start, x_start + x_arr.shape[0]
    if span_lo > window.extended_lo or span_hi < window.extended_hi:
        raise ValueError(
            f"symbols cover [{span_lo}, {span_hi}) but the extended window is "
            f"[{window.extended_lo}, {window.extended_hi})"
        )
    return x_arr


def sample_output(x, x_start: int, window: Window, schedule, model, rng: np.random.Generator):
    """One channel use over the window.

    Simulates arrivals for every provided symbol index, reads the core block
    in arrival order, and reports the local permutation of the extended
    window plus the outlier flag: true when some core transmission is read
    out at a position outside the enlarged window.  The block is produced
    from the realized order even on outlier trials.

    Returns (core block as an int8 array, LocalPermutation, outlier flag).
    """
    x_arr = _check_span(x, x_start, window)
    span = x_arr.shape[0]
    slots = simulate_slots(span, schedule, model, 1, rng)[0]
    order = np.argsort(slots, kind="stable")
    y_span = x_arr[order]
    core = slice(window.core_lo - x_start, window.core_hi - x_start)
    block = np.asarray(y_span[core])
    core_cols = np.arange(window.core_lo - x_start, window.core_hi - x_start)
    positions = x_start + slots[core_cols]
    outlier = bool(np.any((positions < window.extended_lo) | (positions >= window.extended_hi)))
    ext_cols = np.arange(window.extended_lo - x_start, window.extended_hi - x_start)
    ext_order = np.argsort(slots[ext_cols], kind="stable")
    ranks = np.empty(ext_cols.size, dtype=int)
    ranks[ext_order] = np.arange(1, ext_cols.size + 1)
    perm = LocalPermutation(
        indices=tuple(range(window.extended_lo, window.extended_hi)),
        ranks=tuple(int(r) for r in ranks),
    )
    return block, perm, outlier


def _extended_ranks(slots: np.ndarray, x_start: int, window: Window) -> np.ndarray:
    """Per-trial ranks (1-based) of the extended window's transmissions."""
    ext_cols = np.arange(window.extended_lo - x_start, window.extended_hi - x_start)
    sub = slots[:, ext_cols]
    order = np.argsort(sub, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(
        ranks, order, np.arange(1, ext_cols.size + 1)[None, :].repeat(sub.shape[0], axis=0), axis=1
    )
    return ranks


def _outlier_rows(slots: np.ndarray, x_start: int, window: Window, margin: int) -> np.ndarray:
    core_cols = np.arange(window.core_lo - x_start, window.core_hi - x_start)
    positions = x_start + slots[:, core_cols]
    lo = window.start - margin
    hi = window.start + window.length + margin
    return np.any((positions < lo) | (positions >= hi), axis=1)


def estimate_gamma(
    x, x_start: int, window: Window, schedule, model, trials: int, rng: np.random.Generator
) -> PermDistribution:
    """Empirical distribution of the extended window's local permutation.

    Outlier trials (core transmission read outside the enlarged window) are
    reported as a lump; each cell's standard error is at most (4 trials)^-1/2.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x_arr = _check_span(x, x_start, window)
    slots = simulate_slots(x_arr.shape[0], schedule, model, trials, rng)
    out_rows = _outlier_rows(slots, x_start, window, window.margin)
    ranks = _extended_ranks(slots, x_start, window)[~out_rows]
    indices = tuple(range(window.extended_lo, window.extended_hi))
    support: dict[LocalPermutation, float] = {}
    if ranks.shape[0]:
        uniq, counts = np.unique(ranks, axis=0, return_counts=True)
        for row, c in zip(uniq, counts):
            perm = LocalPermutation(indices=indices, ranks=tuple(int(r) for r in row))
            support[perm] = c / trials
    return PermDistribution(
        support=support,
        outlier_mass=float(out_rows.mean()),
        trials=trials,
        low_confidence=trials < LOW_CONFIDENCE_TRIALS,
    )


def outlier_prob(
    x,
    x_start: int,
    window: Window,
    margins,
    schedule,
    model,
    trials: int,
    rng: np.random.Generator,
) -> list[tuple[int, float]]:
    """Outlier frequency as a function of the margin, on shared trials.

    The events are nested, so the curve is exactly nonincreasing in the
    margin for sorted margins.  window.margin is ignored; the scan margins
    come from `margins`.
    """
    margins = [int(m) for m in margins]
    if not margins:
        raise ValueError("margin scan must be nonempty")
    probe = Window(start=window.start, length=window.length, margin=max(margins))
    x_arr = _check_span(x, x_start, probe)
    slots = simulate_slots(x_arr.shape[0], schedule, model, trials, rng)
    return [
        (m, float(_outlier_rows(slots, x_start, window, m).mean()))
        for m in margins
    ]


def permchan_block_matrix(
    x_extended,
    window: Window,
    schedule,
    model,
    trials: int,
    rng: np.random.Generator,
    alphabet: int = 2,
) -> BlockChannel:
    """Estimated conditional law of the core output block, as a BlockChannel.

    The margin symbols of `x_extended` pin the context; each possible core
    block is pushed through one shared batch of simulated orderings (the
    ordering does not depend on the symbols), so every row sums to one
    exactly and rows are maximally comparable across inputs.
    """
    if window.length > MAX_MATRIX_WINDOW:
        raise GuardError(
            f"window length {window.length} exceeds matrix guard {MAX_MATRIX_WINDOW}"
        )
    x_arr = np.asarray(x_extended)
    if x_arr.shape[0] != window.extended_len:
        raise ValueError(
            f"x_extended must cover exactly the extended window "
            f"({window.extended_len} symbols), got {x_arr.shape[0]}"
        )
    x_start = window.extended_lo
    slots = simulate_slots(window.extended_len, schedule, model, trials, rng)
    order = np.argsort(slots, axis=1, kind="stable")
    core = slice(window.core_lo - x_start, window.core_hi - x_start)
    n = window.length
    rows = np.zeros((alphabet**n, alphabet**n))
    context = x_arr.astype(np.int8).copy()
    for code, core_block in enumerate(all_blocks(n, alphabet)):
        context[core] = core_block
        y_core = context[order][:, core]
        counts = np.bincount(block_indices(y_core, alphabet), minlength=alphabet**n)
        rows[code] = counts / trials
    return BlockChannel(n=n, in_alphabet=alphabet, out_alphabet=alphabet, matrix=rows)


def predicted_margin(schedule, model, window_len: int, tol: float, m_max: int = 64) -> int:
    """Smallest margin whose union crossing bound pushes the outlier rate below tol.

    Conservative: a displacement beyond margin m needs a crossing over more
    than m inter-transmission gaps, each bounded by the tail at its floor
    separation, doubled for both directions and summed over the core window.
    """
    for m in range(m_max + 1):
        bound = 2.0 * window_len * union_crossing_bound(m + 2, schedule, model)
        if bound <= tol:
            return m
    raise RuntimeError(f"no margin up to {m_max} meets tol={tol}")
