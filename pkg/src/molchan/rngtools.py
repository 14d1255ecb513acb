"""Deterministic generator derivation and batch fan-out.

Every stochastic routine in this package takes an explicit numpy Generator.
Monte-Carlo scans split their work into batches whose generators are derived
from (seed, tag, batch index), so merged results do not depend on how many
workers processed the batches.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

_U32 = 0xFFFFFFFF


def tag(name: str) -> int:
    """Stable 32-bit tag for a subsystem name (crc32; not Python's salted hash)."""
    return zlib.crc32(name.encode("utf-8")) & _U32


def derive_rng(seed: int, *key: int | str) -> np.random.Generator:
    """Generator keyed by (seed, *key); str keys are crc32-tagged."""
    ints = [int(seed) & ((1 << 64) - 1)]
    for k in key:
        ints.append(tag(k) if isinstance(k, str) else int(k) & _U32)
    return np.random.default_rng(np.random.SeedSequence(ints))


def batch_rngs(seed: int, name: str, n_batches: int) -> list[np.random.Generator]:
    return [derive_rng(seed, name, b) for b in range(n_batches)]


def split_trials(trials: int, n_batches: int) -> list[int]:
    """Split a trial count into n_batches nearly equal positive chunks."""
    n_batches = max(1, min(n_batches, trials))
    base, extra = divmod(trials, n_batches)
    return [base + (1 if b < extra else 0) for b in range(n_batches)]


def map_batches(fn: Callable, args: Sequence, workers: int = 1) -> list:
    """Apply fn over per-batch argument tuples, merging in batch order.

    Results are identical for any worker count because batch generators are
    derived up front and the merge preserves batch order.
    """
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futures]
