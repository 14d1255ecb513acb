"""Finite-alphabet block machinery shared by the channel and coding modules.

Symbols are integers 0..a-1; a block of length n is a length-n int array (or
tuple).  Exact channels are dense row-stochastic matrices indexed by the
base-a integer encoding of blocks, guarded to at most MAX_EXACT_ROWS rows so
every event algebra the scans enumerate stays desk-sized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

MAX_EXACT_ROWS = 4096

ROW_TOL = 1e-9


class GuardError(ValueError):
    """An enumeration guard (matrix size, window length) was exceeded."""


def block_index(block, alphabet: int) -> int:
    """Base-`alphabet` integer code of a block, first symbol most significant."""
    idx = 0
    for s in np.asarray(block).ravel():
        idx = idx * alphabet + int(s)
    return idx


def block_indices(blocks: np.ndarray, alphabet: int) -> np.ndarray:
    """Vectorized block_index over rows of an (m, n) symbol array."""
    blocks = np.asarray(blocks)
    n = blocks.shape[-1]
    weights = alphabet ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return blocks.astype(np.int64) @ weights


def index_block(idx: int, n: int, alphabet: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        out.append(idx % alphabet)
        idx //= alphabet
    return tuple(reversed(out))


def all_blocks(n: int, alphabet: int) -> np.ndarray:
    """(alphabet^n, n) array of every block, in block_index order."""
    count = alphabet**n
    if count > MAX_EXACT_ROWS:
        raise GuardError(f"alphabet^n = {count} exceeds enumeration guard {MAX_EXACT_ROWS}")
    idx = np.arange(count)
    cols = []
    for j in range(n - 1, -1, -1):
        cols.append((idx // alphabet**j) % alphabet)
    return np.stack(cols, axis=1).astype(np.int8)


def check_stochastic(matrix: np.ndarray, tol: float = ROW_TOL) -> None:
    if np.any(matrix < -tol):
        raise ValueError("conditional probabilities must be nonnegative")
    rows = matrix.sum(axis=1)
    worst = float(np.max(np.abs(rows - 1.0)))
    if worst > tol:
        raise ValueError(f"rows must sum to 1 within {tol}; worst deviation {worst:.3e}")


@dataclass
class BlockChannel:
    """Conditional law over output blocks given input blocks, at blocklength n.

    At least one of `matrix` (exact, rows indexed by input block code) and
    `sampler` (batched: (m, n) inputs + rng -> (m, n) outputs) is present.
    `kernel` is the per-symbol stochastic matrix when the channel is
    memoryless, which lets exact per-pair probabilities be computed at any n
    without materializing the dense matrix.
    """

    n: int
    in_alphabet: int
    out_alphabet: int
    matrix: Optional[np.ndarray] = None
    sampler: Optional[Callable[[np.ndarray, np.random.Generator], np.ndarray]] = None
    kernel: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.matrix is None and self.sampler is None and self.kernel is None:
            raise ValueError("need a matrix, a sampler, or a kernel")
        if self.matrix is not None:
            self.matrix = np.asarray(self.matrix, dtype=float)
            expected = (self.in_alphabet**self.n, self.out_alphabet**self.n)
            if self.matrix.shape != expected:
                raise ValueError(f"matrix shape {self.matrix.shape} != {expected}")
            check_stochastic(self.matrix)

    @property
    def exact(self) -> bool:
        return self.matrix is not None or self.kernel is not None

    def row(self, x_block) -> np.ndarray:
        """Exact conditional distribution over output block codes."""
        if self.matrix is not None:
            return self.matrix[block_index(x_block, self.in_alphabet)]
        if self.kernel is not None:
            row = np.ones(1)
            for s in np.asarray(x_block).ravel():
                row = np.kron(row, self.kernel[int(s)])
            return row
        raise ValueError("channel has no exact law; use the sampler")

    def pair_logprob(self, x_blocks: np.ndarray, y_blocks: np.ndarray) -> np.ndarray:
        """log P(y | x) for paired rows of two (m, n) block arrays."""
        x_blocks = np.atleast_2d(np.asarray(x_blocks))
        y_blocks = np.atleast_2d(np.asarray(y_blocks))
        if self.kernel is not None:
            with np.errstate(divide="ignore"):
                logk = np.log(self.kernel)
            return logk[x_blocks.astype(np.int64), y_blocks.astype(np.int64)].sum(axis=1)
        if self.matrix is not None:
            xi = block_indices(x_blocks, self.in_alphabet)
            yi = block_indices(y_blocks, self.out_alphabet)
            with np.errstate(divide="ignore"):
                return np.log(self.matrix[xi, yi])
        raise ValueError("channel has no exact law; use the sampler")

    def sample(self, x_blocks: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Batched draw: one output block per input row."""
        x_blocks = np.atleast_2d(np.asarray(x_blocks))
        if self.sampler is not None:
            return self.sampler(x_blocks, rng)
        if self.kernel is not None:
            return sample_kernel(self.kernel, x_blocks, rng)
        # exact matrix fallback
        xi = block_indices(x_blocks, self.in_alphabet)
        u = rng.random(xi.size)
        cum = np.cumsum(self.matrix, axis=1)
        codes = np.array([np.searchsorted(cum[i], ui, side="right") for i, ui in zip(xi, u)])
        out = np.empty((xi.size, self.n), dtype=np.int8)
        for r, c in enumerate(codes):
            out[r] = index_block(int(c), self.n, self.out_alphabet)
        return out


def sample_kernel(kernel: np.ndarray, x_symbols: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Push symbols through a per-symbol stochastic matrix, elementwise."""
    cum = np.cumsum(kernel, axis=1)
    u = rng.random(x_symbols.shape)
    rows = cum[np.asarray(x_symbols, dtype=np.int64)]
    return (u[..., None] > rows).sum(axis=-1).astype(np.int8)


def apply_kernel_shared(kernel: np.ndarray, x_symbols: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Like sample_kernel but with caller-supplied uniforms (common random numbers)."""
    cum = np.cumsum(kernel, axis=1)
    rows = cum[np.asarray(x_symbols, dtype=np.int64)]
    return (u[..., None] > rows).sum(axis=-1).astype(np.int8)


def identity_channel(n: int, alphabet: int) -> BlockChannel:
    kernel = np.eye(alphabet)
    matrix = np.eye(alphabet**n) if alphabet**n <= MAX_EXACT_ROWS else None
    return BlockChannel(
        n=n,
        in_alphabet=alphabet,
        out_alphabet=alphabet,
        matrix=matrix,
        sampler=lambda x, rng: np.asarray(x, dtype=np.int8).copy(),
        kernel=kernel,
    )
