"""Receiver channels and the cascade that assembles the molecular channel.

Receivers are finite-alphabet exemplars with short input memory: a
memoryless per-symbol matrix (w = 0) or a finite-memory kernel whose output
at position i depends on inputs i-w..i.  Both expose exact windowed laws for
the diagnostic scans; cascades of exact block channels are plain matrix
products.  The full molecular channel is the arrival-order permutation of
`permchan` followed by a receiver, with the input embedded in a pinned guard
context so every reported number is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import permchan as pc
from .blocks import (
    MAX_EXACT_ROWS,
    BlockChannel,
    GuardError,
    all_blocks,
    apply_kernel_shared,
    check_stochastic,
    sample_kernel,
)


@dataclass(frozen=True)
class DmcSpec:
    """Per-symbol stochastic matrix of a memoryless receiver."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("kernel must be a 2-D matrix")
        if np.any(m < 0):
            raise ValueError("kernel entries must be nonnegative")
        dev = float(np.max(np.abs(m.sum(axis=1) - 1.0)))
        if dev > 1e-12:
            raise ValueError(f"kernel rows must sum to 1 within 1e-12, off by {dev:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def in_alphabet(self) -> int:
        return self.matrix.shape[0]

    @property
    def out_alphabet(self) -> int:
        return self.matrix.shape[1]


def bsc(p: float) -> DmcSpec:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover must be in [0, 1], got {p}")
    return DmcSpec(np.array([[1.0 - p, p], [p, 1.0 - p]]))


def dmc_block(spec: DmcSpec, n: int) -> BlockChannel:
    """Blocklength-n channel of a memoryless receiver (n-fold product law)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    kernel = spec.matrix
    matrix = None
    if spec.in_alphabet**n <= MAX_EXACT_ROWS and spec.out_alphabet**n <= MAX_EXACT_ROWS:
        matrix = np.ones((1, 1))
        for _ in range(n):
            matrix = np.kron(matrix, kernel)
    return BlockChannel(
        n=n,
        in_alphabet=spec.in_alphabet,
        out_alphabet=spec.out_alphabet,
        matrix=matrix,
        sampler=lambda x, rng: sample_kernel(kernel, x, rng),
        kernel=kernel,
    )


@dataclass
class FiniteMemoryChannel:
    """Windowed channel: output i drawn from kernel row for context x_{i-w..i}.

    The kernel has one row per context block (base-`in_alphabet` code of the
    w+1 inputs ending at the current position).  w = 0 is a memoryless
    channel.  Boundary inputs always come from the extended block the caller
    provides; there is no implicit padding.
    """

    kernel: np.ndarray
    w: int
    in_alphabet: int = 2

    def __post_init__(self) -> None:
        self.kernel = np.asarray(self.kernel, dtype=float)
        if self.w < 0:
            raise ValueError("memory w must be >= 0")
        rows = self.in_alphabet ** (self.w + 1)
        if self.kernel.shape[0] != rows:
            raise ValueError(f"kernel needs {rows} context rows, got {self.kernel.shape[0]}")
        check_stochastic(self.kernel, tol=1e-12)

    @property
    def out_alphabet(self) -> int:
        return self.kernel.shape[1]

    @property
    def context_width(self) -> int:
        return self.w

    def _context_codes(self, x_ext: np.ndarray, x_start: int, out_lo: int, out_len: int) -> np.ndarray:
        lo = out_lo - self.w - x_start
        hi = out_lo + out_len - x_start
        if lo < 0 or hi > x_ext.shape[0]:
            raise ValueError(
                f"need inputs on [{out_lo - self.w}, {out_lo + out_len}), "
                f"got [{x_start}, {x_start + x_ext.shape[0]})"
            )
        codes = np.zeros(out_len, dtype=np.int64)
        for k in range(self.w + 1):
            codes = codes * self.in_alphabet + x_ext[lo + k : lo + k + out_len].astype(np.int64)
        return codes

    def position_rows(self, x_ext, x_start: int, out_lo: int, out_len: int) -> np.ndarray:
        """(out_len, out_alphabet) per-position conditional rows."""
        x_arr = np.asarray(x_ext)
        return self.kernel[self._context_codes(x_arr, x_start, out_lo, out_len)]

    def law(self, x_ext, x_start: int, out_lo: int, out_len: int) -> np.ndarray:
        """Exact joint law over output blocks on [out_lo, out_lo+out_len)."""
        if self.out_alphabet**out_len > MAX_EXACT_ROWS:
            raise GuardError(f"output space {self.out_alphabet}^{out_len} exceeds guard")
        rows = self.position_rows(x_ext, x_start, out_lo, out_len)
        law = np.ones(1)
        for r in rows:
            law = np.kron(law, r)
        return law

    def sample_sequence(
        self, x_ext, x_start: int, out_lo: int, out_len: int,
        trials: int, rng: np.random.Generator, u: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """(trials, out_len) outputs; pass `u` to reuse uniforms across inputs."""
        rows = self.position_rows(x_ext, x_start, out_lo, out_len)
        cum = np.cumsum(rows, axis=1)
        if u is None:
            u = rng.random((trials, out_len))
        return (u[:, :, None] > cum[None, :, :]).sum(axis=2).astype(np.int8)

    def sequence_outputs(
        self, x, x_start: int, out_lo: int, out_len: int,
        trials: int, rng: np.random.Generator,
    ) -> np.ndarray:
        return self.sample_sequence(np.asarray(x), x_start, out_lo, out_len, trials, rng)

    def batch_outputs(
        self, x_rows, x_start: int, trials: int, rng: np.random.Generator,
        share_noise: bool = True, out_lo: int = 0, out_len: Optional[int] = None,
    ) -> np.ndarray:
        """(rows, trials, out_len) outputs; shared uniforms give common random numbers."""
        x_rows = np.atleast_2d(np.asarray(x_rows))
        if out_len is None:
            raise ValueError("out_len is required")
        u = rng.random((trials, out_len)) if share_noise else None
        outs = []
        for row in x_rows:
            ui = u if share_noise else rng.random((trials, out_len))
            outs.append(self.sample_sequence(row, x_start, out_lo, out_len, trials, rng, u=ui))
        return np.stack(outs, axis=0)

    def block_channel(self, n: int, left_context) -> BlockChannel:
        """Blocklength-n BlockChannel with the w boundary symbols pinned."""
        ctx = np.asarray(left_context, dtype=np.int8)
        if ctx.shape[0] != self.w:
            raise ValueError(f"left context must supply exactly w={self.w} symbols")
        inputs = all_blocks(n, self.in_alphabet)
        if self.out_alphabet**n > MAX_EXACT_ROWS:
            raise GuardError("output space exceeds guard")
        matrix = np.empty((inputs.shape[0], self.out_alphabet**n))
        for i, blk in enumerate(inputs):
            x_ext = np.concatenate([ctx, blk])
            matrix[i] = self.law(x_ext, -self.w, 0, n)
        kernel = self.kernel if self.w == 0 else None
        return BlockChannel(
            n=n, in_alphabet=self.in_alphabet, out_alphabet=self.out_alphabet,
            matrix=matrix, kernel=kernel,
        )


def finite_memory_channel(kernel, w: int, in_alphabet: int = 2) -> FiniteMemoryChannel:
    return FiniteMemoryChannel(kernel=np.asarray(kernel, dtype=float), w=w, in_alphabet=in_alphabet)


@dataclass
class CascadeWindow:
    """Exact windowed law of two finite-memory channels in series.

    Marginalizes the intermediate window [out_lo - second.w, out_lo + out_len)
    by enumeration; the effective input context is first.w + second.w.
    """

    first: FiniteMemoryChannel
    second: FiniteMemoryChannel

    def __post_init__(self) -> None:
        if self.first.out_alphabet != self.second.in_alphabet:
            raise ValueError("intermediate alphabets do not match")

    @property
    def context_width(self) -> int:
        return self.first.w + self.second.w

    def law(self, x_ext, x_start: int, out_lo: int, out_len: int) -> np.ndarray:
        mid_lo = out_lo - self.second.w
        mid_len = out_len + self.second.w
        q = self.first.out_alphabet
        if q**mid_len > MAX_EXACT_ROWS:
            raise GuardError("intermediate space exceeds guard")
        first_rows = self.first.position_rows(x_ext, x_start, mid_lo, mid_len)
        out = np.zeros(self.second.out_alphabet**out_len)
        for z in all_blocks(mid_len, q):
            pz = float(np.prod(first_rows[np.arange(mid_len), z.astype(int)]))
            if pz == 0.0:
                continue
            out += pz * self.second.law(z, mid_lo, out_lo, out_len)
        return out


def cascade(first: BlockChannel, second: BlockChannel) -> BlockChannel:
    """Series composition at equal blocklength: law = law2 integrated over law1."""
    if first.n != second.n:
        raise ValueError(f"blocklength mismatch: {first.n} != {second.n}")
    if first.out_alphabet != second.in_alphabet:
        raise ValueError("intermediate alphabets do not match")
    matrix = None
    if first.matrix is not None and second.matrix is not None:
        matrix = first.matrix @ second.matrix
    kernel = None
    if first.kernel is not None and second.kernel is not None:
        kernel = first.kernel @ second.kernel
    sampler = None
    if (first.sampler is not None or first.exact) and (second.sampler is not None or second.exact):
        sampler = lambda x, rng: second.sample(first.sample(x, rng), rng)
    return BlockChannel(
        n=first.n,
        in_alphabet=first.in_alphabet,
        out_alphabet=second.out_alphabet,
        matrix=matrix,
        sampler=sampler,
        kernel=kernel,
    )


@dataclass
class MolecularChannel:
    """Arrival-order permutation followed by a receiver, on a pinned window.

    Blocks enter at window positions [start, start+length); symbols outside
    the caller-provided span are pinned to `guard_symbol`, and the simulation
    span always reaches `guard` indices beyond the enlarged window so that
    boundary crossings are represented.  All draws flow through the explicit
    generator; passing identical symbols yields identical outputs under a
    shared generator state, which the diagnostic scans exploit as common
    random numbers.
    """

    window: pc.Window
    schedule: object
    model: object
    receiver: BlockChannel
    alphabet: int = 2
    guard: int = 6
    guard_symbol: int = 0

    def __post_init__(self) -> None:
        if self.receiver.n != self.window.length:
            raise ValueError("receiver blocklength must equal the window length")
        if self.receiver.in_alphabet != self.alphabet:
            raise ValueError("receiver input alphabet does not match")

    @property
    def n(self) -> int:
        return self.window.length

    @property
    def context_width(self) -> int:
        return self.window.margin + self.guard

    def span_for(self, out_lo: int, out_hi: int) -> tuple[int, int]:
        pad = self.window.margin + self.guard
        return out_lo - pad, out_hi + pad

    def _embed(self, x, x_start: int, span_lo: int, span_hi: int) -> np.ndarray:
        x_arr = np.atleast_2d(np.asarray(x, dtype=np.int8))
        full = np.full((x_arr.shape[0], span_hi - span_lo), self.guard_symbol, dtype=np.int8)
        lo = max(span_lo, x_start)
        hi = min(span_hi, x_start + x_arr.shape[1])
        if lo < hi:
            full[:, lo - span_lo : hi - span_lo] = x_arr[:, lo - x_start : hi - x_start]
        return full

    def permuted_symbols(
        self, x_rows, x_start: int, out_lo: int, out_len: int,
        trials: int, rng: np.random.Generator,
    ) -> np.ndarray:
        """(rows, trials, out_len) pre-receiver symbols under shared orderings."""
        span_lo, span_hi = self.span_for(out_lo, out_lo + out_len)
        rows = self._embed(x_rows, x_start, span_lo, span_hi)
        slots = pc.simulate_slots(span_hi - span_lo, self.schedule, self.model, trials, rng)
        order = np.argsort(slots, axis=1, kind="stable")
        core = order[:, out_lo - span_lo : out_lo - span_lo + out_len]
        return rows[:, core]

    def batch_outputs(
        self, x_rows, x_start: int, trials: int, rng: np.random.Generator,
        share_noise: bool = True, out_lo: Optional[int] = None, out_len: Optional[int] = None,
    ) -> np.ndarray:
        """(rows, trials, out_len) outputs for several extended inputs.

        With share_noise, every row sees the same orderings and the same
        receiver noise, so rows that agree on all influential symbols produce
        identical outputs trial by trial.
        """
        out_lo = self.window.start if out_lo is None else out_lo
        out_len = self.window.length if out_len is None else out_len
        x_rows = np.atleast_2d(np.asarray(x_rows, dtype=np.int8))
        if share_noise:
            z = self.permuted_symbols(x_rows, x_start, out_lo, out_len, trials, rng)
            return self._receive(z, rng, shared=True)
        outs = []
        for row in x_rows:
            z = self.permuted_symbols(row[None, :], x_start, out_lo, out_len, trials, rng)
            outs.append(self._receive(z, rng, shared=False)[0])
        return np.stack(outs, axis=0)

    def _receive(self, z: np.ndarray, rng: np.random.Generator, shared: bool) -> np.ndarray:
        if self.receiver.kernel is not None:
            if shared:
                u = rng.random(z.shape[1:])
                return apply_kernel_shared(self.receiver.kernel, z, u[None, ...])
            return sample_kernel(self.receiver.kernel, z, rng)
        # block-sampler receiver: replay one child stream per row when shared
        seed = rng.integers(0, 2**63 - 1) if shared else None
        outs = np.empty_like(z)
        for r in range(z.shape[0]):
            sub = np.random.default_rng(seed) if shared else rng
            outs[r] = self.receiver.sample(z[r], sub)
        return outs

    def sample_blocks(self, x_block, trials: int, rng: np.random.Generator) -> np.ndarray:
        """(trials, n) outputs for one input block in the pinned guard context."""
        x_arr = np.asarray(x_block, dtype=np.int8)
        if x_arr.shape[0] != self.n:
            raise ValueError(f"block length {x_arr.shape[0]} != n = {self.n}")
        return self.batch_outputs(x_arr[None, :], self.window.start, trials, rng)[0]

    def sequence_outputs(
        self, x, x_start: int, out_lo: int, out_len: int,
        trials: int, rng: np.random.Generator,
    ) -> np.ndarray:
        """(trials, out_len) outputs over an arbitrary window, for mixing scans."""
        z = self.permuted_symbols(
            np.atleast_2d(np.asarray(x, dtype=np.int8)), x_start, out_lo, out_len, trials, rng
        )
        return self._receive(z, rng, shared=True)[0]

    def estimate_matrix(self, trials: int, rng: np.random.Generator) -> BlockChannel:
        """Estimated exact-form matrix: permutation block matrix times receiver law.

        Desk guard: window length <= 6 so the block algebra stays enumerable.
        The permutation rows are estimated in the pinned guard context; the
        receiver factor is exact.
        """
        ctx = np.full(self.window.extended_len, self.guard_symbol, dtype=np.int8)
        perm_bc = pc.permchan_block_matrix(
            ctx, self.window, self.schedule, self.model, trials, rng, alphabet=self.alphabet
        )
        if self.receiver.matrix is None and self.receiver.kernel is None:
            raise ValueError("receiver must have an exact law to estimate a matrix")
        recv = self.receiver
        if recv.matrix is None:
            recv = BlockChannel(
                n=self.n, in_alphabet=recv.in_alphabet, out_alphabet=recv.out_alphabet,
                matrix=np.stack([recv.row(b) for b in all_blocks(self.n, recv.in_alphabet)]),
                kernel=recv.kernel,
            )
        return cascade(perm_bc, recv)


def molecular_channel(
    window: pc.Window, schedule, model, receiver: BlockChannel,
    alphabet: int = 2, guard: int = 6, guard_symbol: int = 0,
) -> MolecularChannel:
    """Assemble the full channel from permutation parameters and a receiver."""
    return MolecularChannel(
        window=window, schedule=schedule, model=model, receiver=receiver,
        alphabet=alphabet, guard=guard, guard_symbol=guard_symbol,
    )
