"""Block codes, decoders, and the desk-scale coding-theorem experiments.

Codes are M distinct codewords at blocklength n with rate log2(M)/n; a
decoder maps output blocks to codeword indices (0-based here; ties always
resolve to the smallest index), which induces the disjoint decoding sets.
Worst-case block error is estimated per codeword by Monte Carlo.  The
experiment harness builds random codes at rates half and one-and-a-half
times a capacity estimate and tracks how the worst-case error moves with
blocklength on either side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .blocks import BlockChannel, block_indices
from .infotheory import entropy, iid_product


@dataclass(frozen=True)
class BlockCode:
    """Distinct codewords (M, n); decoding sets come from the attached decoder."""

    codewords: np.ndarray

    def __post_init__(self) -> None:
        cw = np.atleast_2d(np.asarray(self.codewords, dtype=np.int8))
        if np.unique(cw, axis=0).shape[0] != cw.shape[0]:
            raise ValueError("codewords must be distinct")
        object.__setattr__(self, "codewords", cw)

    @property
    def m_codewords(self) -> int:
        return self.codewords.shape[0]

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    @property
    def rate(self) -> float:
        return math.log2(self.m_codewords) / self.n


def random_code(
    m_codewords: int, n: int, sym_probs, rng: np.random.Generator, alphabet: int = 2
) -> BlockCode:
    """M distinct codewords drawn i.i.d. from the symbol law, resampling collisions."""
    if m_codewords < 1:
        raise ValueError("need at least one codeword")
    if m_codewords > alphabet**n:
        raise ValueError(f"cannot place {m_codewords} distinct codewords in {alphabet}^{n} blocks")
    sym = np.asarray(sym_probs, dtype=float)
    rows: list[tuple] = []
    seen = set()
    while len(rows) < m_codewords:
        draw = rng.choice(alphabet, size=(m_codewords - len(rows), n), p=sym)
        for r in draw:
            key = tuple(int(s) for s in r)
            if key not in seen:
                seen.add(key)
                rows.append(key)
    return BlockCode(codewords=np.array(rows, dtype=np.int8))


def _symbol_loglik(channel: BlockChannel) -> np.ndarray:
    if channel.kernel is None:
        raise ValueError("decoder needs a per-symbol kernel or an exact matrix")
    with np.errstate(divide="ignore"):
        logk = np.log(channel.kernel)
    # finite floor keeps 0 * log(0) out of the score matmuls while staying decisive
    return np.maximum(logk, -1e30)


def ml_decode(y_blocks, code: BlockCode, channel: BlockChannel) -> np.ndarray:
    """Maximum-likelihood indices (0-based) for a batch of output blocks.

    Ties break to the smallest index.  Memoryless channels factorize, so the
    score matrix is a sum of one-hot matmuls and scales to large codebooks;
    otherwise the exact block matrix is gathered directly.
    """
    y = np.atleast_2d(np.asarray(y_blocks, dtype=np.int8))
    if channel.kernel is not None:
        logk = _symbol_loglik(channel)
        scores = np.zeros((y.shape[0], code.m_codewords))
        for s in range(channel.out_alphabet):
            onehot = (y == s).astype(float)
            scores += onehot @ logk[code.codewords.astype(np.int64), s].T
        # quantize so exactly tied likelihoods are not split by float summation order
        return np.argmax(np.round(scores, 9), axis=1)
    if channel.matrix is not None:
        yi = block_indices(y, channel.out_alphabet)
        wi = block_indices(code.codewords, channel.in_alphabet)
        with np.errstate(divide="ignore"):
            scores = np.maximum(np.log(channel.matrix[np.ix_(wi, yi)]), -1e30)
        return np.argmax(np.round(scores, 9), axis=0)
    raise ValueError("channel has no exact law; use hamming_decode for sampled channels")


def hamming_decode(y_blocks, code: BlockCode) -> np.ndarray:
    """Nearest-codeword indices under Hamming distance, ties to the smallest index.

    Agreement counts are accumulated as one-hot matmuls per symbol so large
    codebooks decode at BLAS speed instead of materializing a
    (batch, M, n) comparison tensor.
    """
    y = np.atleast_2d(np.asarray(y_blocks, dtype=np.int8))
    cw = code.codewords
    alphabet = int(max(y.max(initial=0), cw.max(initial=0))) + 1
    agree = np.zeros((y.shape[0], cw.shape[0]), dtype=np.float32)
    for s in range(alphabet):
        agree += (y == s).astype(np.float32) @ (cw == s).astype(np.float32).T
    return np.argmax(agree, axis=1)


def make_decoder(kind, code: BlockCode, channel=None) -> Callable[[np.ndarray], np.ndarray]:
    if callable(kind):
        return kind
    if kind == "ml":
        return lambda y: ml_decode(y, code, channel)
    if kind == "hamming":
        return lambda y: hamming_decode(y, code)
    raise ValueError(f"unknown decoder kind {kind!r}")


def _sample_given(channel, block: np.ndarray, trials: int, rng: np.random.Generator) -> np.ndarray:
    if hasattr(channel, "sample_blocks"):
        return channel.sample_blocks(block, trials, rng)
    return channel.sample(np.tile(block, (trials, 1)), rng)


@dataclass
class CodeEvaluation:
    lambda_max: float
    per_codeword: np.ndarray
    se_per_codeword: np.ndarray
    trials: int
    evaluated: np.ndarray = field(default=None)

    @property
    def lambda_max_se(self) -> float:
        worst = int(np.argmax(self.per_codeword))
        return float(self.se_per_codeword[worst])


def evaluate_code(
    code: BlockCode, channel, trials: int, rng: np.random.Generator,
    decoder="ml", decode_channel: Optional[BlockChannel] = None,
    codeword_indices=None,
) -> CodeEvaluation:
    """Per-codeword Monte-Carlo block error and their maximum.

    `channel` provides samples (a BlockChannel or anything with
    sample_blocks); `decode_channel` is the exact law the ML decoder scores
    against (defaults to `channel` when it is exact).  Restricting
    `codeword_indices` evaluates a subset, whose maximum is a lower bound on
    the worst-case error, the conservative direction for above-capacity
    claims.
    """
    if trials < 1000:
        raise ValueError("need at least 1e3 trials per codeword")
    if decode_channel is None and isinstance(channel, BlockChannel) and channel.exact:
        decode_channel = channel
    dec = make_decoder(decoder, code, decode_channel)
    indices = np.arange(code.m_codewords) if codeword_indices is None else np.asarray(codeword_indices)
    errs = np.zeros(indices.size)
    ses = np.zeros(indices.size)
    for j, i in enumerate(indices):
        ys = _sample_given(channel, code.codewords[i], trials, rng)
        wrong = dec(ys) != i
        errs[j] = wrong.mean()
        ses[j] = math.sqrt(max(errs[j] * (1 - errs[j]), 0.0) / trials)
    return CodeEvaluation(
        lambda_max=float(errs.max()),
        per_codeword=errs,
        se_per_codeword=ses,
        trials=trials,
        evaluated=indices,
    )


@dataclass
class CodeExperimentRow:
    rate_factor: float
    rate: float
    n: int
    m_codewords: int
    lambda_best: float
    lambda_best_se: float
    lambda_all_codes: tuple[float, ...]
    evaluated_codewords: int


def coding_theorem_experiment(
    channel_factory, c_hat: float, n_values, rate_factors, rng: np.random.Generator,
    trials: int = 2000, codes_per_rate: int = 5, decoder="ml",
    input_sym_probs=None, alphabet: int = 2, max_eval_codewords: int = 256,
    decode_channel_factory=None,
) -> list[CodeExperimentRow]:
    """Random-coding sweep at rates scaled off a capacity estimate.

    For each (rate factor, n): draws `codes_per_rate` random codes with
    M = ceil(2^(n * factor * c_hat)) codewords, evaluates each by Monte
    Carlo (subsampling codewords beyond `max_eval_codewords`), and keeps the
    best code's worst-case error.  Below capacity that error should fall
    with n; above capacity it should stay pinned away from zero.
    """
    sym = np.full(alphabet, 1.0 / alphabet) if input_sym_probs is None else np.asarray(input_sym_probs)
    rows = []
    for factor in rate_factors:
        rate = factor * c_hat
        if rate >= math.log2(alphabet):
            raise ValueError(
                f"rate {rate:.3f} needs more than {alphabet}^n codewords; lower the factor"
            )
        for n in n_values:
            n = int(n)
            m_codewords = max(2, math.ceil(2 ** (n * rate)))
            channel = channel_factory(n)
            decode_channel = decode_channel_factory(n) if decode_channel_factory else None
            lambdas = []
            best = (math.inf, 0.0)
            for _ in range(codes_per_rate):
                code = random_code(m_codewords, n, sym, rng, alphabet)
                subset = None
                if m_codewords > max_eval_codewords:
                    subset = rng.choice(m_codewords, size=max_eval_codewords, replace=False)
                ev = evaluate_code(
                    code, channel, trials, rng, decoder=decoder,
                    decode_channel=decode_channel, codeword_indices=subset,
                )
                lambdas.append(ev.lambda_max)
                if ev.lambda_max < best[0]:
                    best = (ev.lambda_max, ev.lambda_max_se)
            rows.append(CodeExperimentRow(
                rate_factor=float(factor),
                rate=float(rate),
                n=n,
                m_codewords=m_codewords,
                lambda_best=float(best[0]),
                lambda_best_se=float(best[1]),
                lambda_all_codes=tuple(round(v, 9) for v in lambdas),
                evaluated_codewords=int(min(m_codewords, max_eval_codewords)),
            ))
    return rows


@dataclass
class SourceChannelResult:
    p_error: float
    se: float
    rate: float
    m_codewords: int
    typical_miss: float
    source_entropy: float


def source_channel_experiment(
    source_sym_probs, channel, n: int, trials: int, rng: np.random.Generator,
    rate: float, decoder="hamming", decode_channel: Optional[BlockChannel] = None,
    alphabet: int = 2,
) -> SourceChannelResult:
    """End-to-end block error of most-probable-set indexing plus a random channel code.

    Source blocks are ranked by probability; the top M = ceil(2^(n*rate))
    get codewords, everything else is encoded as the most probable block
    (and almost surely decoded wrongly).  Works whenever the source block
    entropy sits below the code rate and the rate below channel capacity.
    """
    sym = np.asarray(source_sym_probs, dtype=float)
    h_source = entropy(sym)
    if h_source > math.log2(alphabet) + 1e-12:
        raise ValueError(
            f"source entropy {h_source:.3f} exceeds log2 of the channel alphabet; "
            "no rate-1 block map can carry it"
        )
    if rate >= math.log2(alphabet):
        raise ValueError("rate must be below log2(alphabet)")
    m_codewords = max(2, math.ceil(2 ** (n * rate)))
    block_probs = iid_product(sym, n)
    order = np.argsort(-block_probs, kind="stable")
    rank_of_code = np.empty(order.size, dtype=np.int64)
    rank_of_code[order] = np.arange(order.size)
    code = random_code(m_codewords, n, np.full(alphabet, 1.0 / alphabet), rng, alphabet)
    dec = make_decoder(decoder, code, decode_channel)

    src_blocks = rng.choice(sym.size, size=(trials, n), p=sym).astype(np.int8)
    src_codes = block_indices(src_blocks, sym.size)
    ranks = rank_of_code[src_codes]
    miss = ranks >= m_codewords
    enc_idx = np.where(miss, 0, ranks)
    errors = np.zeros(trials, dtype=bool)
    # group trials by codeword so channel sampling stays batched
    for i in np.unique(enc_idx):
        sel = enc_idx == i
        ys = _sample_given(channel, code.codewords[i], int(sel.sum()), rng)
        decoded_rank = dec(ys)
        decoded_code = order[decoded_rank]
        errors[sel] = decoded_code != src_codes[sel]
    p_err = float(errors.mean())
    return SourceChannelResult(
        p_error=p_err,
        se=math.sqrt(max(p_err * (1 - p_err), 0.0) / trials),
        rate=float(rate),
        m_codewords=m_codewords,
        typical_miss=float(miss.mean()),
        source_entropy=float(h_source),
    )
