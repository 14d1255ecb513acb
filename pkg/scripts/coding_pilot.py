#!/usr/bin/env python3
"""Reproduce the pilot behind the coding-experiment thresholds.

Measures (a) the distribution of the worst-codeword ML error over many
random (17, 16) codes on BSC(0.11), which shows why no unexpurgated random
code reaches 0.05 at this blocklength, and (b) the molecular channel's
below/above-capacity error bands that pinned the 0.45 / 0.55 ordering
thresholds in the acceptance suite.
"""

import numpy as np

from molchan import acceptance, coding, infotheory as it, receiver as rc


def bsc_sweep(codes: int = 100) -> None:
    spec = rc.bsc(0.11)
    c_hat = it.mutual_information_exact([0.5, 0.5], rc.dmc_block(spec, 1))
    n = 16
    m_codewords = int(np.ceil(2 ** (n * 0.5 * c_hat)))
    channel = rc.dmc_block(spec, n)
    rng = np.random.default_rng(424242)
    lams = []
    for _ in range(codes):
        code = coding.random_code(m_codewords, n, [0.5, 0.5], rng)
        lams.append(coding.evaluate_code(code, channel, 1000, rng, decoder="ml").lambda_max)
    lams = np.sort(lams)
    print(f"BSC(0.11) n={n} M={m_codewords}: worst-codeword error over {codes} codes")
    print(f"  min {lams[0]:.4f}  p10 {np.quantile(lams, 0.1):.4f}  "
          f"median {np.median(lams):.4f}  p90 {np.quantile(lams, 0.9):.4f}")


def molecular_bands(seed: int = acceptance.GOLDEN_SEED) -> None:
    mol4 = acceptance.pinned_molecular(4)
    est = mol4.estimate_matrix(200_000, np.random.default_rng(seed))
    uniform = np.full(est.matrix.shape[0], 1.0 / est.matrix.shape[0])
    c_mol = it.mutual_information_exact(uniform, est)
    print(f"molecular c_hat (blocklength-4 estimate): {c_mol:.4f}")
    rng = np.random.default_rng(seed + 1)
    for factor, codes, trials in ((0.5, 5, 2000), (1.5, 2, 1500)):
        rows = coding.coding_theorem_experiment(
            acceptance.pinned_molecular, c_mol, [8, 12, 16], [factor], rng,
            trials=trials, codes_per_rate=codes, decoder="hamming",
            max_eval_codewords=128,
        )
        side = "below" if factor < 1 else "above"
        for r in rows:
            print(f"  {side} n={r.n:>2} M={r.m_codewords:>5}: best lambda {r.lambda_best:.4f}")


if __name__ == "__main__":
    bsc_sweep()
    molecular_bands()
