"""Experiment runner: every scan and experiment as a reproducible subcommand.

    molchan <subcommand> --config <path> --seed <u64> --out <dir>
            [--trials N] [--workers K]

Subcommands: fpt-scan, perm-estimate, adima-scan, dbar-scan, mixing-scan,
capacity, code-eval, source-channel, paper-suite.  Curves land in CSV
(header row, 9 significant digits); each run writes a JSON summary with the
config hash, seed, and trial counts, keys sorted.  Wall-clock timings go to
stderr only, so identical (config, seed) runs produce byte-identical
artifacts regardless of worker count.

Exit codes: 0 success, 2 config error, 3 guard violation, 4 acceptance
failure (paper-suite only).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance, coding, infotheory, permchan, receiver
from . import fpt as fptmod
from .blocks import GuardError
from .config import ConfigError, ExperimentConfig, load_config
from .rngtools import derive_rng, map_batches, split_trials

SUBCOMMANDS = (
    "fpt-scan", "perm-estimate", "adima-scan", "dbar-scan", "mixing-scan",
    "capacity", "code-eval", "source-channel", "paper-suite",
)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj: dict) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def _summary(cfg: ExperimentConfig, command: str, **extra) -> dict:
    base = {
        "command": command,
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "workers": cfg.workers,
    }
    base.update(extra)
    return base


def _molecular(cfg: ExperimentConfig) -> receiver.MolecularChannel:
    window = cfg.window()
    spec = cfg.receiver_spec()
    recv = receiver.dmc_block(spec, window.length)
    return receiver.molecular_channel(
        window, cfg.schedule(), cfg.fpt_model(), recv, guard=cfg.guard_pad()
    )


def cmd_fpt_scan(cfg: ExperimentConfig, out: Path) -> dict:
    model = cfg.fpt_model()
    schedule = cfg.schedule()
    i_max = int(cfg.get("fpt_scan", "i_max", default=20))
    t_max = float(cfg.get("fpt_scan", "t_max", default=6.0 * model.mean))
    t_points = int(cfg.get("fpt_scan", "t_points", default=121))

    ts = np.linspace(0.0, t_max, t_points)
    write_csv(
        out / "fpt_density.csv",
        ["t", "density", "cdf"],
        [(t, fptmod.fpt_density(t, model), fptmod.fpt_cdf(t, model)) for t in ts],
    )

    batches = split_trials(cfg.trials, 8)
    args = [
        (i_max, schedule, model, b, derive_rng(cfg.seed, "fpt-crossing", k))
        for k, b in enumerate(batches)
    ]
    parts = map_batches(fptmod.crossing_prob_mc, args, cfg.workers)
    rows = []
    for i in range(2, i_max + 1):
        p_hat = sum(part[i] * b for part, b in zip(parts, batches)) / cfg.trials
        se = np.sqrt(max(p_hat * (1 - p_hat), 0.0) / cfg.trials)
        rows.append((i, fptmod.crossing_prob_bound(i, schedule, model), p_hat, se))
    write_csv(out / "fpt_crossing.csv", ["i", "bound", "p_hat", "se"], rows)

    result = {"i_max": i_max, "mass": fptmod.total_mass(model)}
    if schedule.support_floor >= 1.0:
        scan = fptmod.superexp_decay_scan(
            i_max, schedule, model, cfg.trials, derive_rng(cfg.seed, "fpt-superexp")
        )
        write_csv(out / "fpt_superexp.csv", ["i", "weighted_p"], scan)
        result["superexp_rows"] = len(scan)
    return _summary(cfg, "fpt-scan", **result)


def cmd_perm_estimate(cfg: ExperimentConfig, out: Path) -> dict:
    window = cfg.window()
    model = cfg.fpt_model()
    schedule = cfg.schedule()
    margins = [int(m) for m in cfg.get("perm", "margins", default=list(range(0, 9)))]
    pad = int(cfg.get("perm", "pad", default=6))
    span_lo = window.extended_lo - max(max(margins) - window.margin, 0) - pad
    span_hi = window.extended_hi + max(max(margins) - window.margin, 0) + pad
    x = np.zeros(span_hi - span_lo, dtype=np.int8)

    dist = permchan.estimate_gamma(
        x, span_lo, window, schedule, model, cfg.trials, derive_rng(cfg.seed, "perm-gamma")
    )
    cells = sorted(
        ((",".join(map(str, p.ranks)), prob) for p, prob in dist.support.items()),
        key=lambda kv: (-kv[1], kv[0]),
    )
    write_csv(
        out / "gamma_cells.csv",
        ["ranks", "probability", "se"],
        [(r, p, dist.cell_se(p)) for r, p in cells],
    )
    curve = permchan.outlier_prob(
        x, span_lo, window, margins, schedule, model, cfg.trials,
        derive_rng(cfg.seed, "perm-outlier"),
    )
    write_csv(
        out / "outlier_curve.csv",
        ["margin", "eps_hat", "se"],
        [(m, e, np.sqrt(max(e * (1 - e), 0.0) / cfg.trials)) for m, e in curve],
    )
    return _summary(
        cfg, "perm-estimate",
        outlier_mass=dist.outlier_mass,
        low_confidence=dist.low_confidence,
        cells=len(cells),
    )


def cmd_adima_scan(cfg: ExperimentConfig, out: Path) -> dict:
    channel = _molecular(cfg)
    m_values = [int(m) for m in cfg.get("adima", "m_values", default=list(range(0, 7)))]
    pairs = int(cfg.get("adima", "pairs", default=20))
    rows = infotheory.adima_scan(
        channel, channel.n, m_values, derive_rng(cfg.seed, "adima"),
        trials=cfg.trials, pairs=pairs,
    )
    write_csv(out / "adima.csv", ["m", "sup_gap", "se"], rows)
    predicted = permchan.predicted_margin(
        cfg.schedule(), cfg.fpt_model(), channel.n, tol=0.02
    )
    return _summary(cfg, "adima-scan", predicted_margin=predicted, pairs=pairs)


def cmd_dbar_scan(cfg: ExperimentConfig, out: Path) -> dict:
    channel = _molecular(cfg)
    n_values = [int(n) for n in cfg.get("dbar", "n_values", default=[2, 4, 6])]
    pairs = int(cfg.get("dbar", "pairs", default=4))
    rows = infotheory.dbar_continuity_scan(
        channel, n_values, derive_rng(cfg.seed, "dbar"), trials=cfg.trials, pairs=pairs
    )
    write_csv(out / "dbar_scan.csv", ["n", "dbar", "se"], rows)
    return _summary(cfg, "dbar-scan", pairs=pairs)


def cmd_mixing_scan(cfg: ExperimentConfig, out: Path) -> dict:
    channel = _molecular(cfg)
    sec = cfg.raw.get("mixing", {})
    k_values = [int(k) for k in sec.get("k_values", [1, 2, 4, 8, 10, 12, 16])]
    f1 = (int(sec.get("f1_offset", 0)), tuple(sec.get("f1_pattern", [0, 1])))
    f2 = (int(sec.get("f2_offset", 0)), tuple(sec.get("f2_pattern", [1, 0])))
    rng = derive_rng(cfg.seed, "mixing-x")
    span = max(k_values) + len(f2[1]) + 2 * channel.context_width + 8
    x = rng.integers(0, channel.alphabet, size=span).astype(np.int8)
    x_start = -channel.context_width - 4
    rows = infotheory.strong_mixing_scan(
        channel, x, x_start, f1, f2, k_values, cfg.trials, derive_rng(cfg.seed, "mixing")
    )
    write_csv(out / "mixing.csv", ["k", "gap", "se"], rows)
    threshold = 2 * channel.window.margin + (len(f1[1]) - 1) + f2[0] + 1
    return _summary(cfg, "mixing-scan", mixing_threshold_k=threshold)


def _mi_histogram(out: Path, values: np.ndarray, bins: int = 50) -> None:
    counts, edges = np.histogram(values, bins=bins)
    write_csv(
        out / "i_histogram.csv",
        ["bin_lo", "bin_hi", "count"],
        [(edges[j], edges[j + 1], int(counts[j])) for j in range(bins)],
    )


def cmd_capacity(cfg: ExperimentConfig, out: Path) -> dict:
    kind = cfg.channel_kind()
    n = int(cfg.get("capacity", "n", default=16))
    samples = int(cfg.get("capacity", "samples", default=10_000))
    lambdas = [float(v) for v in cfg.get("capacity", "lambdas", default=[0.1, 0.05, 0.01])]
    rng = derive_rng(cfg.seed, "capacity")
    excluded = 0
    if kind == "bsc":
        spec = cfg.receiver_spec()
        uniform = np.full(spec.in_alphabet, 1.0 / spec.in_alphabet)
        mi = infotheory.mutual_information_exact(uniform, receiver.dmc_block(spec, 1))
        values, excluded = infotheory.draw_mi_samples(uniform, spec.matrix, n, samples, rng)
    else:
        matrix_n = int(cfg.get("capacity", "matrix_n", default=4))
        cfg.check_exact_guard(2, matrix_n, "capacity.matrix_n")
        matrix_trials = int(cfg.get("capacity", "matrix_trials", default=200_000))
        channel = _molecular(cfg)
        if channel.n != matrix_n:
            raise ConfigError("capacity.matrix_n must equal window.length for molecular runs")
        est = channel.estimate_matrix(matrix_trials, derive_rng(cfg.seed, "capacity-matrix"))
        uniform = np.full(est.matrix.shape[0], 1.0 / est.matrix.shape[0])
        mi = infotheory.mutual_information_exact(uniform, est)
        values, excluded = _mi_samples_from_matrix(est, samples, rng)
        n = matrix_n
    quantiles = {str(lam): infotheory.quantile_capacity(values, lam) for lam in lambdas}
    _mi_histogram(out, values)
    write_csv(
        out / "capacity_quantiles.csv",
        ["lambda", "quantile_capacity"],
        sorted(((float(k), v) for k, v in quantiles.items()), reverse=True),
    )
    return _summary(
        cfg, "capacity",
        n=n, samples=samples, mi_exact=mi, quantiles=quantiles, excluded_pairs=excluded,
    )


def _mi_samples_from_matrix(channel, count: int, rng: np.random.Generator):
    """i_n draws from the exact joint of a dense-matrix channel, uniform input."""
    matrix = channel.matrix
    k = matrix.shape[0]
    xs = rng.integers(0, k, size=count)
    cum = np.cumsum(matrix, axis=1)
    ys = (rng.random(count)[:, None] > cum[xs]).sum(axis=1)
    px = 1.0 / k
    py = matrix.mean(axis=0)
    pxy = matrix[xs, ys] / k
    good = (pxy > 0) & (py[ys] > 0)
    vals = np.log2(pxy[good] / (px * py[ys][good])) / channel.n
    return vals, int((~good).sum())


def _code_setup(cfg: ExperimentConfig):
    kind = cfg.channel_kind()
    if kind == "bsc":
        spec = cfg.receiver_spec()
        uniform = np.full(spec.in_alphabet, 1.0 / spec.in_alphabet)
        c_hat = infotheory.mutual_information_exact(uniform, receiver.dmc_block(spec, 1))
        factory = lambda n: receiver.dmc_block(spec, n)
        return kind, c_hat, factory, "ml", factory
    channel = _molecular(cfg)
    matrix_trials = int(cfg.get("capacity", "matrix_trials", default=200_000))
    est = channel.estimate_matrix(matrix_trials, derive_rng(cfg.seed, "code-chat"))
    uniform = np.full(est.matrix.shape[0], 1.0 / est.matrix.shape[0])
    c_hat = infotheory.mutual_information_exact(uniform, est)

    def factory(n: int):
        window = permchan.Window(start=0, length=n, margin=channel.window.margin)
        recv = receiver.dmc_block(cfg.receiver_spec(), n)
        return receiver.molecular_channel(
            window, cfg.schedule(), cfg.fpt_model(), recv, guard=channel.guard
        )

    return kind, c_hat, factory, "hamming", None


def cmd_code_eval(cfg: ExperimentConfig, out: Path) -> dict:
    kind, c_hat, factory, decoder, decode_factory = _code_setup(cfg)
    sec = cfg.raw.get("code", {})
    n_values = [int(n) for n in sec.get("n_values", [8, 12, 16])]
    rate_factors = [float(r) for r in sec.get("rate_factors", [0.5, 1.5])]
    codes_per_rate = int(sec.get("codes_per_rate", 5))
    trials = int(sec.get("trials", 2000))
    max_eval = int(sec.get("max_eval_codewords", 256))
    rows = coding.coding_theorem_experiment(
        factory, c_hat, n_values, rate_factors, derive_rng(cfg.seed, "code-eval"),
        trials=trials, codes_per_rate=codes_per_rate, decoder=decoder,
        max_eval_codewords=max_eval, decode_channel_factory=decode_factory,
    )
    write_csv(
        out / "code_eval.csv",
        ["rate_factor", "rate", "n", "m_codewords", "lambda_best", "se", "evaluated"],
        [
            (r.rate_factor, r.rate, r.n, r.m_codewords, r.lambda_best,
             r.lambda_best_se, r.evaluated_codewords)
            for r in rows
        ],
    )
    return _summary(cfg, "code-eval", channel=kind, c_hat=c_hat, decoder=decoder)


def cmd_source_channel(cfg: ExperimentConfig, out: Path) -> dict:
    kind, c_hat, factory, decoder, decode_factory = _code_setup(cfg)
    sec = cfg.raw.get("source_channel", {})
    p = float(sec.get("p", 0.11))
    n = int(sec.get("n", 16))
    trials = int(sec.get("trials", 4000))
    rate = float(sec.get("rate", 0.5 * (infotheory.binary_entropy(p) + c_hat)))
    channel = factory(n)
    decode_channel = decode_factory(n) if decode_factory else None
    result = coding.source_channel_experiment(
        np.array([1.0 - p, p]), channel, n, trials, derive_rng(cfg.seed, "source-channel"),
        rate=rate, decoder=decoder, decode_channel=decode_channel,
    )
    return _summary(
        cfg, "source-channel",
        channel=kind, c_hat=c_hat, n=n, rate=result.rate,
        source_entropy=result.source_entropy, p_error=result.p_error,
        se=result.se, typical_miss=result.typical_miss, m_codewords=result.m_codewords,
    )


def cmd_paper_suite(cfg: ExperimentConfig, out: Path) -> dict:
    suite = acceptance.run_suite(seed=cfg.seed, workers=cfg.workers)
    rows = [
        (r.number, r.name, "PASS" if r.passed else "FAIL")
        for r in suite.results
    ]
    write_csv(out / "acceptance.csv", ["criterion", "name", "status"], rows)
    for num, name, status in rows:
        print(f"{status} criterion {num}: {name}")
    return _summary(
        cfg, "paper-suite",
        passed=suite.all_passed,
        criteria={str(r.number): {"name": r.name, "passed": r.passed, "details": r.details}
                  for r in suite.results},
    )


HANDLERS = {
    "fpt-scan": cmd_fpt_scan,
    "perm-estimate": cmd_perm_estimate,
    "adima-scan": cmd_adima_scan,
    "dbar-scan": cmd_dbar_scan,
    "mixing-scan": cmd_mixing_scan,
    "capacity": cmd_capacity,
    "code-eval": cmd_code_eval,
    "source-channel": cmd_source_channel,
    "paper-suite": cmd_paper_suite,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="molchan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.monotonic()
    try:
        cfg = load_config(
            args.config, seed_override=args.seed,
            trials_override=args.trials, workers_override=args.workers,
        )
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[args.command](cfg, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except GuardError as e:
        print(f"guard violation: {e}", file=sys.stderr)
        return 3
    write_json(out / f"{args.command.replace('-', '_')}.json", summary)
    print(f"[{args.command}] finished in {time.monotonic() - started:.1f}s", file=sys.stderr)
    if args.command == "paper-suite" and not summary["passed"]:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
