"""The acceptance suite: eleven property checks run at pinned parameters.

Each criterion function returns a CriterionResult with a pass flag, a
details dict of observed numbers, and its runtime.  `run_suite` executes all
eleven in order; the CLI's paper-suite subcommand prints one PASS/FAIL line
per criterion and exits nonzero when any fail.

Two checks are expected to fail at their stated tolerances and are kept
as-is rather than loosened; their details record the measured values and
the analysis thresholds:

  * criterion 8's quantile clause: at blocklength 16 the per-symbol sample
    information of a BSC(0.11) has standard deviation ~0.236, so its 5%
    quantile sits ~0.42 below the mutual information, far outside the 0.05
    tolerance (exact order-statistic value: 0.0778).
  * criterion 9's below-capacity clause: 17 random 16-bit codewords almost
    surely contain a pair at Hamming distance <= 4, pinning the worst-case
    ML error above ~0.06 (minimum over 400 piloted codes: 0.061), so the
    stated 0.05 threshold is unreachable by unexpurgated random coding.

The pinned channel used throughout: drift-diffusion law with diffusion
coefficient 0.25, distance 1, drift 1, synchronous gap 1, window margin 4,
guard 6, BSC(0.05) receiver.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cli, coding, infotheory as it, permchan as pc, receiver as rc
from . import fpt as fptmod
from .rngtools import derive_rng

GOLDEN_SEED = 20260808

PINNED_MODEL = fptmod.FptModel(diff_coeff=0.25, distance=1.0, drift=1.0)
PINNED_SCHEDULE = fptmod.Synchronous(period=1.0)
PINNED_MARGIN = 4
PINNED_GUARD = 6
PINNED_CROSSOVER = 0.05

MASS_TRIPLES = (
    (0.25, 1.0, 1.0), (0.1, 0.5, 2.0), (1.0, 2.0, 0.5), (0.5, 1.0, 1.0),
    (2.0, 3.0, 1.5), (0.05, 0.3, 1.0), (0.7, 1.5, 0.8), (3.0, 4.0, 2.0),
    (0.25, 2.0, 0.5), (1.5, 0.8, 1.2),
)

# pilot-pinned thresholds for the molecular coding ordering (criterion 9):
# below-capacity best-of-5 errors landed in [0.16, 0.40], above-capacity
# best errors in [0.69, 0.88] across piloted seeds.
MOLECULAR_BELOW_THRESHOLD = 0.45
MOLECULAR_ABOVE_THRESHOLD = 0.55


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict
    seconds: float


@dataclass
class SuiteResult:
    results: list[CriterionResult] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def total_seconds(self) -> float:
        return sum(r.seconds for r in self.results)


def _timed(number: int, name: str, fn) -> CriterionResult:
    t0 = time.monotonic()
    passed, details = fn()
    return CriterionResult(
        number=number, name=name, passed=bool(passed), details=details,
        seconds=time.monotonic() - t0,
    )


def pinned_molecular(length: int, receiver_n: int | None = None) -> rc.MolecularChannel:
    window = pc.Window(start=0, length=length, margin=PINNED_MARGIN)
    recv = rc.dmc_block(rc.bsc(PINNED_CROSSOVER), receiver_n or length)
    return rc.molecular_channel(
        window, PINNED_SCHEDULE, PINNED_MODEL, recv, guard=PINNED_GUARD
    )


def criterion_1_fpt(seed: int) -> CriterionResult:
    def run():
        worst_mass = 0.0
        for nu, x, v in MASS_TRIPLES:
            model = fptmod.FptModel(nu, x, v)
            worst_mass = max(worst_mass, abs(fptmod.total_mass(model) - 1.0))
        draws = fptmod.sample_fpt(PINNED_MODEL, derive_rng(seed, "c1-sampler"), size=1_000_000)
        ks = fptmod.ks_statistic(draws, PINNED_MODEL)
        mean_err = abs(float(draws.mean()) - PINNED_MODEL.mean)
        # closed-form CDF vs quadrature tail, the dual route behind the KS statistic
        route_gap = max(
            abs((1.0 - fptmod.fpt_cdf(t, PINNED_MODEL)) - fptmod.fpt_tail(t, PINNED_MODEL))
            for t in (0.5, 1.0, 2.0, 5.0)
        )
        passed = worst_mass <= 1e-6 and ks < 0.005 and mean_err <= 0.01 and route_gap <= 1e-7
        return passed, {
            "worst_mass_error": worst_mass, "ks": ks,
            "mean_error": mean_err, "cdf_route_gap": route_gap,
        }
    return _timed(1, "first-passage law: mass, sampler KS, mean", run)


def criterion_2_crossing(seed: int) -> CriterionResult:
    def run():
        trials = 100_000
        p_hat = fptmod.crossing_prob_mc(
            20, PINNED_SCHEDULE, PINNED_MODEL, trials, derive_rng(seed, "c2-mc")
        )
        violations = []
        for i in range(2, 21):
            bound = fptmod.crossing_prob_bound(i, PINNED_SCHEDULE, PINNED_MODEL)
            se = math.sqrt(max(p_hat[i] * (1 - p_hat[i]), 0.0) / trials)
            if p_hat[i] > bound + 3 * se:
                violations.append((i, p_hat[i], bound))
        sup_trials = 1_000_000
        scan = fptmod.superexp_decay_scan(
            20, PINNED_SCHEDULE, PINNED_MODEL, sup_trials, derive_rng(seed, "c2-superexp")
        )
        weighted = [v for _, v in scan]
        # the weighted estimate at index i carries Monte-Carlo noise e^i * se(p_hat);
        # eventual decrease is asserted from the peak onward with 3-SE slack
        slack = [
            3.0 * math.exp(i) * math.sqrt(max(v * math.exp(-i) * (1 - v * math.exp(-i)), 0.0) / sup_trials)
            for i, v in scan
        ]
        peak = int(np.argmax(weighted))
        eventually_down = all(
            weighted[j + 1] <= weighted[j] + slack[j] + slack[j + 1]
            for j in range(peak, len(weighted) - 1)
        )
        passed = not violations and eventually_down
        return passed, {
            "bound_violations": violations,
            "superexp_head": [round(v, 6) for v in weighted[:6]],
            "eventually_decreasing": eventually_down,
        }
    return _timed(2, "crossing bounds dominate Monte Carlo; weighted decay dies out", run)


def criterion_3_perm_structure(seed: int) -> CriterionResult:
    def run():
        lv = pc.local_version((5, 4, 3, 1, 2), (1, 3, 5))
        example_ok = lv.ranks == (3, 2, 1)

        window = pc.Window(start=0, length=4, margin=4)
        x = (np.arange(12) % 2).astype(np.int8)
        rng = derive_rng(seed, "c3-identity")
        identity_ok = True
        for _ in range(200):
            blk, perm, outlier = pc.sample_output(
                x, -4, window, fptmod.Synchronous(1e9), PINNED_MODEL, rng
            )
            if outlier or perm.ranks != tuple(range(1, 13)) or not np.array_equal(blk, x[4:8]):
                identity_ok = False
                break

        w2 = pc.Window(start=0, length=2, margin=0)
        near_zero = fptmod.UniformGaps(floor=1e-12, width=0.0)
        dist = pc.estimate_gamma(
            np.array([0, 1], dtype=np.int8), 0, w2, near_zero, PINNED_MODEL,
            100_000, derive_rng(seed, "c3-symmetry"),
        )
        freqs = {p.ranks: v for p, v in dist.support.items()}
        sym_err = max(abs(freqs.get((1, 2), 0.0) - 0.5), abs(freqs.get((2, 1), 0.0) - 0.5))

        passed = example_ok and identity_ok and sym_err <= 0.01
        return passed, {
            "local_version": lv.ranks, "identity_degeneration": identity_ok,
            "symmetry_error": sym_err,
        }
    return _timed(3, "permutation structure: worked example, degenerations, symmetry", run)


def criterion_4_adima(seed: int) -> CriterionResult:
    def run():
        kern = derive_rng(seed, "c4-kernel").random((8, 2))
        kern /= kern.sum(axis=1, keepdims=True)
        fmc = rc.finite_memory_channel(kern, w=2)
        exact = it.adima_scan(fmc, 4, [0, 1, 2, 3, 4], derive_rng(seed, "c4-exact"), pairs=16)
        exact_ok = all(g == 0.0 for m, g, _ in exact if m >= 2) and exact[0][1] > 0

        channel = pinned_molecular(4)
        rows = it.adima_scan(
            channel, 4, list(range(0, 8)), derive_rng(seed, "c4-mol"),
            trials=20_000, pairs=20,
        )
        mono_ok = all(
            rows[j + 1][1] <= rows[j][1] + 3 * (rows[j][2] + rows[j + 1][2])
            for j in range(len(rows) - 1)
        )
        predicted = pc.predicted_margin(PINNED_SCHEDULE, PINNED_MODEL, 4, tol=0.02)
        beyond_ok = all(g < 0.02 for m, g, _ in rows if m >= predicted)
        passed = exact_ok and mono_ok and beyond_ok
        return passed, {
            "finite_memory_gap_at_w": exact[2][1],
            "predicted_margin": predicted,
            "curve": [(m, round(g, 5)) for m, g, _ in rows],
            "monotone": mono_ok, "below_tol_beyond_margin": beyond_ok,
        }
    return _timed(4, "input memory fades: exact exemplar and molecular scan", run)


def criterion_5_mixing(seed: int) -> CriterionResult:
    def run():
        control = it.dmc_mixing_gap_exact(
            rc.bsc(0.2).matrix, np.zeros(30, dtype=np.int8), -5, (0, (0, 1)), (0, (1, 0)), 5
        )
        channel = pinned_molecular(4)
        x = derive_rng(seed, "c5-x").integers(0, 2, size=64).astype(np.int8)
        k_values = [1, 2, 4, 6, 8, 10, 12, 16]
        rows = it.strong_mixing_scan(
            channel, x, -22, (0, (0, 1)), (0, (1, 0)), k_values,
            30_000, derive_rng(seed, "c5-mix"),
        )
        threshold = 2 * PINNED_MARGIN + (2 - 1) + 0  # 2 m' + n + p with n = len(F1)-1
        far = [(k, g, s) for k, g, s in rows if k > threshold]
        far_ok = all(g <= 3 * s for _, g, s in far)
        passed = control <= 1e-12 and far_ok and len(far) >= 2
        return passed, {
            "memoryless_control": control, "threshold_k": threshold,
            "curve": [(k, round(g, 5), round(s, 5)) for k, g, s in rows],
            "beyond_threshold_ok": far_ok,
        }
    return _timed(5, "output events decorrelate beyond the mixing horizon", run)


def criterion_6_dbar(seed: int) -> CriterionResult:
    def run():
        p3 = it.FiniteDistribution.from_dense(it.iid_product([0.7, 0.3], 2), 2, 2)
        p5 = it.FiniteDistribution.from_dense(it.iid_product([0.5, 0.5], 2), 2, 2)
        v_same, _ = it.dbar_exact(p3, p3)
        u = it.FiniteDistribution(np.array([[0, 1, 1, 0]]), [1.0])
        w = it.FiniteDistribution(np.array([[0, 0, 1, 0]]), [1.0])
        v_point, _ = it.dbar_exact(u, w)
        v_prod, _ = it.dbar_exact(p3, p5)
        golden_ok = v_same <= 1e-12 and abs(v_point - 0.25) <= 1e-12 and abs(v_prod - 0.2) <= 1e-9

        rng = derive_rng(seed, "c6-triples")
        worst_sym, worst_tri = 0.0, 0.0
        from .blocks import all_blocks
        for _ in range(100):
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
            worst_sym = max(worst_sym, abs(dab - dba))
            worst_tri = max(worst_tri, dab - (dac + dcb))
        metric_ok = worst_sym <= 1e-9 and worst_tri <= 1e-9

        channel = pinned_molecular(4)
        scan = it.dbar_continuity_scan(
            channel, [2, 4, 6], derive_rng(seed, "c6-scan"), trials=4000, pairs=4
        )
        tail_ok = all(
            scan[j + 1][1] <= scan[j][1] + 3 * (scan[j][2] + scan[j + 1][2])
            for j in range(len(scan) - 1)
        ) and scan[-1][1] < scan[0][1]
        passed = golden_ok and metric_ok and tail_ok
        return passed, {
            "golden": {"same": v_same, "point": v_point, "product": v_prod},
            "worst_symmetry": worst_sym, "worst_triangle_violation": worst_tri,
            "continuity_curve": [(n, round(v, 5)) for n, v, _ in scan],
        }
    return _timed(6, "transport distance: golden cases, metric laws, continuity tail", run)


def criterion_7_contrast(seed: int) -> CriterionResult:
    def run():
        vs, dbars = [], []
        for n in (1, 2, 4, 8):
            p = it.FiniteDistribution.from_dense(it.iid_product([0.7, 0.3], n), n, 2)
            q = it.FiniteDistribution.from_dense(it.iid_product([0.5, 0.5], n), n, 2)
            vs.append(it.variational_distance(p, q))
            d, _ = it.dbar_exact(p, q)
            dbars.append(d)
        increasing = all(a < b for a, b in zip(vs, vs[1:]))
        flat = all(abs(d - 0.2) <= 1e-6 for d in dbars)
        return increasing and flat, {
            "variational": [round(v, 6) for v in vs],
            "dbar": [round(d, 9) for d in dbars],
        }
    return _timed(7, "variational distance diverges while transport distance stays put", run)


def criterion_8_identities(seed: int) -> CriterionResult:
    def run():
        worst_identity = 0.0
        from .blocks import all_blocks
        cases = [
            (rc.dmc_block(rc.bsc(0.11), 3), it.iid_product([0.5, 0.5], 3)),
            (
                rc.dmc_block(rc.DmcSpec(np.array(
                    [[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.25, 0.25, 0.5]]
                )), 2),
                it.iid_product([0.2, 0.5, 0.3], 2),
            ),
        ]
        for channel, src in cases:
            joint = it.joint_table(src, channel)
            px = joint.sum(axis=1)
            py = joint.sum(axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.log2(joint / (px[:, None] * py[None, :])) / channel.n
            mean_i = float(np.nansum(np.where(joint > 0, joint * ratios, 0.0)))
            worst_identity = max(
                worst_identity, abs(mean_i - it.mutual_information_exact(src, channel))
            )
        identity_ok = worst_identity <= 1e-9

        values, excluded = it.draw_mi_samples(
            [0.5, 0.5], rc.bsc(0.11).matrix, 16, 10_000, derive_rng(seed, "c8-quantile")
        )
        target = 1.0 - it.binary_entropy(0.11)
        cstar = it.quantile_capacity(values, 0.05)
        gap = abs(cstar - target)
        quantile_ok = gap <= 0.05  # fails: finite-blocklength quantile spread, see module docstring
        return identity_ok and quantile_ok, {
            "worst_identity_gap": worst_identity,
            "quantile_capacity_0p05": cstar,
            "mi_target": target,
            "quantile_gap": gap,
            "exact_order_statistic_value": 0.0778,
            "excluded_pairs": excluded,
        }
    return _timed(8, "sample-information identities and the quantile-capacity tolerance", run)


def criterion_9_coding(seed: int) -> CriterionResult:
    def run():
        spec = rc.bsc(0.11)
        c_bsc = it.mutual_information_exact([0.5, 0.5], rc.dmc_block(spec, 1))
        bsc_factory = lambda n: rc.dmc_block(spec, n)
        below = coding.coding_theorem_experiment(
            bsc_factory, c_bsc, [16], [0.5], derive_rng(seed, "c9-bsc-below"),
            trials=2000, codes_per_rate=5, decoder="ml",
            decode_channel_factory=bsc_factory,
        )[0]
        above = coding.coding_theorem_experiment(
            bsc_factory, c_bsc, [8, 12, 16], [1.5], derive_rng(seed, "c9-bsc-above"),
            trials=1500, codes_per_rate=2, decoder="ml", max_eval_codewords=128,
            decode_channel_factory=bsc_factory,
        )
        bsc_below_ok = below.lambda_best < 0.05  # fails: random 16-bit codebooks
        bsc_above_ok = all(r.lambda_best > 0.3 for r in above)
        bsc_ordering = below.lambda_best < min(r.lambda_best for r in above)

        mol4 = pinned_molecular(4)
        est = mol4.estimate_matrix(200_000, derive_rng(seed, "c9-mol-chat"))
        c_mol = it.mutual_information_exact(
            np.full(est.matrix.shape[0], 1.0 / est.matrix.shape[0]), est
        )

        def mol_factory(n: int):
            return pinned_molecular(n)

        mol_below = coding.coding_theorem_experiment(
            mol_factory, c_mol, [8, 12, 16], [0.5], derive_rng(seed, "c9-mol-below"),
            trials=2000, codes_per_rate=5, decoder="hamming",
        )
        mol_above = coding.coding_theorem_experiment(
            mol_factory, c_mol, [8, 12, 16], [1.5], derive_rng(seed, "c9-mol-above"),
            trials=1500, codes_per_rate=2, decoder="hamming", max_eval_codewords=128,
        )
        mol_ok = all(r.lambda_best < MOLECULAR_BELOW_THRESHOLD for r in mol_below) and all(
            r.lambda_best > MOLECULAR_ABOVE_THRESHOLD for r in mol_above
        )
        passed = bsc_below_ok and bsc_above_ok and bsc_ordering and mol_ok
        return passed, {
            "bsc_c_hat": c_bsc,
            "bsc_below_lambda": below.lambda_best,
            "bsc_below_threshold": 0.05,
            "bsc_pilot_min_over_400_codes": 0.061,
            "bsc_above_lambdas": [r.lambda_best for r in above],
            "bsc_ordering_ok": bsc_ordering,
            "molecular_c_hat": c_mol,
            "molecular_below": [(r.n, r.lambda_best) for r in mol_below],
            "molecular_above": [(r.n, r.lambda_best) for r in mol_above],
            "molecular_ok": mol_ok,
        }
    return _timed(9, "coding theorem ordering on both channels", run)


def criterion_10_cascade(seed: int) -> CriterionResult:
    def run():
        worst = 0.0
        for n in (1, 2):
            left = rc.cascade(rc.dmc_block(rc.bsc(0.1), n), rc.dmc_block(rc.bsc(0.2), n))
            right = rc.dmc_block(rc.bsc(0.26), n)
            worst = max(worst, float(np.abs(left.matrix - right.matrix).max()))

        rng = derive_rng(seed, "c10-assoc")
        assoc = 0.0
        for _ in range(5):
            mats = []
            for _ in range(3):
                mat = rng.random((4, 4))
                mats.append(rc.BlockChannel(
                    n=2, in_alphabet=2, out_alphabet=2,
                    matrix=mat / mat.sum(axis=1, keepdims=True),
                ))
            a, b, c = mats
            lhs = rc.cascade(rc.cascade(a, b), c).matrix
            rhs = rc.cascade(a, rc.cascade(b, c)).matrix
            assoc = max(assoc, float(np.abs(lhs - rhs).max()))

        k1 = rng.random((4, 2)); k1 /= k1.sum(axis=1, keepdims=True)
        k2 = rng.random((4, 2)); k2 /= k2.sum(axis=1, keepdims=True)
        cw = rc.CascadeWindow(rc.finite_memory_channel(k1, 1), rc.finite_memory_channel(k2, 1))
        scan = it.adima_scan(cw, 3, [0, 1, 2, 3], derive_rng(seed, "c10-adima"), pairs=12)
        gaps = {m: g for m, g, _ in scan}
        window_ok = gaps[2] == 0.0 and gaps[3] == 0.0 and gaps[0] > 0
        passed = worst <= 1e-12 and assoc <= 1e-12 and window_ok
        return passed, {
            "bsc_composition_error": worst, "associativity_error": assoc,
            "cascade_gap_curve": [(m, round(g, 8)) for m, g, _ in scan],
        }
    return _timed(10, "cascade algebra and additive memory windows", run)


_DETERMINISM_CONFIG = """\
[run]
seed = 7
trials = 4000

[fpt]
diff_coeff = 0.25
distance = 1.0
drift = 1.0

[schedule]
kind = "synchronous"
period = 1.0

[window]
start = 0
length = 3
margin = 3

[receiver]
kind = "bsc"
crossover = 0.05

[channel]
kind = "bsc"

[fpt_scan]
i_max = 8
t_points = 41

[perm]
margins = [0, 1, 2, 3, 4]
pad = 4

[capacity]
n = 8
samples = 2000
"""


def criterion_11_determinism(seed: int, elapsed_before: float) -> CriterionResult:
    def run():
        mismatches = []
        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = Path(tmp)
            cfg_path = tmp_path / "det.toml"
            cfg_path.write_text(_DETERMINISM_CONFIG)
            for command in ("fpt-scan", "perm-estimate", "capacity"):
                dirs = []
                for rep in range(2):
                    out = tmp_path / f"{command}-{rep}"
                    rcode = cli.main([
                        command, "--config", str(cfg_path), "--seed", str(seed),
                        "--out", str(out),
                    ])
                    if rcode != 0:
                        mismatches.append((command, f"exit code {rcode}"))
                    dirs.append(out)
                names = sorted(p.name for p in dirs[0].iterdir())
                if names != sorted(p.name for p in dirs[1].iterdir()):
                    mismatches.append((command, "artifact lists differ"))
                    continue
                for name in names:
                    if (dirs[0] / name).read_bytes() != (dirs[1] / name).read_bytes():
                        mismatches.append((command, name))
        passed = not mismatches
        return passed, {"mismatches": mismatches}
    result = _timed(11, "byte-identical reruns and the runtime budget", run)
    # wall-clock stays off the details dict: it is embedded in artifacts,
    # which must be byte-identical across reruns
    within_budget = elapsed_before + result.seconds <= 1800.0
    result.details["runtime_budget_ok"] = within_budget
    if not within_budget:
        result.passed = False
    return result


def run_suite(seed: int = GOLDEN_SEED, workers: int = 1) -> SuiteResult:
    suite = SuiteResult()
    for fn in (
        criterion_1_fpt, criterion_2_crossing, criterion_3_perm_structure,
        criterion_4_adima, criterion_5_mixing, criterion_6_dbar,
        criterion_7_contrast, criterion_8_identities, criterion_9_coding,
        criterion_10_cascade,
    ):
        suite.results.append(fn(seed))
    suite.results.append(criterion_11_determinism(seed, suite.total_seconds))
    return suite
