"""TOML experiment configuration: one documented key/value tree per run.

Schema (sections marked * are required only by the subcommands that use
them; see README for the per-subcommand lists):

  [run]            seed (int, required unless --seed is given), trials, workers
  [fpt]*           diff_coeff, distance, drift
  [schedule]*      kind = synchronous|uniform|shifted_exponential, then
                   period / floor+width / floor+scale
  [window]*        start, length, margin, guard
  [receiver]*      kind = bsc|identity|kernel, crossover or kernel rows
  [channel]*       kind = molecular|bsc  (capacity / code-eval / source-channel)
  [fpt_scan]       i_max, t_max, t_points
  [perm]           margins, pad
  [adima]          m_values, pairs
  [dbar]           n_values, pairs
  [mixing]         k_values, f1_offset, f1_pattern, f2_offset, f2_pattern
  [capacity]       n, samples, lambdas, matrix_n, matrix_trials
  [code]           n_values, rate_factors, codes_per_rate, trials,
                   max_eval_codewords
  [source_channel] p, rate, n, trials

Syntax errors surface with the parser's line/column; semantic errors name
the dotted key.  Guards (window length, exact-matrix size) are checked at
parse time and raise GuardError so the CLI can exit with the guard code.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .blocks import MAX_EXACT_ROWS, GuardError
from .fpt import FptModel, ShiftedExponentialGaps, Synchronous, UniformGaps
from .permchan import MAX_MATRIX_WINDOW, Window
from .receiver import DmcSpec, bsc


class ConfigError(ValueError):
    """A configuration value is missing or invalid; the message names the key."""


@dataclass
class ExperimentConfig:
    seed: int
    trials: int
    workers: int
    raw: dict[str, Any]
    sha256: str
    path: str

    def section(self, name: str) -> dict[str, Any]:
        sec = self.raw.get(name)
        if sec is None:
            raise ConfigError(f"missing required section [{name}]")
        return sec

    def get(self, section: str, key: str, default=None, required: bool = False):
        sec = self.raw.get(section, {})
        if key not in sec:
            if required:
                raise ConfigError(f"missing required key {section}.{key}")
            return default
        return sec[key]

    # ---- typed accessors used by the subcommands ----

    def fpt_model(self) -> FptModel:
        sec = self.section("fpt")
        try:
            return FptModel(
                diff_coeff=float(sec["diff_coeff"]),
                distance=float(sec["distance"]),
                drift=float(sec["drift"]),
            )
        except KeyError as e:
            raise ConfigError(f"missing required key fpt.{e.args[0]}") from None
        except ValueError as e:
            raise ConfigError(f"invalid [fpt] value: {e}") from None

    def schedule(self):
        sec = self.section("schedule")
        kind = sec.get("kind")
        try:
            if kind == "synchronous":
                return Synchronous(period=float(sec["period"]))
            if kind == "uniform":
                return UniformGaps(floor=float(sec["floor"]), width=float(sec.get("width", 0.0)))
            if kind == "shifted_exponential":
                return ShiftedExponentialGaps(floor=float(sec["floor"]), scale=float(sec["scale"]))
        except KeyError as e:
            raise ConfigError(f"missing required key schedule.{e.args[0]}") from None
        except ValueError as e:
            raise ConfigError(f"invalid [schedule] value: {e}") from None
        raise ConfigError(f"schedule.kind must be synchronous|uniform|shifted_exponential, got {kind!r}")

    def window(self) -> Window:
        sec = self.section("window")
        try:
            win = Window(
                start=int(sec.get("start", 0)),
                length=int(sec["length"]),
                margin=int(sec["margin"]),
            )
        except KeyError as e:
            raise ConfigError(f"missing required key window.{e.args[0]}") from None
        except ValueError as e:
            raise ConfigError(f"invalid [window] value: {e}") from None
        if win.length > MAX_MATRIX_WINDOW:
            raise GuardError(
                f"window.length = {win.length} exceeds the enumeration guard {MAX_MATRIX_WINDOW}"
            )
        return win

    def guard_pad(self) -> int:
        return int(self.get("window", "guard", default=6))

    def receiver_spec(self) -> DmcSpec:
        sec = self.section("receiver")
        kind = sec.get("kind", "bsc")
        try:
            if kind == "bsc":
                return bsc(float(sec["crossover"]))
            if kind == "identity":
                return DmcSpec(np.eye(int(sec.get("alphabet", 2))))
            if kind == "kernel":
                return DmcSpec(np.asarray(sec["kernel"], dtype=float))
        except KeyError as e:
            raise ConfigError(f"missing required key receiver.{e.args[0]}") from None
        except ValueError as e:
            raise ConfigError(f"invalid [receiver] value: {e}") from None
        raise ConfigError(f"receiver.kind must be bsc|identity|kernel, got {kind!r}")

    def channel_kind(self) -> str:
        kind = self.get("channel", "kind", default="molecular")
        if kind not in ("molecular", "bsc"):
            raise ConfigError(f"channel.kind must be molecular|bsc, got {kind!r}")
        return kind

    def check_exact_guard(self, alphabet: int, n: int, context: str) -> None:
        if alphabet**n > MAX_EXACT_ROWS:
            raise GuardError(
                f"{context}: {alphabet}^{n} = {alphabet**n} rows exceed the "
                f"exact-matrix guard {MAX_EXACT_ROWS}"
            )


def load_config(
    path: str,
    seed_override: Optional[int] = None,
    trials_override: Optional[int] = None,
    workers_override: Optional[int] = None,
) -> ExperimentConfig:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None

    run = raw.get("run", {})
    seed = seed_override if seed_override is not None else run.get("seed")
    if seed is None:
        raise ConfigError("a seed is mandatory: set run.seed or pass --seed")
    trials = trials_override if trials_override is not None else run.get("trials", 20_000)
    workers = workers_override if workers_override is not None else run.get("workers", 1)
    if int(trials) < 1:
        raise ConfigError(f"run.trials must be >= 1, got {trials}")
    if int(workers) < 1:
        raise ConfigError(f"run.workers must be >= 1, got {workers}")

    cfg = ExperimentConfig(
        seed=int(seed),
        trials=int(trials),
        workers=int(workers),
        raw=raw,
        sha256=hashlib.sha256(data).hexdigest(),
        path=path,
    )
    # parse-time validation of whatever sections are present
    for name, probe in (
        ("fpt", cfg.fpt_model),
        ("schedule", cfg.schedule),
        ("window", cfg.window),
        ("receiver", cfg.receiver_spec),
    ):
        if name in raw:
            probe()
    return cfg
