"""Experiment orchestration: config, deterministic seeding, trial fan-out,
and the summary statistics used by the acceptance suite (nearest-rank
quantiles, log–log exponent fits, chi-square uniformity)."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import chi2

from . import engine, scripts
from .adversaries import greedy_attack
from .engine import HashModel, Mode, TraceMode
from .rng import child_rng, child_seed
from .strategies import make_strategy

__all__ = [
    "nearest_rank_quantile",
    "SummaryStats",
    "fit_exponent",
    "chi_square_uniform",
    "ExperimentConfig",
    "run_experiment",
]


def nearest_rank_quantile(values: list[float], p: float) -> float:
    """Nearest-rank quantile: the ⌈p·N⌉-th smallest value (no interpolation)."""
    if not values:
        raise ValueError("empty sample")
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    ordered = sorted(values)
    rank = max(1, math.ceil(p * len(ordered)))
    return ordered[rank - 1]


@dataclass
class SummaryStats:
    count: int
    p50: float
    p90: float
    p99: float
    mean: float
    max: float
    halts: int = 0
    corrupted: int = 0

    @classmethod
    def from_values(cls, values: list[float], halts: int = 0, corrupted: int = 0) -> "SummaryStats":
        return cls(
            count=len(values),
            p50=nearest_rank_quantile(values, 0.50),
            p90=nearest_rank_quantile(values, 0.90),
            p99=nearest_rank_quantile(values, 0.99),
            mean=sum(values) / len(values),
            max=max(values),
            halts=halts,
            corrupted=corrupted,
        )

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def fit_exponent(points: list[tuple[float, float]]) -> tuple[float, float]:
    """OLS slope (and standard error) of log(median) against log(m)."""
    if len(points) < 3:
        raise ValueError("need at least 3 points to fit an exponent")
    if any(m <= 0 or y <= 0 for m, y in points):
        raise ValueError("non-positive point; exponent not fittable")
    x = np.log([m for m, _ in points])
    y = np.log([v for _, v in points])
    n = len(x)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    if n > 2:
        var = float(resid @ resid) / (n - 2)
        stderr = math.sqrt(var / float(((x - x.mean()) ** 2).sum()))
    else:
        stderr = 0.0
    return float(slope), stderr


def chi_square_uniform(counts: list[float], expected: list[float], alpha: float = 0.01) -> tuple[float, int, bool]:
    """Pearson chi-square against the expected counts; pass iff the statistic
    is below the critical value at the given alpha."""
    if len(counts) != len(expected):
        raise ValueError("counts/expected length mismatch")
    if any(e < 5 for e in expected):
        raise ValueError("expected cell count below 5; test unreliable")
    stat = sum((c - e) ** 2 / e for c, e in zip(counts, expected))
    dof = len(counts) - 1
    critical = float(chi2.ppf(1 - alpha, dof))
    return stat, dof, stat <= critical


@dataclass
class ExperimentConfig:
    name: str
    strategy: dict  # {"name": ..., "params": {...}}
    script: dict  # {"generator": ..., "params": {...}}
    n: int
    m: list[int]  # sweep points (singleton for a plain run)
    trials: int
    root_seed: int
    hash_model: str = "independent_pair"
    mode: str = "insertion_deletion"
    trace_mode: str = "overload"
    overload_metric: str = "seen"  # "seen" | "cap"
    out_dir: Optional[str] = None

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        if isinstance(data.get("m"), int):
            data["m"] = [data["m"]]
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)

    def validate(self) -> None:
        if self.trials < 1 or not self.m or self.n < 2:
            raise ValueError("invalid config: need trials >= 1, m non-empty, n >= 2")
        if self.overload_metric not in ("seen", "cap"):
            raise ValueError("overload_metric must be 'seen' or 'cap'")


def _build_script(generator: str, params: dict, m: int, script_seed: int):
    if generator == "sawtooth":
        return scripts.sawtooth_script(
            m_cap=m,
            total_ops=params.get("total_ops", 10 * m),
            amplitude=params.get("amplitude", max(1, m // 8)),
            script_seed=script_seed,
        )
    if generator == "insertion_only":
        return scripts.insertion_only_script(m)
    if generator == "random_deletion_warmup":
        rng = child_rng(script_seed, "warmup")
        return greedy_attack.random_deletion_warmup(m, params.get("deletion_prob", 0.5), rng)
    if generator == "greedy_attack":
        attack_params = greedy_attack.GreedyAttackParams(m=m, **params)
        script, _ = greedy_attack.greedy_attack_full(attack_params, script_seed)
        return script
    raise ValueError(f"unknown script generator {generator!r}")


def _make_strategy(spec: dict, m: int):
    params = dict(spec.get("params", {}))
    # Allow M to track the sweep point.
    if params.get("M") == "m":
        params["M"] = m
    return make_strategy(spec["name"], **params)


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the full sweep deterministically and return pooled statistics.

    Writes per-trial CSV, a pooled JSON summary, and a config echo when
    out_dir is set.  Identical configs produce identical outputs.
    """
    config.validate()
    hash_model = HashModel(config.hash_model)
    mode = Mode(config.mode)
    trace_mode = TraceMode(config.trace_mode)
    rows = ["name,m,trial,seed,max_overload,max_load,halted,halts,corrupted"]
    per_point = {}
    for m in config.m:
        values = []
        halts = 0
        corrupted = 0
        for trial in range(config.trials):
            script_seed = child_seed(config.root_seed, config.name, "m", m, "trial", trial, "script")
            hash_rng = child_rng(config.root_seed, config.name, "m", m, "trial", trial, "hash")
            coin_rng = child_rng(config.root_seed, config.name, "m", m, "trial", trial, "coin")
            script = _build_script(config.script["generator"], config.script.get("params", {}), m, script_seed)
            strategy = _make_strategy(config.strategy, m)
            state = engine.new_system(config.n, m, hash_model=hash_model, mode=mode)
            trace = engine.run(state, script, strategy, hash_rng, coin_rng, trace_mode=trace_mode)
            ov = trace.max_overload_seen if config.overload_metric == "seen" else trace.max_overload_cap
            values.append(ov)
            halts += getattr(strategy, "halts", 0) + (1 if trace.halted else 0)
            corrupted += getattr(strategy, "corrupted_count", 0)
            rows.append(
                f"{config.name},{m},{trial},{script_seed},{ov},{trace.max_load_overall},"
                f"{int(trace.halted)},{getattr(strategy, 'halts', 0)},{getattr(strategy, 'corrupted_count', 0)}"
            )
        per_point[m] = SummaryStats.from_values(values, halts=halts, corrupted=corrupted).as_dict()

    result = {"name": config.name, "per_point": per_point}
    medians = [(m, per_point[m]["p50"]) for m in config.m]
    if len(medians) >= 3 and all(v > 0 for _, v in medians):
        exponent, stderr = fit_exponent(medians)
        result["exponent"] = exponent
        result["exponent_stderr"] = stderr
    else:
        result["exponent"] = None

    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        base = os.path.join(config.out_dir, config.name)
        with open(base + ".trials.csv", "w") as fh:
            fh.write("\n".join(rows) + "\n")
        with open(base + ".summary.json", "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
        with open(base + ".config.json", "w") as fh:
            fh.write(config.to_json())
    return result
