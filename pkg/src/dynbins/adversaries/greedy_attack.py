"""Constructions that drive Greedy to polynomial overload.

The pieces: a random-deletion warmup that opens a ~sqrt(m) load gap, a
gap-to-overload finisher that converts a gap of k into ~sqrt(k) overload,
and the phased gadget construction (uniform-placement gadgets plus a load
reduction gadget per phase) that opens a much larger gap before finishing.
All scripts are generated obliviously from a dedicated script seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from ..rng import child_rng
from ..scripts import Script, ScriptBuilder

__all__ = [
    "GreedyAttackParams",
    "random_deletion_warmup",
    "append_uniform_placement_gadget",
    "append_load_reduction_gadget",
    "append_gap_to_overload",
    "gap_to_overload_script",
    "greedy_attack_full",
    "equalization_probe",
]


@dataclass
class GreedyAttackParams:
    m: int
    n: int = 4
    eps1: float = 1 / 8
    eps3: float = 2.0**-16
    mode: str = "warmup_quarter"  # warmup_quarter | full_half | general_n
    k: Optional[int] = None  # finisher gap target; default sqrt(m), or
    # 1.75·sqrt(phases·per_phase) in full_half mode
    deletion_prob: float = 0.5

    # eps2 is tied to eps3; the orderings eps1 > eps2 > eps3 must hold.
    @property
    def eps2(self) -> float:
        return (2 * self.eps3) ** (1 / 3)

    def validate(self) -> None:
        if not (0 < self.eps3 < self.eps2 < self.eps1 < 1):
            raise ValueError(f"need eps1 > eps2 > eps3 in (0,1); got {self.eps1}, {self.eps2}, {self.eps3}")
        if self.mode not in ("warmup_quarter", "full_half", "general_n"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "full_half" and self.n != 4:
            raise ValueError("full_half construction is specific to 4 bins")


def random_deletion_warmup(m: int, deletion_prob: float, rng: random.Random) -> Script:
    """Insert m fresh balls, then delete each independently with the given
    probability (the random subset is drawn from the script stream)."""
    builder = ScriptBuilder(m)
    labels = [builder.insert() for _ in range(m)]
    for label in labels:
        if rng.random() < deletion_prob:
            builder.delete(label)
    return builder.build(meta={"generator": "random_deletion_warmup", "m": m, "p": deletion_prob})


def append_uniform_placement_gadget(builder: ScriptBuilder, gadget_size: int):
    """Insert gadget_size balls, delete all but the last: net +1 ball whose
    location is (w.h.p.) uniform when the bins start near-balanced."""
    labels = [builder.insert() for _ in range(gadget_size)]
    for label in labels[:-1]:
        builder.delete(label)
    return labels[-1]


def append_load_reduction_gadget(builder: ScriptBuilder, gadget_size: int) -> None:
    """Two rounds of: insert gadget_size fresh balls, delete every other
    present ball.  Ends with exactly gadget_size balls present, with the
    relative bin loads preserved up to O(log m) noise."""
    for _ in range(2):
        old = builder.present_labels()
        fresh = [builder.insert() for _ in range(gadget_size)]
        fresh_set = set(fresh)
        for label in old:
            if label not in fresh_set:
                builder.delete(label)


def append_gap_to_overload(builder: ScriptBuilder, k: int) -> dict:
    """The 3-step finisher: insert k balls x (drawn toward the deficit
    bins), fill to capacity, delete the x's, insert k replacements z.

    Returns instrumentation marks: the x/y/z label sets and the op index
    after each step boundary (X1 = after the x's, X2 = after the fill,
    X3 = after deleting the x's, end = after the z's).
    """
    m_cap = builder.m_cap
    if builder.present_count + k > m_cap:
        raise ValueError("not enough headroom for the k gap balls")
    xs = [builder.insert() for _ in range(k)]
    x1 = len(builder.ops)
    ys = [builder.insert() for _ in range(m_cap - builder.present_count)]
    x2 = len(builder.ops)
    for label in xs:
        builder.delete(label)
    x3 = len(builder.ops)
    zs = [builder.insert() for _ in range(k)]
    return {
        "x_labels": xs,
        "y_labels": ys,
        "z_labels": zs,
        "after_x": x1,
        "after_fill": x2,
        "after_delete": x3,
        "end": len(builder.ops),
        "k": k,
    }


def gap_to_overload_script(k: int, m_cap: int, current_ball_census: list) -> tuple[Script, dict]:
    """Standalone finisher composed after an arbitrary prefix; the census is
    the list of labels currently present (known from script history)."""
    builder = ScriptBuilder(m_cap, initial_present=current_ball_census)
    marks = append_gap_to_overload(builder, k)
    script = builder.build(meta={"generator": "gap_to_overload", "k": k, "m_cap": m_cap})
    return script, marks


def greedy_attack_full(params: GreedyAttackParams, script_seed: int) -> tuple[Script, dict]:
    """The assembled attack in one of three modes.

    warmup_quarter: random-deletion gap, then the finisher with k = sqrt(m).
    full_half: phased gadget construction (the per-phase gadget count is
        capped so transient peaks respect m), then the finisher with
        k ~ 1.75·sqrt(phases·per_phase) — proportional to the spread the
        placement walk accumulates, which is linear in m at full scale.
        The finisher yields nothing if k far exceeds the realized spread
        (the replacement balls then simply refill the deleted balls'
        deficits bin-for-bin), so k must track the spread, not m alone.
    general_n: the n-bin variant with k·n/100 gap balls.
    """
    params.validate()
    m = params.m
    rng = child_rng(script_seed, "greedy_attack", params.mode)
    builder = ScriptBuilder(m)
    marks: dict = {"mode": params.mode}

    if params.mode in ("warmup_quarter", "general_n"):
        labels = [builder.insert() for _ in range(m)]
        for label in labels:
            if rng.random() < params.deletion_prob:
                builder.delete(label)
        marks["after_warmup"] = len(builder.ops)
        k = params.k if params.k is not None else round(math.sqrt(m))
        gap_balls = k if params.mode == "warmup_quarter" else max(1, round(k * params.n / 100))
        marks.update(append_gap_to_overload(builder, gap_balls))
        marks["gap_target"] = k
    else:  # full_half
        gadget = round(params.eps1 * m)
        phases = max(1, round(params.eps3 * m))
        for _ in range(gadget):
            builder.insert()
        # Cap gadget applications so the transient peak (present + gadget)
        # never exceeds m.
        per_phase = m - 2 * gadget
        for _ in range(phases):
            for _ in range(per_phase):
                append_uniform_placement_gadget(builder, gadget)
            append_load_reduction_gadget(builder, gadget)
        marks["phases"] = phases
        marks["gadgets_per_phase"] = per_phase
        marks["after_phases"] = len(builder.ops)
        # Closed-form op count for the phase section: initial fill, then per
        # phase: per_phase gadgets of 2·gadget−1 ops each, plus a reduction
        # gadget of 2·(gadget + present-before) ops.
        k = params.k if params.k is not None else round(1.75 * math.sqrt(phases * per_phase))
        marks.update(append_gap_to_overload(builder, k))
        marks["gap_target"] = k

    script = builder.build(
        meta={
            "generator": "greedy_attack_full",
            "mode": params.mode,
            "m": m,
            "n": params.n,
            "script_seed": script_seed,
        }
    )
    return script, marks


def full_half_op_count(m: int, eps1: float, eps3: float) -> int:
    """Closed-form operation count of the full_half phase section."""
    gadget = round(eps1 * m)
    phases = max(1, round(eps3 * m))
    per_phase = m - 2 * gadget
    ops = gadget  # initial fill
    present = gadget
    for _ in range(phases):
        ops += per_phase * (2 * gadget - 1)
        present += per_phase
        # reduction gadget, two rounds: insert gadget, delete `present` others
        ops += gadget + present
        ops += gadget + gadget
        present = gadget
    return ops


@dataclass
class EqualizationReport:
    k: int
    c: int
    insertions: int
    start_loads: list[int] = field(default_factory=list)
    final_loads: list[int] = field(default_factory=list)
    final_spread: int = 0
    equal_instant: bool = False
    equal_time: Optional[int] = None


def equalization_probe(k: int, c: int, rng: random.Random, start_loads: Optional[list[int]] = None) -> EqualizationReport:
    """Run c·k Greedy insertions on 4 bins from a spread-k start state and
    report the final spread and whether an all-equal instant occurred.

    Uses a dedicated tight loop (pair draw + argmin + fair-coin tie) so the
    10^3-trial Monte Carlo stays cheap; equality must be checked after every
    single insertion.
    """
    loads = list(start_loads) if start_loads is not None else [k, 0, 0, 0]
    if len(loads) != 4:
        raise ValueError("equalization probe is specific to 4 bins")
    if max(loads) - min(loads) > k:
        raise ValueError("start spread exceeds k")
    report = EqualizationReport(k=k, c=c, insertions=c * k, start_loads=list(loads))
    if len(set(loads)) == 1:
        report.equal_instant = True
        report.equal_time = 0
    randrange = rng.randrange
    random_ = rng.random
    for step in range(c * k):
        i = randrange(4)
        j = randrange(4)
        li = loads[i]
        lj = loads[j]
        if li < lj or (li == lj and random_() < 0.5):
            loads[i] = li + 1
        else:
            loads[j] = lj + 1
        if not report.equal_instant and loads[0] == loads[1] == loads[2] == loads[3]:
            report.equal_instant = True
            report.equal_time = step + 1
    report.final_loads = loads
    report.final_spread = max(loads) - min(loads)
    return report
