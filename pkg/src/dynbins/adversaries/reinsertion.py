"""The reinsertion-model attack.

A conditioned set A (its hash pairs biased toward (0,1) and away from (2,3)
by t) and an unconditioned set B are repeatedly deleted and reinserted.
Each reinsertion round transfers part of A's bias onto fresh ball sets,
realizing the marble-splitting game with R = sqrt(k): the splitting gadget
plays Split, and v(S) — the number of balls of S in bins {0,1} — plays the
marble value.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from scipy.stats import binom

from .. import engine
from ..engine import HashModel, Mode, SystemState
from ..rng import child_rng
from ..scripts import Script, ScriptBuilder
from ..strategies import GeneralizedModulatedGreedy
from .marbles import alice_strategy

__all__ = [
    "PAIRS",
    "ReinsertionAttackParams",
    "sample_ab_conditioned",
    "value_of",
    "append_splitting_gadget",
    "single_block_trial",
    "reinsertion_attack_full",
    "ReinsertionReport",
]

# The 12 ordered distinct pairs over 4 bins, in a fixed order.
PAIRS = [(i, j) for i in range(4) for j in range(4) if i != j]
_UP_PAIR = (0, 1)  # the over-represented hash among A
_DOWN_PAIR = (2, 3)  # the under-represented hash among A


@dataclass
class ReinsertionAttackParams:
    k: int
    m: int
    c_t: float = 3.0
    q: Optional[int] = None  # marble block size; default k^1.5·log k (even)
    E_tolerance: float = 2.0
    max_rejection_tries: int = 10**6
    epsilon: float = 1 / 4
    alice_c: int = 1

    @property
    def t(self) -> int:
        return round(self.c_t * math.sqrt(self.k))

    @property
    def R(self) -> int:
        r = math.isqrt(self.k)
        if r * r != self.k:
            raise ValueError("k must be a perfect square (R = sqrt(k))")
        return r

    def block_size(self) -> int:
        if self.q is not None:
            q = self.q
        else:
            q = math.ceil(self.k**1.5 * math.log(self.k))
        if q % 2:
            q += 1
        if q < 2 * self.k:
            raise ValueError("block size q must be at least 2k")
        return q


def _window(center: float, tol_sqrt_k: float, k: int) -> tuple[int, int]:
    lo = math.ceil(center - tol_sqrt_k)
    hi = math.floor(center + tol_sqrt_k)
    return max(lo, 0), min(hi, k)


def _sample_conditioned_binom(k: int, p: float, lo: int, hi: int, rng: random.Random) -> int:
    """Draw Bin(k, p) conditioned on [lo, hi] by inverse CDF over the window."""
    values = list(range(lo, hi + 1))
    weights = binom.pmf(values, k, p)
    total = float(weights.sum())
    if total <= 0:
        raise ValueError("conditioning window has zero mass")
    r = rng.random() * total
    acc = 0.0
    for v, w in zip(values, weights):
        acc += float(w)
        if r <= acc:
            return v
    return values[-1]


def sample_ab_conditioned(
    k: int,
    t: int,
    tolerance: float,
    rng: random.Random,
    max_tries: int = 10**6,
    method: str = "auto",
) -> tuple[list, list, dict]:
    """Hash pairs for A conditioned on event E, and unconditioned pairs for B.

    E requires |{x in A : h(x) = (0,1)}| = k/12 + t ± tolerance·sqrt(k) and
    |{x in A : h(x) = (2,3)}| = k/12 − t ± tolerance·sqrt(k).

    method="rejection" redraws A until E holds; "direct" samples the two
    window counts from their exact conditional laws and assigns pairs, which
    is the same conditional distribution but works at t values where the
    rejection acceptance rate is astronomically small; "auto" picks.
    """
    tol = tolerance * math.sqrt(k)
    lo1, hi1 = _window(k / 12 + t, tol, k)
    lo2, hi2 = _window(k / 12 - t, tol, k)
    if lo1 > hi1 or lo2 > hi2:
        raise ValueError("empty conditioning window")

    if method == "auto":
        # Both windows gate acceptance; estimate them as independent
        # binomial tails (a slight over-estimate, fine for a heuristic).
        accept_est = float(binom.cdf(hi1, k, 1 / 12) - binom.cdf(lo1 - 1, k, 1 / 12)) * float(
            binom.cdf(hi2, k, 1 / 12) - binom.cdf(lo2 - 1, k, 1 / 12)
        )
        method = "rejection" if accept_est >= 1e-4 else "direct"

    info = {"method": method, "window_01": (lo1, hi1), "window_23": (lo2, hi2)}
    if method == "rejection":
        for tries in range(1, max_tries + 1):
            a_hashes = [PAIRS[rng.randrange(12)] for _ in range(k)]
            c01 = a_hashes.count(_UP_PAIR)
            c23 = a_hashes.count(_DOWN_PAIR)
            if lo1 <= c01 <= hi1 and lo2 <= c23 <= hi2:
                info["tries"] = tries
                break
        else:
            raise RuntimeError(f"event E not hit in {max_tries} rejection tries")
    elif method == "direct":
        c01 = _sample_conditioned_binom(k, 1 / 12, lo1, hi1, rng)
        c23 = _sample_conditioned_binom(k - c01, 1 / 11, lo2, min(hi2, k - c01), rng)
        others = [p for p in PAIRS if p not in (_UP_PAIR, _DOWN_PAIR)]
        a_hashes = [_UP_PAIR] * c01 + [_DOWN_PAIR] * c23
        a_hashes += [others[rng.randrange(10)] for _ in range(k - c01 - c23)]
        rng.shuffle(a_hashes)
        info["tries"] = 1
    else:
        raise ValueError(f"unknown method {method!r}")

    c01 = a_hashes.count(_UP_PAIR)
    c23 = a_hashes.count(_DOWN_PAIR)
    assert lo1 <= c01 <= hi1 and lo2 <= c23 <= hi2
    info["count_01"] = c01
    info["count_23"] = c23
    b_hashes = [PAIRS[rng.randrange(12)] for _ in range(k)]
    return a_hashes, b_hashes, info


def value_of(state: SystemState, labels) -> int:
    """v(S): number of balls of S currently residing in bins 0 or 1."""
    present = state.present
    v = 0
    for label in labels:
        entry = present.get(label)
        if entry is not None and entry[1] <= 1:
            v += 1
    return v


def append_splitting_gadget(
    builder: ScriptBuilder,
    a_labels: list,
    b_labels: list,
    x_labels: list,
    y_labels: list,
    z_labels: list,
    rng: random.Random,
) -> dict:
    """One Split block: delete the two marbles X (= x_labels), insert A ∪ B
    in a pre-drawn random order, replace A with Y, replace B with Z."""
    for label in x_labels:
        builder.delete(label)
    marks = {"after_delete_x": len(builder.ops)}
    ab = list(a_labels) + list(b_labels)
    rng.shuffle(ab)
    for label in ab:
        builder.insert(label)
    marks["after_insert_ab"] = len(builder.ops)
    for label in a_labels:
        builder.delete(label)
    for label in y_labels:
        builder.insert(label)
    marks["after_y"] = len(builder.ops)
    for label in b_labels:
        builder.delete(label)
    for label in z_labels:
        builder.insert(label)
    marks["end"] = len(builder.ops)
    return marks


def _install_hashes(state: SystemState, labels: list, hashes: list) -> None:
    for label, pair in zip(labels, hashes):
        state.hash_memo[label] = pair


def single_block_trial(
    k: int,
    m: int,
    q: int,
    seed: int,
    c_t: float = 3.0,
    tolerance: float = 2.0,
    epsilon: float = 1 / 4,
) -> dict:
    """Fill to capacity with GeneralizedModulatedGreedy, run one splitting
    gadget up to the A ∪ B insertion, and measure v(A) − v(B).

    The X role is played by q filler balls; the gadget stops after step 2
    because only the post-insertion v values are measured.
    """
    script_rng = child_rng(seed, "script")
    hash_rng = child_rng(seed, "hash")
    coin_rng = child_rng(seed, "coin")
    t = round(c_t * math.sqrt(k))
    a_hashes, b_hashes, info = sample_ab_conditioned(k, t, tolerance, script_rng)
    a_labels = [f"A{i}" for i in range(k)]
    b_labels = [f"B{i}" for i in range(k)]

    state = engine.new_system(4, m, hash_model=HashModel.DISTINCT_ORDERED, mode=Mode.REINSERTION_DELETION)
    _install_hashes(state, a_labels, a_hashes)
    _install_hashes(state, b_labels, b_hashes)
    strategy = GeneralizedModulatedGreedy(epsilon=epsilon, M=m)

    builder = ScriptBuilder(m, reinsertion=True)
    fillers = [builder.insert(f"F{i}") for i in range(m)]
    for label in fillers[:q]:
        builder.delete(label)
    ab = a_labels + b_labels
    script_rng.shuffle(ab)
    for label in ab:
        builder.insert(label)
    trace = engine.run(state, builder.build(), strategy, hash_rng, coin_rng)
    assert not trace.halted
    va = value_of(state, a_labels)
    vb = value_of(state, b_labels)
    return {"v_a": va, "v_b": vb, "t": t, "info": info, "corrupted": strategy.corrupted_count}


@dataclass
class ReinsertionReport:
    params: ReinsertionAttackParams
    steps: int = 0
    schedule_ops: int = 0
    blocks: int = 0
    vab_after_insert: list[int] = field(default_factory=list)  # v(A)−v(B) per block
    marble_values: dict = field(default_factory=dict)  # marble id -> (bag, v/|S|) at creation
    max_overload_cap_xn: int = 0
    corrupted: int = 0
    hash_stable: bool = True
    capacity_ok: bool = True
    bag_invariants_ok: bool = True

    @property
    def max_overload_cap(self) -> float:
        return self.max_overload_cap_xn / 4


def reinsertion_attack_full(params: ReinsertionAttackParams, seed: int) -> ReinsertionReport:
    """Compile Alice's schedule into splitting-gadget blocks and replay it
    end to end against GeneralizedModulatedGreedy.

    Marbles are fresh ball sets of q/2 labels; marble inserts recycle
    capacity by deleting retired balls (fillers, then bag-0 marbles).  The
    report carries the per-block v(A)−v(B) drift, per-marble normalized
    values at creation, and the legality flags the acceptance test checks.
    """
    k = params.k
    m = params.m
    q = params.block_size()
    half = q // 2
    R = params.R
    script_rng = child_rng(seed, "script")
    hash_rng = child_rng(seed, "hash")
    coin_rng = child_rng(seed, "coin")

    a_hashes, b_hashes, _ = sample_ab_conditioned(
        k, params.t, params.E_tolerance, script_rng, params.max_rejection_tries
    )
    a_labels = [f"A{i}" for i in range(k)]
    b_labels = [f"B{i}" for i in range(k)]

    state = engine.new_system(4, m, hash_model=HashModel.DISTINCT_ORDERED, mode=Mode.REINSERTION_DELETION)
    _install_hashes(state, a_labels, a_hashes)
    _install_hashes(state, b_labels, b_hashes)
    strategy = GeneralizedModulatedGreedy(epsilon=params.epsilon, M=m)
    report = ReinsertionReport(params=params)

    schedule = alice_strategy(R, params.alice_c)
    report.schedule_ops = len(schedule)

    # Driver-side board: bag index -> list of marble ids; marble id -> labels.
    bags: dict[int, list[int]] = {}
    marble_labels: dict[int, list] = {}
    next_marble = 0
    next_fresh = 0
    retire_pool: list = []  # labels we may delete to make room

    builder = ScriptBuilder(m, reinsertion=True)
    max_ov = -m

    def run_segment() -> None:
        nonlocal max_ov
        segment = Script(ops=builder.ops)
        trace = engine.run(state, segment, strategy, hash_rng, coin_rng)
        assert not trace.halted
        report.steps += trace.steps_applied
        if trace.max_overload_cap_xn is not None and trace.max_overload_cap_xn > max_ov:
            max_ov = trace.max_overload_cap_xn
        builder.ops = []

    def fresh_set(prefix: str) -> tuple[int, list]:
        nonlocal next_marble, next_fresh
        labels = [f"{prefix}{next_fresh + i}" for i in range(half)]
        next_fresh += half
        mid = next_marble
        next_marble += 1
        marble_labels[mid] = labels
        return mid, labels

    def make_room(count: int) -> None:
        if len(retire_pool) < count:
            raise RuntimeError("capacity exhausted: not enough retired balls to recycle")
        for _ in range(count):
            builder.delete(retire_pool.pop())

    def note_marble(mid: int, bag: int) -> None:
        labels = marble_labels[mid]
        report.marble_values[mid] = (bag, value_of(state, labels) / len(labels))
        if bag == 0:
            retire_pool.extend(labels)

    # Initial marble plus fill to capacity.
    mid, labels = fresh_set("M")
    for label in labels:
        builder.insert(label)
    bags[1] = [mid]
    fillers = [builder.insert(f"F{i}") for i in range(m - half)]
    retire_pool.extend(fillers)
    run_segment()
    note_marble(mid, 1)

    for op in schedule[1:]:
        if op[0] == "insert":
            make_room(half)
            mid, labels = fresh_set("M")
            for label in labels:
                builder.insert(label)
            run_segment()
            bags.setdefault(1, []).append(mid)
            note_marble(mid, 1)
        else:
            t_bag = op[1]
            members = bags.get(t_bag, [])
            if len(members) != 2:
                report.bag_invariants_ok = False
                raise RuntimeError(f"split on bag {t_bag} with {len(members)} marbles")
            x1, x2 = members
            y_mid, y_labels = fresh_set("Y")
            z_mid, z_labels = fresh_set("Z")
            append_splitting_gadget(
                builder,
                a_labels,
                b_labels,
                marble_labels[x1] + marble_labels[x2],
                y_labels,
                z_labels,
                script_rng,
            )
            # Run up to the A ∪ B insertion, measure the drift, then finish.
            mid_ops = builder.ops
            cut = q + 2 * k  # deletes of X plus inserts of A ∪ B
            builder.ops = mid_ops[:cut]
            run_segment()
            report.vab_after_insert.append(value_of(state, a_labels) - value_of(state, b_labels))
            builder.ops = mid_ops[cut:]
            run_segment()
            report.blocks += 1
            bags[t_bag] = []
            bags.setdefault(t_bag + 1, []).append(y_mid)
            bags.setdefault(t_bag - 1, []).append(z_mid)
            del marble_labels[x1], marble_labels[x2]
            note_marble(y_mid, t_bag + 1)
            note_marble(z_mid, t_bag - 1)
        if any(bag > 0 and len(ids) > 2 for bag, ids in bags.items()):
            report.bag_invariants_ok = False

    report.max_overload_cap_xn = max_ov
    report.corrupted = strategy.corrupted_count
    report.hash_stable = all(state.hash_memo[lbl] == pair for lbl, pair in zip(a_labels, a_hashes))
    report.capacity_ok = state.present_count <= m
    return report
