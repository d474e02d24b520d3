"""The stone game and its exact coupling to the modulated strategies.

Stones live in two bags.  Activation moves a uniformly random inactive
stone to the active list; deactivation returns the r-th most recently
activated stone.  Run in lockstep with a balls run whose bin/color is set
to the color of the drawn stone, the per-color active counts must equal the
balls game's color loads exactly at every step — that equivalence (and the
matching halt condition) is checked in exact integer arithmetic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from . import engine
from .engine import HashModel, Mode, SystemState

__all__ = [
    "StoneGameError",
    "StoneGameState",
    "fixed_game",
    "generalized_game",
    "activate",
    "deactivate",
    "inactive_color_counts",
    "CoupledTrace",
    "coupled_run",
    "uniform_subset_test",
]


class StoneGameError(Exception):
    pass


class StoneGameState:
    """Stones are (color, batch) pairs; the inactive bag is a flat multiset."""

    __slots__ = ("n", "variant", "Q", "delta", "batch_count", "inactive", "s", "active", "active_counts")

    def __init__(self, n: int, variant: str, batches: int, Q: Optional[int], delta: Optional[int]):
        self.n = n
        self.variant = variant  # "fixed" | "generalized"
        self.Q = Q
        self.delta = delta
        self.batch_count = batches
        self.inactive: list[tuple[int, int]] = [(k, q) for q in range(batches) for k in range(n)]
        self.s = [batches] * n  # per-color inactive counts
        self.active: list[tuple[int, int]] = []
        self.active_counts = [0] * n

    @property
    def total_stones(self) -> int:
        return self.n * self.batch_count

    def check_conservation(self) -> None:
        assert len(self.inactive) + len(self.active) == self.total_stones
        assert sum(self.s) == len(self.inactive)
        assert sum(self.active_counts) == len(self.active)


def fixed_game(n: int, Q: int) -> StoneGameState:
    """The (Q, n)-stone game: Q·n stones forever, Q of each color."""
    if Q < 1:
        raise StoneGameError("Q must be >= 1")
    return StoneGameState(n, "fixed", Q, Q=Q, delta=None)


def generalized_game(n: int, delta: int) -> StoneGameState:
    """The Δ-generalized game; batches are added as the system grows."""
    if delta < 1:
        raise StoneGameError("delta must be >= 1")
    return StoneGameState(n, "generalized", delta, Q=None, delta=delta)


def activate(state: StoneGameState, rng: random.Random) -> tuple[int, int]:
    """Move a uniformly random inactive stone to the active list."""
    inactive = state.inactive
    if not inactive:
        raise StoneGameError("no inactive stones to activate")
    i = rng.randrange(len(inactive))
    stone = inactive[i]
    last = inactive.pop()
    if i < len(inactive):
        inactive[i] = last
    state.s[stone[0]] -= 1
    state.active.append(stone)
    state.active_counts[stone[0]] += 1
    if state.variant == "generalized" and len(inactive) < state.delta * state.n:
        batch = state.batch_count
        state.batch_count = batch + 1
        for k in range(state.n):
            inactive.append((k, batch))
            state.s[k] += 1
    return stone


def deactivate(state: StoneGameState, r: int) -> tuple[int, int]:
    """Return the r-th most recently activated stone to the inactive bag."""
    if not 1 <= r <= len(state.active):
        raise StoneGameError(f"rank {r} out of range (active={len(state.active)})")
    stone = state.active.pop(len(state.active) - r)
    state.active_counts[stone[0]] -= 1
    state.inactive.append(stone)
    state.s[stone[0]] += 1
    return stone


def inactive_color_counts(state: StoneGameState) -> list[int]:
    return list(state.s)


class _CoupledStrategy:
    """Balls-game strategy whose category draw IS the stone activation.

    The offered pair is still consulted for the halt test (fixed variant)
    and for the corrupted ball's physical bin (generalized variant), but
    the color — and, for clean balls, the bin — comes from the uniform
    inactive-stone draw.
    """

    def __init__(self, game: StoneGameState, epsilon: float = 0.25):
        self.game = game
        self.epsilon = epsilon
        self.corrupted_count = 0
        self.halts = 0
        self._state: Optional[SystemState] = None

    def begin_run(self, state: SystemState) -> None:
        self._state = state

    def place(self, first: int, second: int, rng: random.Random):
        state = self._state
        game = self.game
        cl = state.color_loads
        n = state.n
        gap = max(cl) - min(cl)
        if game.variant == "fixed":
            # T = Q - l̄, so gap > T  <=>  n·gap > n·Q - present.
            halt_balls = n * gap > n * game.Q - len(state.present)
            s = game.s
            halt_stones = state.n * (max(s) - min(s)) > len(game.inactive)
            assert halt_balls == halt_stones, "halting correspondence violated"
            if halt_balls:
                self.halts += 1
                return None
            stone = activate(game, rng)
            return (stone[0], stone[0], False)
        # Generalized: never halts; corruption replaces halting.
        base = -(-state.m_seen // n) + game.delta
        T = base - len(state.present) / n
        stone = activate(game, rng)
        if gap <= self.epsilon * T:
            return (stone[0], stone[0], False)
        self.corrupted_count += 1
        b = first if rng.random() < 0.5 else second
        return (b, stone[0], True)


@dataclass
class CoupledTrace:
    steps: int = 0
    halted: bool = False
    halt_index: Optional[int] = None
    violations: list[tuple[int, str]] = field(default_factory=list)
    corrupted_count: int = 0
    final_color_loads: list[int] = field(default_factory=list)
    final_stone_counts: list[int] = field(default_factory=list)
    csv_rows: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        header = "step,op,color,balls_per_color,stones_per_color,violation"
        return "\n".join([header] + self.csv_rows)


def coupled_run(
    script,
    n: int,
    m_cap: int,
    variant: str,
    rng: random.Random,
    Q: Optional[int] = None,
    delta: Optional[int] = None,
    epsilon: float = 0.25,
    hash_model: HashModel = HashModel.INDEPENDENT_PAIR,
    collect_csv: bool = False,
) -> CoupledTrace:
    """Drive the balls game and the stone game from one random source.

    After every operation, asserts exact per-color equality between active
    stones and ball colors; the generalized variant additionally checks
    total stones = n·(⌈m_seen/n⌉ + Δ).  Stops at the first violation.
    """
    if variant == "fixed":
        if Q is None:
            raise StoneGameError("fixed variant needs Q")
        game = fixed_game(n, Q)
    elif variant == "generalized":
        if delta is None:
            raise StoneGameError("generalized variant needs delta")
        game = generalized_game(n, delta)
    else:
        raise StoneGameError(f"unknown variant {variant!r}")

    state = engine.new_system(n, m_cap, hash_model=hash_model)
    strat = _CoupledStrategy(game, epsilon=epsilon)
    strat.begin_run(state)
    trace = CoupledTrace()

    for op in script.ops() if hasattr(script, "ops") else script:
        kind = op[0]
        if kind == "i":
            rec = engine.apply(state, op, strat, rng)
            if rec is None:
                trace.halted = True
                trace.halt_index = trace.steps
                break
            color = rec.color
        else:
            if kind == "r":
                r = op[1]
            else:
                r = engine.rank_of(state, op[1])
            rec = engine.apply(state, op, strat, rng)
            deactivate(game, r)
            color = rec.color
        trace.steps += 1

        problem = None
        if game.active_counts != state.color_loads:
            problem = f"active stones {game.active_counts} != color loads {state.color_loads}"
        elif game.variant == "fixed":
            cl = state.color_loads
            if any(game.s[k] != game.Q - cl[k] for k in range(n)):
                problem = f"inactive counts {game.s} != Q - loads"
        else:
            expected = n * (-(-state.m_seen // n) + game.delta)
            if game.total_stones != expected:
                problem = f"total stones {game.total_stones} != {expected}"
        if collect_csv:
            trace.csv_rows.append(
                f"{trace.steps - 1},{kind},{color},"
                f"{' '.join(map(str, state.color_loads))},"
                f"{' '.join(map(str, game.active_counts))},{int(problem is not None)}"
            )
        if problem is not None:
            trace.violations.append((trace.steps - 1, problem))
            break

    trace.corrupted_count = strat.corrupted_count
    trace.final_color_loads = list(state.color_loads)
    trace.final_stone_counts = list(game.s)
    return trace


def uniform_subset_test(n: int, Q: int, script: list, trials: int, rng: random.Random) -> dict:
    """Empirical check that the inactive bag is a uniform random subset.

    `script` is a list of "a" (activate) / ("d", r) (deactivate rank r)
    moves.  Only small instances (nQ <= 12, script length <= 10) are
    accepted so the uniform target over equal-size subsets is enumerable.
    """
    import itertools

    from scipy.stats import chi2

    if n * Q > 12 or len(script) > 10:
        raise StoneGameError("instance too large for exact enumeration")
    counts: dict[frozenset, int] = {}
    final_size = None
    for _ in range(trials):
        game = fixed_game(n, Q)
        for mv in script:
            if mv == "a":
                activate(game, rng)
            else:
                deactivate(game, mv[1])
        key = frozenset(game.inactive)
        counts[key] = counts.get(key, 0) + 1
        final_size = len(game.inactive)

    stones = [(k, q) for q in range(Q) for k in range(n)]
    support = [frozenset(c) for c in itertools.combinations(stones, final_size)]
    expected = trials / len(support)
    stat = sum((counts.get(sub, 0) - expected) ** 2 / expected for sub in support)
    dof = len(support) - 1
    p_value = float(chi2.sf(stat, dof)) if dof > 0 else 1.0
    return {
        "trials": trials,
        "subset_size": final_size,
        "support": len(support),
        "statistic": stat,
        "dof": dof,
        "p_value": p_value,
        "counts": {tuple(sorted(k)): v for k, v in counts.items()},
    }
