"""The marble-splitting game.

Alice inserts marbles (into bag 1) and splits pairs of same-bag marbles,
sending one output up a bag and one down; Bob controls the hidden values,
subject to the split rule v_x' − v_y' >= 2/R with sum error at most eta.
Alice's deterministic schedule forces some value above 1 within O(R^3)
steps; the potential phi = sum_i i·(sum of values in bag i) certifies it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

__all__ = [
    "Marble",
    "MarbleState",
    "BobPolicy",
    "minimal_slack_bob",
    "marble_insert",
    "marble_split",
    "potential",
    "alice_strategy",
    "alice_op_counts",
    "replay_alice",
    "MarbleReplayReport",
]

_SPLIT_TOL = 1e-12


@dataclass
class Marble:
    id: int
    value: float
    bag: int


class MarbleState:
    def __init__(self, R: int):
        if R < 2:
            raise ValueError("R must be >= 2")
        self.R = R
        self.marbles: dict[int, Marble] = {}
        self.bags: dict[int, list[int]] = {}
        self.inserts = 0
        self.splits = 0
        self._next_id = 0

    def bag_of(self, marble_id: int) -> int:
        return self.marbles[marble_id].bag

    def bag_members(self, i: int) -> list[int]:
        return list(self.bags.get(i, []))

    def bag_census(self) -> dict[int, int]:
        return {i: len(ids) for i, ids in self.bags.items() if ids}

    def max_value(self) -> float:
        return max((m.value for m in self.marbles.values()), default=0.0)

    def _add(self, value: float, bag: int) -> int:
        mid = self._next_id
        self._next_id = mid + 1
        self.marbles[mid] = Marble(mid, value, bag)
        self.bags.setdefault(bag, []).append(mid)
        return mid

    def _remove(self, mid: int) -> Marble:
        marble = self.marbles.pop(mid)
        self.bags[marble.bag].remove(mid)
        return marble


@dataclass
class BobPolicy:
    """Value assignment rules.

    insert_value returns the value for a fresh marble; split_values maps
    (v_x, v_y, R) to (v_x', v_y').  eta bounds |(v_x'+v_y') − (v_x+v_y)|.
    """

    insert_value: Callable[[MarbleState], float]
    split_values: Callable[[float, float, int], tuple[float, float]]
    eta: float
    name: str = "custom"


def minimal_slack_bob(insert_value: float = 0.0) -> BobPolicy:
    """The tightest consistent Bob: splits move values to mean ± 1/R with
    zero sum error, and inserts get a fixed value."""

    def split(vx: float, vy: float, R: int) -> tuple[float, float]:
        mean = (vx + vy) / 2
        return (mean + 1 / R, mean - 1 / R)

    return BobPolicy(
        insert_value=lambda state: insert_value,
        split_values=split,
        eta=0.0,
        name="minimal_slack",
    )


def marble_insert(state: MarbleState, bob: BobPolicy) -> int:
    value = bob.insert_value(state)
    if not -1.0 <= value <= 1.0:
        raise ValueError(f"Bob's insert value {value} outside [-1, 1]")
    state.inserts += 1
    return state._add(value, 1)


def marble_split(state: MarbleState, x: int, y: int, bob: BobPolicy) -> tuple[int, int]:
    """Split marbles x and y (same bag i >= 1) into bags i+1 and i−1."""
    if x == y:
        raise ValueError("split needs two distinct marbles")
    mx = state.marbles[x]
    my = state.marbles[y]
    if mx.bag != my.bag:
        raise ValueError(f"marbles in different bags ({mx.bag} vs {my.bag})")
    i = mx.bag
    if i < 1:
        raise ValueError("cannot split in bag 0")
    vxp, vyp = bob.split_values(mx.value, my.value, state.R)
    if vxp - vyp < 2 / state.R - _SPLIT_TOL:
        raise ValueError(f"split violates v_x' - v_y' >= 2/R: {vxp} - {vyp}")
    if abs((vxp + vyp) - (mx.value + my.value)) > bob.eta + _SPLIT_TOL:
        raise ValueError("split sum error exceeds eta")
    state._remove(x)
    state._remove(y)
    xp = state._add(vxp, i + 1)
    yp = state._add(vyp, i - 1)
    state.splits += 1
    return xp, yp


def potential(state: MarbleState) -> float:
    return sum(i * sum(state.marbles[mid].value for mid in ids) for i, ids in state.bags.items())


def alice_strategy(R: int, c: int) -> list:
    """Alice's deterministic schedule as a list of ops.

    Ops are ("insert",) or ("split", bag).  One initial insert, then cR
    phases; phase i has i+1 sub-phases.  Sub-phase j < i+1: one insert, then
    splits on bags 1, 2, …, i−j+1.  Sub-phase i+1: one insert.
    """
    if R < 2 or c < 1:
        raise ValueError("need R >= 2 and integer c >= 1")
    schedule: list = [("insert",)]
    for i in range(1, c * R + 1):
        for j in range(1, i + 1):
            schedule.append(("insert",))
            for t in range(1, i - j + 2):
                schedule.append(("split", t))
        schedule.append(("insert",))
    return schedule


def alice_op_counts(R: int, c: int) -> tuple[int, int]:
    """(inserts, splits) closed forms for the schedule."""
    cr = c * R
    inserts = 1 + cr + cr * (cr + 1) // 2
    splits = cr * (cr + 1) * (cr + 2) // 6
    return inserts, splits


@dataclass
class MarbleReplayReport:
    R: int
    c: int
    inserts: int = 0
    splits: int = 0
    max_value: float = 0.0
    max_value_step: Optional[int] = None
    exceeded_one: bool = False
    final_potential: float = 0.0
    ledger_potential: float = 0.0
    min_split_delta: float = math.inf
    max_bag_used: int = 0
    csv_rows: list[str] = field(default_factory=list)


def replay_alice(
    R: int,
    c: int,
    bob: BobPolicy,
    check_structure: bool = True,
    collect_csv: bool = False,
) -> MarbleReplayReport:
    """Replay Alice's schedule against a Bob policy.

    Asserts the structural postconditions (phase/sub-phase start states,
    bag-index bound cR+1) while replaying, and cross-checks the potential
    ledger against a direct evaluation at the end.
    """
    state = MarbleState(R)
    report = MarbleReplayReport(R=R, c=c)
    ledger = 0.0
    step = 0

    def census_ok(expect: dict[int, int]) -> bool:
        actual = state.bag_census()
        actual.pop(0, None)
        return actual == {k: v for k, v in expect.items() if v}

    def do_insert():
        nonlocal ledger, step
        phi0 = potential(state) if check_structure else None
        mid = marble_insert(state, bob)
        ledger += state.marbles[mid].value  # insert lands in bag 1
        step += 1
        _note(mid)
        if check_structure:
            assert abs(potential(state) - phi0 - state.marbles[mid].value) < 1e-9

    def do_split(t: int):
        nonlocal ledger, step
        members = state.bags.get(t, [])
        assert len(members) == 2, f"split on bag {t} with {len(members)} marbles"
        x, y = members
        phi0 = potential(state)
        xp, yp = marble_split(state, x, y, bob)
        delta = potential(state) - phi0
        if delta < report.min_split_delta:
            report.min_split_delta = delta
        ledger += delta
        step += 1
        _note(xp)
        _note(yp)

    def _note(mid: int):
        m = state.marbles[mid]
        if m.value > report.max_value:
            report.max_value = m.value
            report.max_value_step = step
        if m.value > 1.0:
            report.exceeded_one = True
        if m.bag > report.max_bag_used:
            report.max_bag_used = m.bag
        if collect_csv:
            report.csv_rows.append(f"{step},{state.inserts},{state.splits},{potential(state):.9f},{report.max_value:.9f}")

    do_insert()
    for i in range(1, c * R + 1):
        if check_structure:
            assert census_ok({b: 1 for b in range(1, i + 1)}), f"phase {i} start state wrong"
        for j in range(1, i + 1):
            do_insert()
            for t in range(1, i - j + 2):
                do_split(t)
            if check_structure and i - j + 1 >= 1:
                # After the sub-phase, bag i−j+1 is the solitary empty bag
                # among 1..i+1.
                expect = {b: 1 for b in range(1, i + 2) if b != i - j + 1}
                assert census_ok(expect), f"sub-phase ({i},{j}) end state wrong"
        do_insert()
        assert report.max_bag_used <= c * R + 1, "Alice placed a marble beyond bag cR+1"

    if check_structure:
        for bag, count in state.bag_census().items():
            if bag > 0:
                assert count <= 1, f"bag {bag} holds {count} marbles at end"
    report.inserts = state.inserts
    report.splits = state.splits
    report.final_potential = potential(state)
    report.ledger_potential = ledger
    assert abs(report.final_potential - ledger) < 1e-9, "potential ledger mismatch"
    return report
