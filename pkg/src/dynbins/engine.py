"""Core balls-and-bins state machine.

Applies oblivious insert/delete sequences to a pluggable placement strategy,
tracks bin loads and color loads, and records traces.  Supports two input
conventions for deletions: by ball label, or by rank (r-th most recently
inserted ball currently present), which is what an ID-oblivious interface
exposes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional

__all__ = [
    "HashModel",
    "Mode",
    "TraceMode",
    "EngineError",
    "ConfigError",
    "CapacityError",
    "LabelError",
    "RankError",
    "insert",
    "delete",
    "delete_rank",
    "SystemState",
    "new_system",
    "seeded_state",
    "draw_hash",
    "rank_of",
    "apply",
    "StepRecord",
    "Trace",
    "run",
]


class HashModel(enum.Enum):
    """How the two bin choices for a ball are drawn."""

    INDEPENDENT_PAIR = "independent_pair"  # both coordinates uniform in [n]
    DISTINCT_ORDERED = "distinct_ordered"  # uniform over the n(n-1) ordered distinct pairs


class Mode(enum.Enum):
    INSERTION_DELETION = "insertion_deletion"
    REINSERTION_DELETION = "reinsertion_deletion"


class TraceMode(enum.Enum):
    FULL = "full"  # per-step records
    OVERLOAD = "overload"  # running aggregates only
    FINAL = "final"  # final snapshot only


class EngineError(Exception):
    pass


class ConfigError(EngineError):
    pass


class CapacityError(EngineError):
    pass


class LabelError(EngineError):
    pass


class RankError(EngineError):
    pass


# Operations are plain tuples so that multi-million-op scripts stay cheap:
#   ("i", label)  insert
#   ("d", label)  delete by label
#   ("r", rank)   delete by rank (1 = most recently inserted present ball)
Op = tuple


def insert(label) -> Op:
    return ("i", label)


def delete(label) -> Op:
    return ("d", label)


def delete_rank(r: int) -> Op:
    return ("r", r)


class _Fenwick:
    """Binary indexed tree over insertion sequence numbers.

    Supports O(log n) rank queries and k-th present-element selection over
    the set of sequence numbers currently present.
    """

    def __init__(self, size: int):
        self.size = max(size, 16)
        self.tree = [0] * (self.size + 1)
        self.total = 0

    def grow(self, size: int, present_seqs: Iterable[int]) -> None:
        self.size = max(size, 2 * self.size)
        self.tree = [0] * (self.size + 1)
        self.total = 0
        for s in present_seqs:
            self.add(s, 1)

    def add(self, i: int, delta: int) -> None:
        self.total += delta
        i += 1
        tree = self.tree
        size = self.size
        while i <= size:
            tree[i] += delta
            i += i & (-i)

    def prefix(self, i: int) -> int:
        """Number of present sequence numbers <= i."""
        i += 1
        s = 0
        tree = self.tree
        while i > 0:
            s += tree[i]
            i -= i & (-i)
        return s

    def select(self, k: int) -> int:
        """The k-th smallest present sequence number (1-indexed)."""
        pos = 0
        bit = 1 << (self.size.bit_length() - 1)
        tree = self.tree
        size = self.size
        while bit:
            nxt = pos + bit
            if nxt <= size and tree[nxt] < k:
                pos = nxt
                k -= tree[nxt]
            bit >>= 1
        return pos  # 0-indexed sequence number


class SystemState:
    """Single source of truth for one balls-and-bins run."""

    __slots__ = (
        "n",
        "m_cap",
        "hash_model",
        "mode",
        "loads",
        "color_loads",
        "present",
        "hash_memo",
        "m_seen",
        "op_count",
        "seq",
        "max_load",
        "_fenwick",
        "_seq_to_label",
        "_label_watermark",
        "_used_labels",
    )

    def __init__(self, n: int, m_cap: int, hash_model: HashModel, mode: Mode):
        self.n = n
        self.m_cap = m_cap
        self.hash_model = hash_model
        self.mode = mode
        self.loads = [0] * n
        self.color_loads = [0] * n
        # label -> (seq, bin, color, corrupted)
        self.present: dict = {}
        self.hash_memo: dict = {}
        self.m_seen = 0
        self.op_count = 0
        self.seq = 0
        self.max_load = 0
        self._fenwick: Optional[_Fenwick] = None
        self._seq_to_label: dict = {}
        # Fast freshness check for monotone integer labels; anything else
        # falls back to the explicit set.
        self._label_watermark = -1
        self._used_labels: set = set()

    @property
    def present_count(self) -> int:
        return len(self.present)

    def overload_seen(self) -> Fraction:
        """max load minus m_seen/n, exact."""
        return Fraction(self.max_load * self.n - self.m_seen, self.n)

    def overload_cap(self) -> Fraction:
        """max load minus m_cap/n, exact."""
        return Fraction(self.max_load * self.n - self.m_cap, self.n)

    def check_conservation(self) -> None:
        assert sum(self.loads) == len(self.present) <= self.m_cap
        assert sum(self.color_loads) == len(self.present)

    def _mark_used(self, label) -> bool:
        """Record the label as used; True if it was fresh.

        Integer labels are tracked with a watermark and must arrive in
        increasing order: any int <= the largest seen so far counts as
        used.  (All script generators emit monotone integer labels.)
        Other label types use an explicit set.
        """
        if isinstance(label, int) and not isinstance(label, bool):
            if label > self._label_watermark:
                self._label_watermark = label
                return True
            return False
        if label in self._used_labels:
            return False
        self._used_labels.add(label)
        return True

    def _was_used(self, label) -> bool:
        if isinstance(label, int) and not isinstance(label, bool):
            return label <= self._label_watermark
        return label in self._used_labels

    def _ensure_ranks(self) -> _Fenwick:
        fw = self._fenwick
        if fw is None:
            fw = _Fenwick(self.seq + 16)
            self._seq_to_label = {}
            for label, (s, _, _, _) in self.present.items():
                fw.add(s, 1)
                self._seq_to_label[s] = label
            self._fenwick = fw
        return fw


def new_system(
    n: int,
    m_cap: int,
    hash_model: HashModel = HashModel.INDEPENDENT_PAIR,
    mode: Mode = Mode.INSERTION_DELETION,
) -> SystemState:
    if n < 2:
        raise ConfigError(f"need at least 2 bins, got n={n}")
    if m_cap < n:
        raise ConfigError(f"need m_cap >= n, got m_cap={m_cap} n={n}")
    return SystemState(n, m_cap, hash_model, mode)


def seeded_state(
    n: int,
    m_cap: int,
    loads: list[int],
    hash_model: HashModel = HashModel.INDEPENDENT_PAIR,
    mode: Mode = Mode.INSERTION_DELETION,
    label_prefix: str = "seed",
) -> SystemState:
    """A state constructed directly with the given bin loads.

    The pre-placed balls get synthetic labels and colors equal to their bins.
    Used to engineer start states (e.g. a prescribed load gap) for adversary
    experiments.
    """
    if len(loads) != n:
        raise ConfigError("loads length must equal n")
    if sum(loads) > m_cap:
        raise ConfigError("seeded loads exceed m_cap")
    state = new_system(n, m_cap, hash_model, mode)
    for b, load in enumerate(loads):
        for i in range(load):
            label = f"{label_prefix}:{b}:{i}"
            state.present[label] = (state.seq, b, b, False)
            state._mark_used(label)
            state.seq += 1
            state.loads[b] += 1
            state.color_loads[b] += 1
    state.m_seen = len(state.present)
    state.max_load = max(loads) if loads else 0
    return state


def draw_hash(state: SystemState, label, rng) -> tuple[int, int]:
    """Draw (or recall) the bin pair for a ball.

    In reinsertion mode the pair is memoized per label, so a reinserted ball
    observes the same pair each time.
    """
    if state.mode is Mode.REINSERTION_DELETION:
        pair = state.hash_memo.get(label)
        if pair is not None:
            return pair
    n = state.n
    if state.hash_model is HashModel.INDEPENDENT_PAIR:
        pair = (rng.randrange(n), rng.randrange(n))
    else:
        first = rng.randrange(n)
        second = rng.randrange(n - 1)
        if second >= first:
            second += 1
        pair = (first, second)
    if state.mode is Mode.REINSERTION_DELETION:
        state.hash_memo[label] = pair
    return pair


def rank_of(state: SystemState, label) -> int:
    """1 + number of present balls inserted after the given ball."""
    entry = state.present.get(label)
    if entry is None:
        raise LabelError(f"ball {label!r} not present")
    fw = state._ensure_ranks()
    return fw.total - fw.prefix(entry[0]) + 1


def _label_for_rank(state: SystemState, r: int):
    if not 1 <= r <= len(state.present):
        raise RankError(f"rank {r} out of range (present={len(state.present)})")
    fw = state._ensure_ranks()
    seq = fw.select(fw.total - r + 1)
    return state._seq_to_label[seq]


@dataclass
class StepRecord:
    op_index: int
    kind: str
    bin: Optional[int]
    color: Optional[int]
    corrupted: bool
    max_load: int
    overload_seen: float


def apply(state: SystemState, op: Op, strategy, rng) -> StepRecord | None:
    """Apply one operation; returns the step record, or None on a strategy halt.

    Raises on invalid operations.  A strategy halt is a distinguished
    outcome: the state is left as it was before the insert.
    """
    kind = op[0]
    idx = state.op_count
    if kind == "i":
        label = op[1]
        if len(state.present) >= state.m_cap:
            raise CapacityError(f"op {idx}: insert {label!r} over capacity {state.m_cap}")
        if label in state.present:
            raise LabelError(f"op {idx}: ball {label!r} already present")
        if state.mode is Mode.INSERTION_DELETION:
            if not state._mark_used(label):
                raise LabelError(f"op {idx}: label {label!r} reused in insertion/deletion mode")
        first, second = draw_hash(state, label, rng)
        placed = strategy.place(first, second, rng)
        if placed is None:  # halt
            return None
        b, color, corrupted = placed
        if state._fenwick is not None:
            fw = state._fenwick
            if state.seq >= fw.size:
                fw.grow(state.seq + 1, (e[0] for e in state.present.values()))
            fw.add(state.seq, 1)
            state._seq_to_label[state.seq] = label
        state.present[label] = (state.seq, b, color, corrupted)
        state.seq += 1
        state.loads[b] += 1
        state.color_loads[color] += 1
        if state.loads[b] > state.max_load:
            state.max_load = state.loads[b]
        if len(state.present) > state.m_seen:
            state.m_seen = len(state.present)
        state.op_count += 1
        return StepRecord(idx, kind, b, color, corrupted, state.max_load, float(state.overload_seen()))
    if kind == "d" or kind == "r":
        if kind == "r":
            label = _label_for_rank(state, op[1])
        else:
            label = op[1]
        entry = state.present.pop(label, None)
        if entry is None:
            raise LabelError(f"op {idx}: ball {label!r} not present")
        seq, b, color, corrupted = entry
        if state._fenwick is not None:
            state._fenwick.add(seq, -1)
            state._seq_to_label.pop(seq, None)
        state.loads[b] -= 1
        state.color_loads[color] -= 1
        if state.loads[b] + 1 == state.max_load:
            state.max_load = max(state.loads)
        state.op_count += 1
        return StepRecord(idx, kind, b, color, corrupted, state.max_load, float(state.overload_seen()))
    raise ConfigError(f"op {idx}: unknown op kind {kind!r}")


@dataclass
class Trace:
    """Result of running a script.

    Overload maxima are tracked exactly as integers scaled by n:
    ``max_overload_seen_xn / n`` is the largest value of
    (max load - m_seen/n) observed after any step.
    """

    n: int
    m_cap: int
    halted: bool = False
    halt_index: Optional[int] = None
    steps_applied: int = 0
    max_load_overall: int = 0
    max_overload_seen_xn: Optional[int] = None
    max_overload_cap_xn: Optional[int] = None
    final_loads: list[int] = field(default_factory=list)
    final_color_loads: list[int] = field(default_factory=list)
    final_m_seen: int = 0
    records: list[StepRecord] = field(default_factory=list)

    @property
    def max_overload_seen(self) -> float:
        return self.max_overload_seen_xn / self.n if self.max_overload_seen_xn is not None else float("-inf")

    @property
    def max_overload_cap(self) -> float:
        return self.max_overload_cap_xn / self.n if self.max_overload_cap_xn is not None else float("-inf")

    @property
    def final_overload_seen(self) -> float:
        return max(self.final_loads) - self.final_m_seen / self.n if self.final_loads else float("-inf")

    def summary(self, seed=None) -> dict:
        return {
            "n": self.n,
            "m_cap": self.m_cap,
            "halted": self.halted,
            "halt_index": self.halt_index,
            "steps_applied": self.steps_applied,
            "max_load_overall": self.max_load_overall,
            "max_overload_seen": self.max_overload_seen,
            "max_overload_cap": self.max_overload_cap,
            "final_loads": self.final_loads,
            "final_m_seen": self.final_m_seen,
            "seed": seed,
        }

    def summary_json(self, seed=None) -> str:
        return json.dumps(self.summary(seed=seed))

    def records_csv(self) -> str:
        lines = ["op_index,op_kind,bin,color,corrupted,max_load,overload"]
        for r in self.records:
            lines.append(
                f"{r.op_index},{r.kind},{'' if r.bin is None else r.bin},"
                f"{'' if r.color is None else r.color},{int(r.corrupted)},"
                f"{r.max_load},{r.overload_seen}"
            )
        return "\n".join(lines)


def run(
    state: SystemState,
    script,
    strategy,
    hash_rng,
    coin_rng,
    trace_mode: TraceMode = TraceMode.OVERLOAD,
    checkpoints: Optional[dict[int, Callable[[SystemState], None]]] = None,
) -> Trace:
    """Run a script to completion (or strategy halt).

    Deterministic given (script, strategy configuration, rngs, trace_mode).
    The script exposes no read access to the state; it is an operation
    sequence materialized (or streamed) independently of strategy randomness.
    """
    strategy.begin_run(state)
    trace = Trace(state.n, state.m_cap)
    full = trace_mode is TraceMode.FULL
    n = state.n
    max_ov_seen = None
    max_ov_cap = None
    ops: Iterator[Op] = iter(script.ops() if hasattr(script, "ops") else script)
    idx_base = state.op_count
    for op in ops:
        kind = op[0]
        if kind == "i":
            # Inlined insert fast path (mirrors apply()).
            label = op[1]
            present = state.present
            if len(present) >= state.m_cap:
                raise CapacityError(f"op {state.op_count}: insert {label!r} over capacity")
            if label in present:
                raise LabelError(f"op {state.op_count}: ball {label!r} already present")
            if state.mode is Mode.INSERTION_DELETION:
                if isinstance(label, int) and label > state._label_watermark:
                    state._label_watermark = label
                elif not state._mark_used(label):
                    raise LabelError(f"op {state.op_count}: label {label!r} reused")
                first, second = draw_hash(state, label, hash_rng)
            else:
                pair = state.hash_memo.get(label)
                if pair is None:
                    first, second = draw_hash(state, label, hash_rng)
                else:
                    first, second = pair
            placed = strategy.place(first, second, coin_rng)
            if placed is None:
                trace.halted = True
                trace.halt_index = state.op_count
                break
            b, color, corrupted = placed
            if state._fenwick is not None:
                fw = state._fenwick
                if state.seq >= fw.size:
                    fw.grow(state.seq + 1, (e[0] for e in present.values()))
                fw.add(state.seq, 1)
                state._seq_to_label[state.seq] = label
            present[label] = (state.seq, b, color, corrupted)
            state.seq += 1
            loads = state.loads
            loads[b] += 1
            state.color_loads[color] += 1
            if loads[b] > state.max_load:
                state.max_load = loads[b]
            if len(present) > state.m_seen:
                state.m_seen = len(present)
            state.op_count += 1
        else:
            # Inlined delete fast path (mirrors apply()).
            if kind == "r":
                label = _label_for_rank(state, op[1])
            elif kind == "d":
                label = op[1]
            else:
                raise ConfigError(f"op {state.op_count}: unknown op kind {kind!r}")
            entry = state.present.pop(label, None)
            if entry is None:
                raise LabelError(f"op {state.op_count}: ball {label!r} not present")
            seq, b, color, corrupted = entry
            if state._fenwick is not None:
                state._fenwick.add(seq, -1)
                state._seq_to_label.pop(seq, None)
            loads = state.loads
            loads[b] -= 1
            state.color_loads[color] -= 1
            if loads[b] + 1 == state.max_load:
                state.max_load = max(loads)
            state.op_count += 1
        ov_seen = state.max_load * n - state.m_seen
        if max_ov_seen is None or ov_seen > max_ov_seen:
            max_ov_seen = ov_seen
        ov_cap = state.max_load * n - state.m_cap
        if max_ov_cap is None or ov_cap > max_ov_cap:
            max_ov_cap = ov_cap
        if state.max_load > trace.max_load_overall:
            trace.max_load_overall = state.max_load
        trace.steps_applied += 1
        if full:
            trace.records.append(
                StepRecord(state.op_count - 1, kind, b, color, corrupted, state.max_load, ov_seen / n)
            )
        if checkpoints is not None:
            cb = checkpoints.get(state.op_count - idx_base)
            if cb is not None:
                cb(state)
    trace.max_overload_seen_xn = max_ov_seen
    trace.max_overload_cap_xn = max_ov_cap
    trace.final_loads = list(state.loads)
    trace.final_color_loads = list(state.color_loads)
    trace.final_m_seen = state.m_seen
    return trace
