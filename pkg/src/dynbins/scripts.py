"""Oblivious adversary scripts.

A script is a finite sequence of insert/delete operations fixed before any
strategy randomness is consumed.  Obliviousness is structural: scripts have
no query interface onto engine state.  Long scripts may be streamed from a
deterministic factory instead of materialized, which keeps multi-million-op
constructions cheap.
"""

from __future__ import annotations

import json
import random
from typing import Callable, Iterator, Optional

from .engine import Op
from .rng import child_rng

__all__ = ["Script", "ScriptBuilder", "sawtooth_script", "insertion_only_script"]


class Script:
    """A finite oblivious operation sequence plus generator metadata."""

    def __init__(
        self,
        ops: Optional[list[Op]] = None,
        factory: Optional[Callable[[], Iterator[Op]]] = None,
        meta: Optional[dict] = None,
        length: Optional[int] = None,
    ):
        if (ops is None) == (factory is None):
            raise ValueError("exactly one of ops / factory required")
        self._ops = ops
        self._factory = factory
        self.meta = meta or {}
        self.length = len(ops) if ops is not None else length

    def ops(self) -> Iterator[Op]:
        if self._ops is not None:
            return iter(self._ops)
        return self._factory()

    def materialize(self) -> list[Op]:
        if self._ops is None:
            self._ops = list(self._factory())
            self.length = len(self._ops)
        return self._ops

    def to_json(self) -> str:
        ops = []
        for op in self.materialize():
            if op[0] == "i":
                ops.append({"op": "insert", "label": op[1]})
            elif op[0] == "d":
                ops.append({"op": "delete", "label": op[1]})
            else:
                ops.append({"op": "delete_rank", "rank": op[1]})
        return json.dumps({"meta": self.meta, "ops": ops})

    @classmethod
    def from_json(cls, text: str) -> "Script":
        data = json.loads(text)
        ops: list[Op] = []
        for entry in data["ops"]:
            kind = entry["op"]
            if kind == "insert":
                ops.append(("i", entry["label"]))
            elif kind == "delete":
                ops.append(("d", entry["label"]))
            elif kind == "delete_rank":
                ops.append(("r", entry["rank"]))
            else:
                raise ValueError(f"unknown op {kind!r}")
        return cls(ops=ops, meta=data.get("meta", {}))


class ScriptBuilder:
    """Incrementally builds a script while enforcing the capacity invariant.

    The builder tracks which labels are present purely from the ops it has
    emitted (never from engine state).  Labels are integers from a private
    counter unless supplied explicitly.
    """

    def __init__(self, m_cap: int, reinsertion: bool = False, initial_present=()):
        self.m_cap = m_cap
        self.reinsertion = reinsertion
        self.ops: list[Op] = []
        self._present: dict = {}  # label -> index into _present_list
        self._present_list: list = []
        self._used: set = set()
        self._next_label = 0
        for label in initial_present:
            self._used.add(label)
            self._present[label] = len(self._present_list)
            self._present_list.append(label)
        if len(self._present_list) > m_cap:
            raise ValueError("initial present set exceeds capacity")
        self.max_present = len(self._present_list)

    @property
    def present_count(self) -> int:
        return len(self._present_list)

    def present_labels(self) -> list:
        return list(self._present_list)

    def fresh_label(self) -> int:
        label = self._next_label
        self._next_label = label + 1
        return label

    def insert(self, label=None):
        if label is None:
            label = self.fresh_label()
        if label in self._present:
            raise ValueError(f"label {label!r} already present")
        if not self.reinsertion and label in self._used:
            raise ValueError(f"label {label!r} reused in insertion/deletion mode")
        if len(self._present_list) >= self.m_cap:
            raise ValueError(f"script would exceed capacity {self.m_cap}")
        self._used.add(label)
        self._present[label] = len(self._present_list)
        self._present_list.append(label)
        if len(self._present_list) > self.max_present:
            self.max_present = len(self._present_list)
        self.ops.append(("i", label))
        return label

    def delete(self, label) -> None:
        pos = self._present.pop(label, None)
        if pos is None:
            raise ValueError(f"label {label!r} not present")
        last = self._present_list.pop()
        if last != label:
            self._present_list[pos] = last
            self._present[last] = pos
        self.ops.append(("d", label))

    def delete_random(self, rng: random.Random):
        """Delete a uniformly random present ball (choice made by the script stream)."""
        if not self._present_list:
            raise ValueError("no present balls")
        label = self._present_list[rng.randrange(len(self._present_list))]
        self.delete(label)
        return label

    def build(self, meta: Optional[dict] = None) -> Script:
        return Script(ops=self.ops, meta=meta or {})


def insertion_only_script(m: int, m_cap: Optional[int] = None) -> Script:
    """Insert m fresh balls, nothing else."""
    ops = [("i", i) for i in range(m)]
    return Script(ops=ops, meta={"generator": "insertion_only", "m": m})


def sawtooth_script(
    m_cap: int,
    total_ops: int,
    amplitude: int,
    script_seed: int,
    streamed: bool = True,
) -> Script:
    """Fill to capacity, then oscillate: delete `amplitude` random present
    balls, reinsert that many fresh balls, repeatedly.

    The occupancy repeatedly returns to exactly m_cap, which is the regime
    where a modulated strategy has the least slack.
    """
    if amplitude < 1 or amplitude > m_cap:
        raise ValueError("amplitude must be in [1, m_cap]")

    def factory() -> Iterator[Op]:
        rng = child_rng(script_seed, "sawtooth")
        present: list[int] = []
        next_label = 0
        emitted = 0
        while emitted < total_ops and len(present) < m_cap:
            present.append(next_label)
            yield ("i", next_label)
            next_label += 1
            emitted += 1
        deleting = True
        cycle_left = amplitude
        while emitted < total_ops:
            if deleting:
                idx = rng.randrange(len(present))
                label = present[idx]
                last = present.pop()
                if last != label:
                    present[idx] = last
                yield ("d", label)
            else:
                present.append(next_label)
                yield ("i", next_label)
                next_label += 1
            emitted += 1
            cycle_left -= 1
            if cycle_left == 0:
                deleting = not deleting
                cycle_left = amplitude

    meta = {
        "generator": "sawtooth",
        "m_cap": m_cap,
        "total_ops": total_ops,
        "amplitude": amplitude,
        "script_seed": script_seed,
    }
    script = Script(factory=factory, meta=meta, length=total_ops)
    if not streamed:
        script.materialize()
    return script
