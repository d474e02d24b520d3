"""Placement strategies.

Two layers:

* an exact layer (`selection_distribution`, `modulated_probability`) that
  works in rational arithmetic for oracle-grade checks, and
* fast strategy objects used by the engine's run loop.  A strategy holds a
  reference to the live system state (set in ``begin_run``) and decides
  placements from the offered bin pair plus the current color loads only —
  it never sees ball labels (ID-obliviousness).

``place(first, second, rng)`` returns ``(bin, color, corrupted)`` or ``None``
for a halt.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .engine import HashModel, SystemState

__all__ = [
    "StrategyDecision",
    "selection_distribution",
    "SingleChoice",
    "Greedy",
    "ModulatedGreedy",
    "GeneralizedModulatedGreedy",
    "OnePlusBetaAdapter",
    "GraphModel",
    "graphical_pair",
    "GraphicalAdapter",
    "make_strategy",
]


def _log(x: float, base: Optional[float]) -> float:
    return math.log(x) if base is None else math.log(x, base)


@dataclass(frozen=True)
class StrategyDecision:
    """Exact-layer record of one placement decision."""

    bin: int
    color: int
    corrupted: bool
    p_used: Fraction  # probability with which `bin` was chosen given the pair

    def __post_init__(self):
        assert 0 <= self.p_used <= 1
        assert self.corrupted or self.color == self.bin


def selection_distribution(
    loads: list[int],
    T: Fraction,
    hash_model: HashModel = HashModel.INDEPENDENT_PAIR,
) -> list[Fraction]:
    """Exact marginal bin-selection distribution of the modulated rule.

    Computed two independent ways — the closed form T_k/(nT) with
    T_k = T + l̄ − l_k, and brute-force enumeration over all ordered hash
    pairs with the per-pair bias 1/2 + (l_j − l_i)/(2T) — and checked for
    exact rational equality before returning.
    """
    n = len(loads)
    T = Fraction(T)
    if max(loads) - min(loads) > T:
        raise ValueError("load gap exceeds T; modulated probabilities undefined")
    lbar = Fraction(sum(loads), n)
    closed = [(T + lbar - lk) / (n * T) for lk in loads]

    brute = [Fraction(0)] * n
    if hash_model is HashModel.INDEPENDENT_PAIR:
        pair_p = Fraction(1, n * n)
        pairs = [(i, j) for i in range(n) for j in range(n)]
    else:
        pair_p = Fraction(1, n * (n - 1))
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for i, j in pairs:
        p_i = Fraction(1, 2) + Fraction(loads[j] - loads[i]) / (2 * T)
        assert 0 <= p_i <= 1
        brute[i] += pair_p * p_i
        brute[j] += pair_p * (1 - p_i)

    if hash_model is HashModel.INDEPENDENT_PAIR:
        assert brute == closed, "dual-method distribution mismatch"
    assert sum(brute) == 1
    return brute


class _StrategyBase:
    """Shared bookkeeping: decision counts and observed probability range."""

    def __init__(self):
        self.decisions = 0
        self.halts = 0
        self.corrupted_count = 0
        self.p_min = 1.0
        self.p_max = 0.0
        self._state: Optional[SystemState] = None

    def begin_run(self, state: SystemState) -> None:
        self._state = state

    def _note_p(self, p: float) -> None:
        if p < self.p_min:
            self.p_min = p
        if p > self.p_max:
            self.p_max = p


class SingleChoice(_StrategyBase):
    """Always the first hash choice."""

    name = "single"

    def place(self, first: int, second: int, rng: random.Random):
        self.decisions += 1
        return (first, first, False)


class Greedy(_StrategyBase):
    """The lesser-loaded of the two offered bins; fair coin on ties."""

    name = "greedy"

    def place(self, first: int, second: int, rng: random.Random):
        self.decisions += 1
        loads = self._state.loads
        li = loads[first]
        lj = loads[second]
        if li < lj:
            return (first, first, False)
        if lj < li:
            return (second, second, False)
        b = first if rng.random() < 0.5 else second
        return (b, b, False)


class ModulatedGreedy(_StrategyBase):
    """Biased two-choice with threshold T = m/n + c·log m − l̄.

    Halts (returns None) when the color-load gap exceeds T; otherwise picks
    the first offered bin with probability 1/2 + (l_j − l_i)/(2T).  All
    decisions read color loads, and m is the configured capacity.
    """

    name = "modulated"

    def __init__(self, c: float = 4.0, log_base: Optional[float] = None):
        super().__init__()
        if c <= 0:
            raise ValueError("c must be positive")
        self.c = c
        self.log_base = log_base
        self._T0 = 0.0
        self._n = 0

    def begin_run(self, state: SystemState) -> None:
        super().begin_run(state)
        self._n = state.n
        self._T0 = state.m_cap / state.n + self.c * _log(state.m_cap, self.log_base)

    def threshold(self) -> float:
        """Current T (for inspection/tests)."""
        return self._T0 - len(self._state.present) / self._n

    def place(self, first: int, second: int, rng: random.Random):
        state = self._state
        cl = state.color_loads
        T = self._T0 - len(state.present) / self._n
        if max(cl) - min(cl) > T:
            self.halts += 1
            return None
        self.decisions += 1
        p = 0.5 + (cl[second] - cl[first]) / (2.0 * T)
        assert 0.0 <= p <= 1.0
        self._note_p(p)
        if rng.random() < p:
            return (first, first, False)
        return (second, second, False)


class GeneralizedModulatedGreedy(_StrategyBase):
    """Never-halting variant with corrupted balls.

    Δ = ⌈c·ε⁻²·log M⌉ (kept integral so the coupled stone game stays in
    exact integer arithmetic) and T = ⌈m/n⌉ + Δ − l̄ with m the high-water
    ball count.  Gap ≤ εT: modulated placement, color = bin.  Otherwise the
    ball is corrupted: bin uniform among the pair, color drawn with
    P(color = k) ∝ ⌈m/n⌉ + Δ − l_k.
    """

    name = "generalized"

    def __init__(
        self,
        epsilon: float,
        c: float = 4.0,
        M: Optional[int] = None,
        log_base: Optional[float] = None,
    ):
        super().__init__()
        if not 0 < epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        if c <= 0:
            raise ValueError("c must be positive")
        self.epsilon = epsilon
        self.c = c
        self.M = M
        self.log_base = log_base
        self.delta = 0
        self._n = 0

    def begin_run(self, state: SystemState) -> None:
        super().begin_run(state)
        self._n = state.n
        M = self.M if self.M is not None else state.m_cap
        self.delta = math.ceil(self.c * self.epsilon**-2 * _log(M, self.log_base))

    def _weights_base(self) -> int:
        """⌈m/n⌉ + Δ for the current state."""
        state = self._state
        return -(-state.m_seen // self._n) + self.delta

    def place(self, first: int, second: int, rng: random.Random):
        state = self._state
        cl = state.color_loads
        n = self._n
        base = -(-state.m_seen // n) + self.delta
        s = len(state.present)
        T = base - s / n
        self.decisions += 1
        if max(cl) - min(cl) <= self.epsilon * T:
            p = 0.5 + (cl[second] - cl[first]) / (2.0 * T)
            assert 0.0 <= p <= 1.0
            self._note_p(p)
            if rng.random() < p:
                return (first, first, False)
            return (second, second, False)
        # Corrupted: physical bin is a fair coin over the pair, color keeps
        # the modulated marginal so the stone coupling survives.
        self.corrupted_count += 1
        b = first if rng.random() < 0.5 else second
        total = n * base - s  # = n·T, a positive integer
        r = rng.randrange(total)
        color = 0
        for k in range(n):
            r -= base - cl[k]
            if r < 0:
                color = k
                break
        return (b, color, True)

    def color_weights(self) -> list[int]:
        """Exact corrupted-color category weights (w_k = ⌈m/n⌉+Δ−l_k)."""
        base = self._weights_base()
        return [base - lk for lk in self._state.color_loads]


class OnePlusBetaAdapter(_StrategyBase):
    """(1+β)-choice process driving GeneralizedModulatedGreedy with ε = β/2.

    With probability 1−β the ball is offered one uniform bin (the first hash
    choice); with probability β it is offered both.  Two-bin offers use the
    residual probability q = (p − (1−β)/2)/β so the composite marginal over
    the offer process equals the inner strategy's marginal.
    """

    name = "one_plus_beta"

    def __init__(
        self,
        beta: float,
        c: float = 4.0,
        M: Optional[int] = None,
        log_base: Optional[float] = None,
    ):
        super().__init__()
        if not 0 < beta <= 1:
            raise ValueError("beta must be in (0, 1]")
        self.beta = beta
        self.inner = GeneralizedModulatedGreedy(epsilon=beta / 2, c=c, M=M, log_base=log_base)
        self.q_min = 1.0
        self.q_max = 0.0

    def begin_run(self, state: SystemState) -> None:
        super().begin_run(state)
        self.inner.begin_run(state)

    @property
    def delta(self) -> int:
        return self.inner.delta

    def place(self, first: int, second: int, rng: random.Random):
        state = self._state
        cl = state.color_loads
        n = self.inner._n
        base = -(-state.m_seen // n) + self.inner.delta
        s = len(state.present)
        T = base - s / n
        beta = self.beta
        self.decisions += 1
        two_bins = rng.random() < beta
        corrupted = max(cl) - min(cl) > self.inner.epsilon * T
        if not corrupted:
            if two_bins:
                p = 0.5 + (cl[second] - cl[first]) / (2.0 * T)
                q = (p - (1.0 - beta) / 2.0) / beta
                assert 0.0 <= q <= 1.0, f"residual q={q} outside [0,1]"
                if q < self.q_min:
                    self.q_min = q
                if q > self.q_max:
                    self.q_max = q
                self._note_p(p)
                b = first if rng.random() < q else second
            else:
                b = first
            return (b, b, False)
        self.corrupted_count += 1
        if two_bins:
            # Corrupted inner p is exactly 1/2, so the residual is 1/2.
            b = first if rng.random() < 0.5 else second
            if 0.5 < self.q_min:
                self.q_min = 0.5
            if 0.5 > self.q_max:
                self.q_max = 0.5
        else:
            b = first
        total = n * base - s
        r = rng.randrange(total)
        color = 0
        for k in range(n):
            r -= base - cl[k]
            if r < 0:
                color = k
                break
        return (b, color, True)


class GraphModel:
    """A d-regular undirected graph whose edges define the admissible pairs."""

    def __init__(self, n: int, d: int, edges: list[tuple[int, int]]):
        degree = [0] * n
        seen = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            degree[u] += 1
            degree[v] += 1
        for v, deg in enumerate(degree):
            if deg != d:
                raise ValueError(f"vertex {v} has degree {deg}, expected {d}")
        self.n = n
        self.d = d
        self.edges = [((u, v) if u < v else (v, u)) for u, v in edges]

    @classmethod
    def complete(cls, n: int) -> "GraphModel":
        return cls(n, n - 1, [(i, j) for i in range(n) for j in range(i + 1, n)])

    @classmethod
    def cycle(cls, n: int) -> "GraphModel":
        return cls(n, 2, [(i, (i + 1) % n) for i in range(n)])

    @classmethod
    def from_edge_list(cls, text: str) -> "GraphModel":
        """Parse the "n d" header then one "u v" pair per line."""
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        n, d = map(int, lines[0].split())
        edges = [tuple(map(int, ln.split())) for ln in lines[1:]]
        return cls(n, d, edges)


def graphical_pair(graph: GraphModel, rng: random.Random) -> tuple[int, int]:
    """A uniformly random edge with uniformly random orientation."""
    u, v = graph.edges[rng.randrange(len(graph.edges))]
    return (u, v) if rng.random() < 0.5 else (v, u)


class GraphicalAdapter(_StrategyBase):
    """Replaces the engine's hash pair with a uniform graph edge.

    The inner strategy sees only the substituted pair; used for the
    graphical input model where balls may only go to adjacent bins.
    """

    name = "graphical"

    def __init__(self, graph: GraphModel, inner):
        super().__init__()
        self.graph = graph
        self.inner = inner

    def begin_run(self, state: SystemState) -> None:
        super().begin_run(state)
        if self.graph.n != state.n:
            raise ValueError("graph vertex count must equal bin count")
        self.inner.begin_run(state)

    def place(self, first: int, second: int, rng: random.Random):
        u, v = graphical_pair(self.graph, rng)
        return self.inner.place(u, v, rng)


def make_strategy(name: str, **params):
    """Strategy factory used by the harness config layer."""
    if name == "single":
        return SingleChoice()
    if name == "greedy":
        return Greedy()
    if name == "modulated":
        return ModulatedGreedy(**params)
    if name == "generalized":
        return GeneralizedModulatedGreedy(**params)
    if name == "one_plus_beta":
        return OnePlusBetaAdapter(**params)
    raise ValueError(f"unknown strategy {name!r}")
