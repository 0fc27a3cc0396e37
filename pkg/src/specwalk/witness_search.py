"""Mixing problem with a classical witness: does some pair ``(2j, 2j+1)`` decay slowly?

A verifier family is one circuit whose witness bits live on designated
wires.  Its lowered clock uses the reflection ``−σz``, so a pair decays
slowly exactly when the verifier accepts that witness.  Indices are
reordered so that the start state for witness ``y`` becomes row ``j = y``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuits import (
    CLOCK_SCALE,
    STATEVECTOR_CAP_QUBITS,
    ClockHermitian,
    GateCircuit,
    build_clock_hermitian,
    build_u_circuit,
)
from .errors import AutomorphismError, CapExceededError, SpecwalkError
from .graph_gadget import Graph, GadgetGraph, signed_to_adjacency
from .linalg_core import SparseSymmetricMatrix
from .random_walks import (
    DecayDecision,
    DecayResult,
    HardnessParameters,
    WalkInstance,
    decide_decay,
    hardness_parameters,
    walk_spectrum,
)

MAX_WITNESS_QUBITS = 10


class Verdict(str, enum.Enum):
    EXISTS = "EXISTS"
    NONE = "NONE"
    PROMISE_VIOLATED = "promise-violated"


@dataclass(frozen=True)
class WitnessInstance:
    graph: Graph = field(repr=False)
    n_tilde: int
    mu: float
    a_const: float
    b_const: float
    t_query: float
    clock: ClockHermitian | None = field(default=None, repr=False)
    witness_wires: tuple[int, ...] = ()

    def __post_init__(self):
        if self.graph.n_vertices % 2:
            raise SpecwalkError("witness graphs have an even number of vertices")
        if not 0 <= self.n_tilde <= self.graph.n_vertices // 2:
            raise SpecwalkError(f"n_tilde = {self.n_tilde} outside [0, N]")
        if not self.graph.is_automorphism([v ^ 1 for v in range(self.graph.n_vertices)]):
            raise AutomorphismError("exchanging every 2j with 2j+1 is not an automorphism")

    def pair_instance(self, j: int) -> WalkInstance:
        return WalkInstance(self.graph, 2 * j, 2 * j + 1, self.mu, self.a_const,
                            self.b_const, self.t_query)


def witness_start_index(u: GateCircuit, wires: Sequence[int], y: int) -> int:
    """Basis index of ``|x, y, 0⟩``; the first listed wire holds the top bit of ``y``."""
    idx = u.start_index()
    w = len(wires)
    for pos, wire in enumerate(wires):
        if (y >> (w - 1 - pos)) & 1:
            idx |= 1 << (u.width - 1 - wire)
    return idx


def reorder(a: SparseSymmetricMatrix, front: Sequence[int]) -> SparseSymmetricMatrix:
    """Relabel indices so that ``front[k]`` becomes ``k``; the rest keep their order."""
    front = list(front)
    if len(set(front)) != len(front):
        raise SpecwalkError("front indices must be distinct")
    chosen = set(front)
    order = front + [i for i in range(a.dimension) if i not in chosen]
    new_of = np.empty(a.dimension, dtype=np.int64)
    new_of[order] = np.arange(a.dimension)

    def row(k: int):
        return tuple(sorted((int(new_of[c]), v) for c, v in a.row(order[k])))

    return SparseSymmetricMatrix(a.dimension, row, a.max_row_nonzeros, a.norm_bound)


def _check_wires(y: GateCircuit, wires: Sequence[int]) -> None:
    if len(set(wires)) != len(wires):
        raise SpecwalkError("witness wires must be distinct")
    if len(wires) > MAX_WITNESS_QUBITS:
        raise CapExceededError(f"{len(wires)} witness qubits exceed the cap {MAX_WITNESS_QUBITS}")
    reserved = set(range(len(y.input_bits))) | set(y.ones) | {0}
    for w in wires:
        if not 0 <= w < y.width or w in reserved:
            raise SpecwalkError(f"wire {w} cannot carry a witness bit")


def build_witness_instance(family: GateCircuit, witness_wires: Sequence[int],
                           n_tilde: int | None = None,
                           params: HardnessParameters | None = None) -> WitnessInstance:
    """Single gadget graph whose pair ``j`` tests witness ``y = j``.

    ``n_tilde`` defaults to the number of witness strings, ``2**w``.
    """
    wires = tuple(witness_wires)
    _check_wires(family, wires)
    u = build_u_circuit(family, lowered=True, negate=True)
    clock = build_clock_hermitian(u)
    starts = [witness_start_index(u, wires, y) for y in range(1 << len(wires))]
    a = reorder(clock.a_matrix, starts)
    graph: GadgetGraph = signed_to_adjacency(a)
    hp = params or hardness_parameters(clock.clock_size, CLOCK_SCALE)
    n_t = (1 << len(wires)) if n_tilde is None else n_tilde
    if n_t > 1 << len(wires):
        raise SpecwalkError("n_tilde exceeds the number of witness strings")
    return WitnessInstance(graph, n_t, hp.mu, hp.reject_threshold, hp.accept_threshold,
                           hp.t_star, clock, wires)


def witness_acceptance(family: GateCircuit, witness_wires: Sequence[int]) -> list[float]:
    """``|α₁|²`` of the verifier for every witness ``y`` (statevector)."""
    wires = tuple(witness_wires)
    _check_wires(family, wires)
    if family.width > STATEVECTOR_CAP_QUBITS:
        raise CapExceededError(f"{family.width} qubits exceed the statevector cap")
    half = family.dimension // 2
    out = []
    for y in range(1 << len(wires)):
        state = np.zeros(family.dimension)
        state[witness_start_index(family, wires, y)] = 1.0
        out.append(float(np.sum(family.apply(state)[half:] ** 2)))
    return out


@dataclass(frozen=True)
class WitnessResult:
    verdict: Verdict
    index: int | None
    pairs: tuple[DecayResult, ...]
    method: str

    def as_dict(self) -> dict:
        return {"verdict": self.verdict.value, "witness": self.index, "method": self.method,
                "pairs": [{"j": j, **p.as_dict()} for j, p in enumerate(self.pairs)]}


def decide_witness(instance: WitnessInstance, method: str = "exact", alpha: float = 0.05,
                   seed: int = 0) -> WitnessResult:
    """Check every pair ``j < Ñ`` and return the smallest slow-decay index.

    Sampling mode gives each pair confidence ``α/Ñ`` and its own child seed.
    A promise violation on any pair makes the verdict promise-violated.
    """
    n_t = instance.n_tilde
    if n_t == 0:
        return WitnessResult(Verdict.NONE, None, (), method)
    spectrum = walk_spectrum(instance.graph) if method == "exact" else None
    seeds = np.random.SeedSequence(seed).spawn(n_t)
    results = []
    for j in range(n_t):
        child = int(seeds[j].generate_state(1)[0])
        results.append(decide_decay(instance.pair_instance(j), method, alpha=alpha / n_t,
                                    seed=child, spectrum=spectrum))
    decisions = [r.decision for r in results]
    if DecayDecision.PROMISE_VIOLATED in decisions:
        return WitnessResult(Verdict.PROMISE_VIOLATED, None, tuple(results), method)
    if DecayDecision.GE_A in decisions:
        return WitnessResult(Verdict.EXISTS, decisions.index(DecayDecision.GE_A), tuple(results), method)
    return WitnessResult(Verdict.NONE, None, tuple(results), method)
