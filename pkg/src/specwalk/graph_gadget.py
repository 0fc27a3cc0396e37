"""Signed ±1/0 matrices to 0-1 adjacency matrices, and path-difference decisions.

Vertex ``2i + s`` of the gadget graph stands for ``|s⟩ ⊗ |i⟩``: the sign
qubit is the fastest index, so the automorphism ``σx ⊗ 1`` swaps ``2i`` and
``2i + 1``.  A self-loop counts once in the adjacency matrix and once in the
degree.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import AutomorphismError, CapExceededError, FormatError, SpecwalkError
from .linalg_core import (
    SparseSymmetricMatrix,
    dense_cap,
    diagonal_moments,
    eig,
    materialize,
    operator_norm,
)
from .phase_estimation import ExpectationEstimate, estimate_expectation, power_function


class Decision(str, enum.Enum):
    GE = "GE"
    LE = "LE"
    PROMISE_VIOLATED = "promise-violated"


@dataclass(frozen=True)
class Graph:
    """Undirected regular graph given by a neighbour oracle."""

    n_vertices: int
    neighbors_oracle: Callable[[int], Sequence[int]] = field(repr=False)
    degree: int

    def neighbors(self, v: int) -> tuple[int, ...]:
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex {v} out of range")
        return tuple(self.neighbors_oracle(v))

    @classmethod
    def from_lists(cls, lists: Sequence[Sequence[int]]) -> "Graph":
        lists = tuple(tuple(sorted(int(u) for u in nb)) for nb in lists)
        degs = {len(nb) for nb in lists}
        if len(degs) > 1:
            raise SpecwalkError(f"graph is not regular (degrees {sorted(degs)})")
        g = cls(len(lists), lists.__getitem__, degs.pop() if degs else 0)
        g.validate()
        return g

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        a = np.asarray(adj)
        if not np.array_equal(a, a.T) or not np.isin(a, (0, 1)).all():
            raise SpecwalkError("adjacency matrix must be symmetric with 0/1 entries")
        return cls.from_lists([np.nonzero(row)[0] for row in a])

    def validate(self) -> None:
        """Check simplicity, symmetry and regularity of the oracle (exhaustive)."""
        for v in range(self.n_vertices):
            nb = self.neighbors(v)
            if len(set(nb)) != len(nb):
                raise SpecwalkError(f"vertex {v} has a repeated neighbour")
            if len(nb) != self.degree:
                raise SpecwalkError(f"vertex {v} has degree {len(nb)}, expected {self.degree}")
            for u in nb:
                if not 0 <= u < self.n_vertices or v not in self.neighbors(u):
                    raise SpecwalkError(f"edge ({v}, {u}) is not symmetric")

    def neighbor_table(self) -> np.ndarray:
        return np.array([self.neighbors(v) for v in range(self.n_vertices)],
                        dtype=np.int64).reshape(self.n_vertices, self.degree)

    def adjacency(self, cap: int | None = None) -> np.ndarray:
        cap = dense_cap() if cap is None else cap
        if self.n_vertices > cap:
            raise CapExceededError(f"{self.n_vertices} vertices exceed dense cap {cap}")
        a = np.zeros((self.n_vertices, self.n_vertices), dtype=np.int64)
        for v in range(self.n_vertices):
            a[v, list(self.neighbors(v))] = 1
        return a

    def is_automorphism(self, perm: Sequence[int]) -> bool:
        perm = list(perm)
        if sorted(perm) != list(range(self.n_vertices)):
            return False
        return all(set(self.neighbors(perm[v])) == {perm[u] for u in self.neighbors(v)}
                   for v in range(self.n_vertices))


@dataclass(frozen=True)
class GadgetGraph(Graph):
    source: SparseSymmetricMatrix | None = field(default=None, repr=False)

    def pair_of(self, j: int) -> tuple[int, int]:
        """``(q, r)`` for source index ``j``."""
        if self.source is None or not 0 <= j < self.source.dimension:
            raise IndexError(f"source index {j} out of range")
        return 2 * j, 2 * j + 1

    def swap_permutation(self) -> list[int]:
        """The automorphism ``σx ⊗ 1``."""
        return [v ^ 1 for v in range(self.n_vertices)]


def signed_to_adjacency(a: SparseSymmetricMatrix) -> GadgetGraph:
    """Replace each ``-1`` by ``σx``, each ``+1`` by ``1₂`` (lazy oracle)."""

    @lru_cache(maxsize=None)
    def row(i: int):
        r = a.row(i)
        for _, val in r:
            if not (isinstance(val, (int, np.integer)) and abs(val) == 1):
                raise SpecwalkError(f"row {i} has entry {val!r}; only ±1 allowed")
        return r

    def neighbors(v: int):
        i, s = divmod(v, 2)
        return sorted(2 * j + (s if val == 1 else 1 - s) for j, val in row(i))

    degrees = {len(row(i)) for i in range(a.dimension)} if a.dimension <= 1 << 16 else {a.max_row_nonzeros}
    if len(degrees) != 1:
        raise SpecwalkError(f"signed matrix rows have differing counts {sorted(degrees)}; graph not regular")
    return GadgetGraph(2 * a.dimension, neighbors, degrees.pop(), a)


def direct_sum_check(a: SparseSymmetricMatrix) -> dict:
    """Verify ``Ã = A ⊗ |φ⁻⟩⟨φ⁻| + (A∗A) ⊗ |φ⁺⟩⟨φ⁺|`` in integer arithmetic.

    Also compares spectra and operator norms.
    """
    dense = materialize(a)
    g = signed_to_adjacency(a)
    at = g.adjacency()
    minus = np.array([[1, -1], [-1, 1]])
    plus = np.array([[1, 1], [1, 1]])
    had = dense * dense
    twice = np.kron(dense, minus) + np.kron(had, plus)
    deviation = int(np.max(np.abs(2 * at - twice)))
    spec_tilde = eig(at).eigenvalues
    spec_union = np.sort(np.concatenate([eig(dense).eigenvalues, eig(had).eigenvalues]))
    norm_tilde = operator_norm(at)
    norm_max = max(operator_norm(dense), operator_norm(had))
    return {"max_deviation": deviation,
            "spectrum_deviation": float(np.max(np.abs(spec_tilde - spec_union))),
            "norm_tilde": norm_tilde, "norm_max": norm_max,
            "norm_deviation": abs(norm_tilde - norm_max)}


def walk_counts(graph: Graph, start: int, m: int) -> list[np.ndarray]:
    """Exact numbers of length-``n`` walks from ``start`` to every vertex, ``n = 0..m``."""
    table = graph.neighbor_table()
    bound = graph.degree ** m if graph.degree else 1
    dtype = np.int64 if bound < 2 ** 62 else object
    v = np.zeros(graph.n_vertices, dtype=dtype)
    v[start] = 1
    out = [v.copy()]
    for _ in range(m):
        v = v[table].sum(axis=1)
        out.append(v)
    return out


def path_difference_exact(graph: Graph, q: int, r: int, m: int) -> int:
    """``Δ^(m)_qr``: length-``m`` walks ``q → q`` minus walks ``q → r``."""
    if m < 0:
        raise SpecwalkError("m must be nonnegative")
    counts = walk_counts(graph, q, m)[-1]
    return int(counts[q]) - int(counts[r])


def path_differences(graph: Graph, q: int, r: int, m: int) -> list[int]:
    return [int(c[q]) - int(c[r]) for c in walk_counts(graph, q, m)]


def verify_reduction_identity(a: SparseSymmetricMatrix, j: int, m: int) -> dict:
    """Check ``(A^n)_jj = Δ^(n)_qr`` exactly for ``n ≤ m`` and the growth bound."""
    dense = materialize(a)
    g = signed_to_adjacency(a)
    q, r = g.pair_of(j)
    deltas = path_differences(g, q, r, m)
    diag = diagonal_moments(dense, j, m)
    mismatches = [n for n in range(m + 1) if deltas[n] != diag[n]]
    if mismatches:
        raise SpecwalkError(f"reduction identity fails at n = {mismatches}")
    norm = operator_norm(dense)
    growth = [abs(d) ** (1.0 / n) for n, d in enumerate(deltas) if n]
    worst = max(growth, default=0.0)
    return {"j": j, "q": q, "r": r, "m": m, "deltas": deltas, "diag": diag,
            "norm": norm, "max_growth": worst, "growth_ok": worst <= norm + 1e-9}


def check_exchange(graph: Graph, q: int, r: int, perm: Sequence[int]) -> None:
    if q == r:
        raise AutomorphismError("q and r must be distinct")
    if len(perm) != graph.n_vertices or perm[q] != r or perm[r] != q:
        raise AutomorphismError(f"permutation does not exchange {q} and {r}")
    if not graph.is_automorphism(perm):
        raise AutomorphismError("permutation is not a graph automorphism")


@dataclass(frozen=True)
class PathDifferenceInstance:
    graph: Graph = field(repr=False)
    q: int
    r: int
    m: int
    g: float
    epsilon: float
    growth_bound: float
    automorphism: tuple[int, ...] = field(repr=False, default=())

    def __post_init__(self):
        if self.m < 1:
            raise SpecwalkError("m must be a positive integer")
        if self.epsilon <= 0 or self.growth_bound <= 0:
            raise SpecwalkError("epsilon and growth bound must be positive")
        if abs(self.g) > self.growth_bound ** self.m * (1 + 1e-12):
            raise SpecwalkError("threshold g must lie in [-b^m, b^m]")
        perm = tuple(self.automorphism)
        if not perm:
            if isinstance(self.graph, GadgetGraph) and self.q // 2 == self.r // 2:
                perm = tuple(self.graph.swap_permutation())
            else:
                raise AutomorphismError("an automorphism exchanging q and r must be supplied")
        object.__setattr__(self, "automorphism", perm)

    @property
    def gap(self) -> float:
        return self.epsilon * self.growth_bound ** self.m


@dataclass(frozen=True)
class PathDecision:
    decision: Decision
    method: str
    value: float
    exact_value: int | None = None
    estimate: ExpectationEstimate | None = None

    def as_dict(self) -> dict:
        out = {"decision": self.decision.value, "method": self.method, "value": self.value}
        if self.exact_value is not None:
            out["delta_exact"] = self.exact_value
        if self.estimate is not None:
            out["estimator"] = self.estimate.as_dict()
        return out


def decide_path_difference(instance: PathDifferenceInstance, method: str = "exact",
                           alpha: float = 0.05, seed: int = 0,
                           norm_bound: float | None = None) -> PathDecision:
    """Decide ``Δ ≥ g + εb^m`` (GE) versus ``Δ ≤ g − εb^m`` (LE).

    ``quantum-sim`` measures ``x^m`` on ``ψ⁻ = (|q⟩ − |r⟩)/√2`` for ``Ã/d``
    with ``d`` the degree (or ``norm_bound``), via the expectation estimator,
    with error budget just below ``εb^m``.  It cannot detect promise
    violations and returns its best decision.
    """
    inst = instance
    check_exchange(inst.graph, inst.q, inst.r, inst.automorphism)
    if method == "exact":
        delta = path_difference_exact(inst.graph, inst.q, inst.r, inst.m)
        if delta >= inst.g + inst.gap:
            dec = Decision.GE
        elif delta <= inst.g - inst.gap:
            dec = Decision.LE
        else:
            dec = Decision.PROMISE_VIOLATED
        return PathDecision(dec, method, float(delta), exact_value=delta)
    if method != "quantum-sim":
        raise SpecwalkError(f"unknown method {method!r}")
    adj = inst.graph.adjacency()
    d = float(norm_bound if norm_bound is not None else max(inst.graph.degree, 1))
    c = min(inst.growth_bound / d, 1.0)
    f = power_function(inst.m, c)
    # error ε'(c^m + m c^{m-1}) on Δ/d^m must stay below εb^m/d^m
    budget = inst.gap / d ** inst.m
    eps = 0.99 * budget / (f.sup_norm + f.lipschitz_k)
    if eps >= 1.0:
        eps = 0.99
    psi = np.zeros(inst.graph.n_vertices)
    psi[inst.q], psi[inst.r] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    est = estimate_expectation(adj / d, psi, f, eps, alpha, rng_seed=seed)
    value = est.estimate * d ** inst.m
    dec = Decision.GE if value >= inst.g else Decision.LE
    return PathDecision(dec, method, value, estimate=est)


# -- text formats ------------------------------------------------------------

def dumps_graph(graph: Graph) -> str:
    lines = [f"graph {graph.n_vertices} {graph.degree}"]
    lines += [f"{v}: " + " ".join(map(str, sorted(graph.neighbors(v)))) for v in range(graph.n_vertices)]
    return "\n".join(lines) + "\n"


def loads_graph(text: str) -> Graph:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise FormatError("empty graph file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "graph":
        raise FormatError(f"expected header 'graph <N> <degree>', got {lines[0]!r}")
    try:
        n, deg = int(head[1]), int(head[2])
    except ValueError as exc:
        raise FormatError(f"bad header {lines[0]!r}") from exc
    lists: list[list[int] | None] = [None] * n
    for ln in lines[1:]:
        if ":" not in ln:
            raise FormatError(f"expected 'u: v1 v2 ...', got {ln!r}")
        u, rest = ln.split(":", 1)
        try:
            u = int(u)
            nb = [int(x) for x in rest.split()]
        except ValueError as exc:
            raise FormatError(f"bad adjacency line {ln!r}") from exc
        if not 0 <= u < n or lists[u] is not None:
            raise FormatError(f"vertex {u} out of range or listed twice")
        lists[u] = nb
    if any(nb is None for nb in lists):
        raise FormatError("adjacency list missing for some vertex")
    try:
        g = Graph.from_lists(lists)
    except SpecwalkError as exc:
        raise FormatError(str(exc)) from exc
    if g.degree != deg:
        raise FormatError(f"header degree {deg} does not match lists ({g.degree})")
    return g


def dumps_perm(perm: Sequence[int]) -> str:
    return "\n".join([f"perm {len(perm)}"] + [str(int(p)) for p in perm]) + "\n"


def loads_perm(text: str) -> tuple[int, ...]:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    head = lines[0].split() if lines else []
    if len(head) != 2 or head[0] != "perm":
        raise FormatError("expected header 'perm <N>'")
    n = int(head[1])
    try:
        perm = tuple(int(x) for x in lines[1:])
    except ValueError as exc:
        raise FormatError("bad permutation entry") from exc
    if len(perm) != n or sorted(perm) != list(range(n)):
        raise FormatError("permutation file does not list a permutation of 0..N-1")
    return perm


def load_graph(path) -> Graph:
    with open(path) as fh:
        return loads_graph(fh.read())


def load_perm(path) -> tuple[int, ...]:
    with open(path) as fh:
        return loads_perm(fh.read())
