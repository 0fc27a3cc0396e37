"""Continuous- and discrete-time classical random walks on regular graphs.

The decay statistic ``c_qr(t) = (e^{-Lt})_qq − (e^{-Lt})_qr`` of a walk
started at ``q`` is decided against thresholds ``a·e^{-μT}`` and
``b·e^{-μT}`` either exactly or through the phase-estimation estimator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .circuits import CLOCK_SCALE, GateCircuit, acceptance_probability, build_clock_hermitian, build_u_circuit
from .errors import SpecwalkError
from .graph_gadget import Graph, check_exchange, signed_to_adjacency
from .linalg_core import EigenSystem, eig, materialize, project_state
from .phase_estimation import ExpectationEstimate, decay_function, estimate_expectation

SQRT2 = math.sqrt(2.0)
SUPPORT_ATOL = 1e-9


class DecayDecision(str, enum.Enum):
    GE_A = "GE_a"
    LE_B = "LE_b"
    PROMISE_VIOLATED = "promise-violated"


def laplacian_of(graph: Graph) -> np.ndarray:
    """``L = d·I − Ã``; a self-loop adds 1 to both ``Ã_vv`` and ``d``."""
    adj = graph.adjacency()
    deg = adj.sum(axis=1)
    if adj.shape[0] and np.any(deg != graph.degree):
        raise SpecwalkError("graph is not regular")
    return graph.degree * np.eye(adj.shape[0], dtype=np.int64) - adj


def discrete_walk_matrix(graph: Graph) -> np.ndarray:
    """``Â = Ã/4`` for a 4-regular graph (self-loops count once)."""
    if graph.degree != 4:
        raise SpecwalkError(f"discrete walk needs a 4-regular graph, got degree {graph.degree}")
    return graph.adjacency() / 4.0


def psi_minus(n: int, q: int, r: int) -> np.ndarray:
    v = np.zeros(n)
    v[q], v[r] = 1 / SQRT2, -1 / SQRT2
    return v


@dataclass(frozen=True)
class WalkInstance:
    graph: Graph = field(repr=False)
    q: int
    r: int
    mu: float
    a_const: float
    b_const: float
    t_query: float
    automorphism: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self):
        vals = (self.mu, self.a_const, self.b_const, self.a_const - self.b_const, self.t_query)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise SpecwalkError("need mu > 0, T > 0 and 0 < b < a")
        if not self.automorphism:
            if self.q // 2 == self.r // 2 and self.q != self.r:
                object.__setattr__(self, "automorphism",
                                   tuple(v ^ 1 for v in range(self.graph.n_vertices)))
            else:
                raise SpecwalkError("an automorphism exchanging q and r must be supplied")

    @property
    def degree(self) -> int:
        return self.graph.degree

    @property
    def laplacian(self) -> np.ndarray:
        return laplacian_of(self.graph)

    @property
    def accept_level(self) -> float:
        return self.a_const * math.exp(-self.mu * self.t_query)

    @property
    def reject_level(self) -> float:
        return self.b_const * math.exp(-self.mu * self.t_query)


def walk_spectrum(graph: Graph) -> EigenSystem:
    return eig(laplacian_of(graph))


def c_exact(instance: WalkInstance, t: float, route: str = "expm") -> float:
    """``c_qr(t)`` from the matrix exponential or, with ``route="spectral"``,
    as ``⟨ψ⁻|e^{-Lt}|ψ⁻⟩``."""
    if t < 0:
        raise SpecwalkError("t must be nonnegative")
    if route == "expm":
        e = scipy.linalg.expm(-t * instance.laplacian.astype(float))
        return float(e[instance.q, instance.q] - e[instance.q, instance.r])
    if route == "spectral":
        return c_from_spectrum(walk_spectrum(instance.graph), instance.q, instance.r, t)
    raise SpecwalkError(f"unknown route {route!r}")


def c_from_spectrum(es: EigenSystem, q: int, r: int, t) -> np.ndarray | float:
    amp = (es.eigenvectors[q] - es.eigenvectors[r]) ** 2 / 2.0
    t = np.asarray(t, dtype=float)
    out = np.exp(-np.multiply.outer(t, es.eigenvalues)) @ amp
    return float(out) if out.ndim == 0 else out


def decay_measure(es: EigenSystem, q: int, r: int):
    """Spectral measure of ``ψ⁻`` with respect to ``L``."""
    return project_state(es, psi_minus(es.dimension, q, r))


@dataclass(frozen=True)
class HardnessParameters:
    clock_size: int
    spectral_top: float
    mu: float
    nu: float
    t_star: float
    accept_threshold: float
    reject_threshold: float

    def lower_envelope(self, alpha0_sq: float) -> Callable[[float], float]:
        """``(|α₀|²/M)·e^{-μt}``."""
        w = alpha0_sq / self.clock_size
        return lambda t: w * np.exp(-self.mu * np.asarray(t, dtype=float))

    def upper_envelope(self, alpha0_sq: float) -> Callable[[float], float]:
        """``(|α₀|²/M)·e^{-μt} + e^{-νt}``."""
        low = self.lower_envelope(alpha0_sq)
        return lambda t: low(t) + np.exp(-self.nu * np.asarray(t, dtype=float))

    def as_dict(self) -> dict:
        return {"M": self.clock_size, "spectral_top": self.spectral_top, "mu": self.mu,
                "nu": self.nu, "T": self.t_star, "accept_threshold": self.accept_threshold,
                "reject_threshold": self.reject_threshold}


def hardness_parameters(m_gates: int, spectral_top: float = SQRT2) -> HardnessParameters:
    """``μ = 4 − s``, ``ν = 4 − s·cos(π/M)``, ``T = ln(6M)/(ν − μ)``.

    ``s`` is the top of the spectrum seen by the start state; ``√2`` by
    default, ``2√2`` for the integer clock matrices used to build graphs.
    """
    if m_gates < 3:
        raise SpecwalkError("M must be at least 3")
    mu = 4.0 - spectral_top
    nu = 4.0 - spectral_top * math.cos(math.pi / m_gates)
    t_star = math.log(6 * m_gates) / (nu - mu)
    return HardnessParameters(m_gates, spectral_top, mu, nu, t_star,
                              1.0 / (2 * m_gates), 2.0 / (3 * m_gates))


@dataclass(frozen=True)
class DecayResult:
    decision: DecayDecision
    method: str
    c_value: float
    accept_level: float
    reject_level: float
    min_support: float | None = None
    estimate: ExpectationEstimate | None = None

    def as_dict(self) -> dict:
        out = {"decision": self.decision.value, "method": self.method, "c": self.c_value,
               "accept_level": self.accept_level, "reject_level": self.reject_level}
        if self.min_support is not None:
            out["min_support"] = self.min_support
        if self.estimate is not None:
            out["estimator"] = self.estimate.as_dict()
        return out



def gershgorin_bound(lap: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(lap), axis=1))) if lap.size else 0.0


def decide_decay(instance: WalkInstance, method: str = "exact", alpha: float = 0.05,
                 seed: int = 0, norm_bound: str | float = "2d",
                 spectrum: EigenSystem | None = None) -> DecayResult:
    """Decide ``c_qr(T) ≥ a·e^{-μT}`` (GE_a) versus ``≤ b·e^{-μT}`` (LE_b).

    Exact mode checks the promise: the spectral support of ``ψ⁻`` must lie in
    ``[μ, ∞)`` and ``c_qr(T)`` must not fall strictly between the levels.
    ``quantum-sim`` measures ``f(x) = e^{-xβT}`` on ``ψ⁻`` for ``L/β`` and
    compares against the midpoint of the two levels; it cannot see promise
    violations.  ``norm_bound`` is ``"2d"``, ``"gershgorin"`` or a number.
    """
    inst = instance
    check_exchange(inst.graph, inst.q, inst.r, inst.automorphism)
    hi, lo = inst.accept_level, inst.reject_level
    if method == "exact":
        es = spectrum if spectrum is not None else walk_spectrum(inst.graph)
        measure = decay_measure(es, inst.q, inst.r)
        min_support = float(measure.values.min()) if len(measure.values) else math.inf
        c = float(c_from_spectrum(es, inst.q, inst.r, inst.t_query))
        if min_support < inst.mu - SUPPORT_ATOL:
            dec = DecayDecision.PROMISE_VIOLATED
        elif c >= hi:
            dec = DecayDecision.GE_A
        elif c <= lo:
            dec = DecayDecision.LE_B
        else:
            dec = DecayDecision.PROMISE_VIOLATED
        return DecayResult(dec, method, c, hi, lo, min_support=min_support)
    if method != "quantum-sim":
        raise SpecwalkError(f"unknown method {method!r}")
    lap = inst.laplacian.astype(float)
    if norm_bound == "2d":
        beta = 2.0 * inst.degree
    elif norm_bound == "gershgorin":
        beta = gershgorin_bound(lap)
    else:
        beta = float(norm_bound)
    f = decay_function(beta * inst.t_query, inst.mu / beta)
    # ε(‖f‖∞ + K) = ε·e^{-μT}(1 + βT) must stay below half the gap
    eps = 0.99 * (inst.a_const - inst.b_const) / (2.0 * (1.0 + beta * inst.t_query))
    eps = min(eps, 0.99)
    psi = psi_minus(inst.graph.n_vertices, inst.q, inst.r)
    est = estimate_expectation(lap / beta, psi, f, eps, alpha, rng_seed=seed)
    dec = DecayDecision.GE_A if est.estimate >= (hi + lo) / 2.0 else DecayDecision.LE_B
    return DecayResult(dec, method, est.estimate, hi, lo, estimate=est)


def clock_walk_instance(y: GateCircuit, negate: bool = False, params: HardnessParameters | None = None):
    """Gadget-graph walk instance for circuit ``y`` (lowered clock, degree 4)."""
    clock = build_clock_hermitian(build_u_circuit(y, lowered=True, negate=negate))
    graph = signed_to_adjacency(clock.a_matrix)
    hp = params or hardness_parameters(clock.clock_size, CLOCK_SCALE)
    j = clock.start_index
    inst = WalkInstance(graph, 2 * j, 2 * j + 1, hp.mu, hp.reject_threshold,
                        hp.accept_threshold, hp.t_star)
    return clock, inst, hp


def verify_decay_reduction(y: GateCircuit, n_times: int = 20, negate: bool = False) -> dict:
    """Check ``c_qr(t) = ⟨j|e^{-(4I − A)t}|j⟩`` and the two envelopes.

    ``A`` is the integer clock matrix, whose top eigenvalue is ``2√2``; the
    hardness parameters are taken at that spectral top.
    """
    clock, inst, hp = clock_walk_instance(y, negate)
    if inst.degree != 4:
        raise SpecwalkError(f"gadget graph has degree {inst.degree}, expected 4")
    a = materialize(clock.a_matrix).astype(float)
    j = clock.start_index
    ts = np.linspace(0.0, 1.5 * hp.t_star, n_times)
    es = walk_spectrum(inst.graph)
    c_graph = c_from_spectrum(es, inst.q, inst.r, ts)
    lap_a = 4.0 * np.eye(a.shape[0]) - a
    c_clock = np.array([scipy.linalg.expm(-t * lap_a)[j, j] for t in ts])
    identity_dev = float(np.max(np.abs(c_graph - c_clock)))
    alpha1_sq = acceptance_probability(y)
    # weight on the top eigenvalue is P^(0)'s share, which the −σz variant hands to α₁
    alpha0_sq = alpha1_sq if negate else 1.0 - alpha1_sq
    low, up = hp.lower_envelope(alpha0_sq)(ts), hp.upper_envelope(alpha0_sq)(ts)
    tol = 1e-9
    lower_ok = bool(np.all(c_graph >= low - tol))
    upper_ok = bool(np.all(c_graph <= up + tol))
    c_t = float(c_from_spectrum(es, inst.q, inst.r, hp.t_star))
    decay = math.exp(-hp.mu * hp.t_star)
    report = {
        "M": hp.clock_size, "alpha1_sq": alpha1_sq, "alpha0_sq": alpha0_sq,
        "parameters": hp.as_dict(), "identity_max_deviation": identity_dev,
        "identity_ok": identity_dev <= 1e-9, "lower_envelope_ok": lower_ok,
        "upper_envelope_ok": upper_ok, "c_T": c_t,
        "accept_level": hp.accept_threshold * decay, "reject_level": hp.reject_threshold * decay,
    }
    if alpha0_sq <= 1.0 / 3.0 + 1e-12:
        report["separation_ok"] = c_t <= hp.accept_threshold * decay + tol
    elif alpha0_sq >= 2.0 / 3.0 - 1e-12:
        report["separation_ok"] = c_t >= hp.reject_threshold * decay - tol
    failures = [k for k in ("identity_ok", "lower_envelope_ok", "upper_envelope_ok", "separation_ok")
                if report.get(k) is False]
    if failures:
        raise SpecwalkError(f"decay reduction check failed: {failures}")
    return report


def decay_sweep(instance: WalkInstance, times: Sequence[float],
                spectrum: EigenSystem | None = None) -> list[tuple[float, float, float, float]]:
    """Rows ``(t, c, lower, upper)``: the envelopes come from the two lowest
    support points of ``ψ⁻``'s measure, ``w₁e^{-λ₁t}`` and ``w₁e^{-λ₁t} + (1−w₁)e^{-λ₂t}``."""
    es = spectrum if spectrum is not None else walk_spectrum(instance.graph)
    measure = decay_measure(es, instance.q, instance.r)
    lam1, w1 = float(measure.values[0]), float(measure.weights[0])
    lam2 = float(measure.values[1]) if len(measure.values) > 1 else lam1
    ts = np.asarray(times, dtype=float)
    c = c_from_spectrum(es, instance.q, instance.r, ts)
    low = w1 * np.exp(-lam1 * ts)
    up = low + (1.0 - w1) * np.exp(-lam2 * ts)
    return [(float(t), float(ci), float(lo), float(hi)) for t, ci, lo, hi in zip(ts, np.atleast_1d(c), low, up)]


def doubly_stochastic_deviation(graph: Graph, t: float) -> float:
    """Largest deviation of row/column sums of ``e^{-Lt}`` from 1 (and negativity)."""
    e = scipy.linalg.expm(-t * laplacian_of(graph).astype(float))
    dev = max(np.max(np.abs(e.sum(axis=0) - 1)), np.max(np.abs(e.sum(axis=1) - 1)))
    return float(max(dev, -min(np.min(e), 0.0)))


def k2_graph() -> Graph:
    return Graph.from_lists([[1], [0]])
