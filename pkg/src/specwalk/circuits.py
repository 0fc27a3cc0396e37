"""Gate circuits over {H, H∘Toffoli}, the clock unitary and its Hermitian part.

Qubit ``0`` is the most significant bit of a basis index and is the output
wire.  ``ht`` is a Toffoli followed by a Hadamard on the Toffoli target; its
adjoint ``th`` applies the Hadamard first.  Both have exactly two non-zero
entries ``±1/√2`` per row, like ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import CapExceededError, FormatError, GateSetError, SpecwalkError
from .linalg_core import SparseSymmetricMatrix, SpectralMeasure

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2
# √2·(W + W†): integer ±1 entries for Hadamard-type gates, spectrum 2√2·cos(·)
CLOCK_SCALE = 2.0 * SQRT2
STATEVECTOR_CAP_QUBITS = 20

HADAMARD_KINDS = ("h", "ht", "th")
GATE_KINDS = HADAMARD_KINDS + ("z",)
_ADJOINT = {"h": "h", "z": "z", "ht": "th", "th": "ht"}


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    controls: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise GateSetError(f"unknown gate kind {self.kind!r}")
        want = 2 if self.kind in ("ht", "th") else 0
        if len(self.controls) != want:
            raise GateSetError(f"gate {self.kind!r} takes {want} controls, got {len(self.controls)}")
        wires = (self.target,) + tuple(self.controls)
        if len(set(wires)) != len(wires):
            raise GateSetError(f"gate {self} uses a wire twice")
        if min(wires) < 0:
            raise GateSetError(f"negative wire index in {self}")

    @property
    def wires(self) -> tuple[int, ...]:
        return (self.target,) + tuple(self.controls)

    @property
    def amplitude(self) -> float:
        """Magnitude of every non-zero matrix entry."""
        return INV_SQRT2 if self.kind in HADAMARD_KINDS else 1.0

    def adjoint(self) -> "Gate":
        return Gate(_ADJOINT[self.kind], self.target, self.controls)

    def row(self, i: int, width: int) -> list[tuple[int, int]]:
        """Non-zero entries of row ``i`` as ``(column, sign)``; value = sign·amplitude."""
        tbit = 1 << (width - 1 - self.target)
        if self.kind == "z":
            return [(i, -1 if i & tbit else 1)]
        if self.kind == "h":
            lo = i & ~tbit
            return [(lo, 1), (lo | tbit, -1 if i & tbit else 1)]
        tof = _toffoli_map(self.controls, tbit, width)
        if self.kind == "ht":
            # (H_t · Tof)[i, j] = H[i_t, k_t] with k = tof(j)
            out = []
            for k in (i & ~tbit, i | tbit):
                sign = -1 if (i & tbit and k & tbit) else 1
                out.append((tof(k), sign))
            return sorted(out)
        # th: (Tof · H_t)[i, j] = H[k_t, j_t] with k = tof(i)
        k = tof(i)
        return [(k & ~tbit, 1), (k | tbit, -1 if k & tbit else 1)]

    def apply(self, state: np.ndarray, width: int) -> np.ndarray:
        """Apply to a statevector whose last axis has length ``2**width``."""
        if self.kind == "z":
            return state * _z_signs(self.target, width)
        if self.kind == "h":
            return _apply_h(state, self.target, width)
        perm = _toffoli_perm(self.controls, self.target, width)
        if self.kind == "ht":
            return _apply_h(state[..., perm], self.target, width)
        return _apply_h(state, self.target, width)[..., perm]

    def to_line(self) -> str:
        return " ".join([self.kind, *map(str, self.controls), str(self.target)])


def _toffoli_map(controls, tbit, width):
    cmask = sum(1 << (width - 1 - c) for c in controls)

    def tof(k):
        return k ^ tbit if (k & cmask) == cmask else k

    return tof


@lru_cache(maxsize=256)
def _toffoli_perm(controls, target, width):
    idx = np.arange(1 << width)
    cmask = sum(1 << (width - 1 - c) for c in controls)
    tbit = 1 << (width - 1 - target)
    return np.where((idx & cmask) == cmask, idx ^ tbit, idx)


@lru_cache(maxsize=256)
def _z_signs(target, width):
    idx = np.arange(1 << width)
    return np.where(idx & (1 << (width - 1 - target)), -1.0, 1.0)


def _apply_h(state, target, width):
    lead = state.shape[:-1]
    s = state.reshape(lead + (1 << target, 2, 1 << (width - 1 - target)))
    a0, a1 = s[..., 0, :], s[..., 1, :]
    out = np.stack(((a0 + a1) * INV_SQRT2, (a0 - a1) * INV_SQRT2), axis=-2)
    return out.reshape(state.shape)


@dataclass(frozen=True)
class GateCircuit:
    """Ordered gates on ``width`` qubits with the classical input ``x``.

    ``input_bits`` fixes wires ``0..r-1``; wires listed in ``ones`` start in
    ``|1⟩`` (constant-one resource); every other wire starts in ``|0⟩``.
    ``reflection_sign`` is set on circuits produced by :func:`build_u_circuit`.
    """

    width: int
    gates: tuple[Gate, ...]
    input_bits: str = ""
    ones: tuple[int, ...] = ()
    reflection_sign: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "ones", tuple(sorted(self.ones)))
        if self.width <= 0:
            raise SpecwalkError("circuit width must be positive")
        if set(self.input_bits) - {"0", "1"}:
            raise SpecwalkError(f"input bits must be a 0/1 string, got {self.input_bits!r}")
        if len(self.input_bits) > self.width:
            raise SpecwalkError("more input bits than wires")
        for w in self.ones:
            if not len(self.input_bits) <= w < self.width:
                raise SpecwalkError(f"constant-one wire {w} must lie after the input bits and inside the register")
        for g in self.gates:
            if max(g.wires) >= self.width:
                raise GateSetError(f"gate {g} exceeds register width {self.width}")

    def __len__(self):
        return len(self.gates)

    @property
    def dimension(self) -> int:
        return 1 << self.width

    def start_index(self) -> int:
        """Basis index of ``|x, 0⟩`` (with constant-one wires set)."""
        idx = 0
        for pos, b in enumerate(self.input_bits):
            if b == "1":
                idx |= 1 << (self.width - 1 - pos)
        for w in self.ones:
            idx |= 1 << (self.width - 1 - w)
        return idx

    def with_input(self, bits: str) -> "GateCircuit":
        return replace(self, input_bits=bits)

    def apply(self, state: np.ndarray) -> np.ndarray:
        for g in self.gates:
            state = g.apply(state, self.width)
        return state


def check_universal(y: GateCircuit) -> None:
    for g in y.gates:
        if g.kind not in HADAMARD_KINDS:
            raise GateSetError(f"gate {g.to_line()!r} is outside {{H, H∘Toffoli}}")
        if set(g.wires[:1]) & set(y.ones):
            raise GateSetError(f"gate {g.to_line()!r} targets constant-one wire {g.target}")


def output_state(y: GateCircuit, cap_qubits: int = STATEVECTOR_CAP_QUBITS) -> np.ndarray:
    if y.width > cap_qubits:
        raise CapExceededError(f"{y.width} qubits exceed the statevector cap {cap_qubits}")
    state = np.zeros(y.dimension)
    state[y.start_index()] = 1.0
    return y.apply(state)


def acceptance_probability(y: GateCircuit, cap_qubits: int = STATEVECTOR_CAP_QUBITS) -> float:
    """``|α_1|²``: probability that the output wire reads 1 after ``Y|x, 0⟩``."""
    out = output_state(y, cap_qubits)
    half = y.dimension // 2
    return float(np.sum(np.abs(out[half:]) ** 2))


# Reflection words on the output wire, valid when the two helper wires hold |1⟩.
# With T = ht(h1, h2, 0) acting as H·X:  σz = T·H  and  −σz = H·T³.
def _reflection_word(sign: int, helpers: tuple[int, int]) -> list[Gate]:
    t = Gate("ht", 0, helpers)
    if sign > 0:
        return [Gate("h", 0), t]
    return [t, t, t, Gate("h", 0)]


def build_u_circuit(y: GateCircuit, lowered: bool = False, negate: bool = False) -> GateCircuit:
    """``Y``, then a reflection on the output wire, then ``Y†`` gate by gate.

    The literal form inserts a single ``z`` gate, giving ``2k+1`` gates.  With
    ``lowered=True`` the reflection is written in the Hadamard gate set using
    two constant-one helper wires (reused from ``y.ones`` or appended), so
    every gate has two non-zero entries per row; the gate count is then even.
    ``negate=True`` (lowered only) uses ``−σz``, swapping the roles of the
    accept and reject amplitudes.
    """
    check_universal(y)
    tail = [g.adjoint() for g in reversed(y.gates)]
    if not lowered:
        if negate:
            raise GateSetError("the negated reflection is only available in lowered form")
        return GateCircuit(y.width, y.gates + (Gate("z", 0),) + tuple(tail),
                           y.input_bits, y.ones, reflection_sign=1)
    width, ones = y.width, tuple(y.ones)
    if len(ones) < 2:
        extra = tuple(range(width, width + 2 - len(ones)))
        width += len(extra)
        ones = ones + extra
    helpers = (ones[0], ones[1])
    sign = -1 if negate else 1
    gates = y.gates + tuple(_reflection_word(sign, helpers)) + tuple(tail)
    return GateCircuit(width, gates, y.input_bits, ones, reflection_sign=sign)


@dataclass(frozen=True)
class ClockHermitian:
    """``√2·(W + W†)`` for ``W = Σ_l |l+1⟩⟨l| ⊗ U_l`` with its start index.

    ``scale`` converts to the unit-normalized ``½(W + W†)``:
    ``a_matrix = scale · ½(W + W†)``.
    """

    u: GateCircuit = field(repr=False)
    clock_size: int
    system_dim: int
    a_matrix: SparseSymmetricMatrix = field(repr=False)
    start_index: int
    scale: float = CLOCK_SCALE

    @property
    def dimension(self) -> int:
        return self.clock_size * self.system_dim

    @property
    def reflection_sign(self) -> int:
        return self.u.reflection_sign or 1

    def expected_measure(self, alpha1_sq: float) -> "AnalyticSpectralMeasure":
        """Closed-form measure at the start state given ``|α_1|²`` of the original circuit."""
        plus = alpha1_sq if self.reflection_sign < 0 else 1.0 - alpha1_sq
        return analytic_measure(self.clock_size, 1.0 - plus)

    def apply_w(self, state: np.ndarray) -> np.ndarray:
        """Apply the clock unitary to a state of shape ``(M·Ñ,)``."""
        m, n = self.clock_size, self.system_dim
        s = np.asarray(state).reshape(m, n)
        out = np.empty_like(s, dtype=np.result_type(s.dtype, float))
        for l, g in enumerate(self.u.gates):
            out[(l + 1) % m] = g.apply(s[l], self.u.width)
        return out.ravel()


def build_clock_hermitian(u: GateCircuit) -> ClockHermitian:
    """Lazily evaluated clock Hermitian for the gate sequence ``u``.

    Row ``(l, i)`` (global index ``l·Ñ + i``) collects row ``i`` of ``U_{l-1}``
    at clock ``l-1`` and row ``i`` of ``U_l†`` at clock ``l+1``.  Hadamard-type
    gates contribute integer entries ``±1``, a ``z`` gate contributes ``±√2``.
    """
    m = len(u.gates)
    if m < 3:
        raise SpecwalkError("the clock construction needs at least 3 gates")
    n = u.dimension
    width = u.width
    gates = u.gates
    adjoints = tuple(g.adjoint() for g in gates)

    def value(g: Gate, sign: int):
        return sign if g.kind in HADAMARD_KINDS else sign * SQRT2

    @lru_cache(maxsize=None)
    def row(idx: int):
        l, i = divmod(idx, n)
        prev = gates[(l - 1) % m]
        entries = [(((l - 1) % m) * n + k, value(prev, s)) for k, s in prev.row(i, width)]
        nxt = adjoints[l]
        entries += [(((l + 1) % m) * n + k, value(nxt, s)) for k, s in nxt.row(i, width)]
        return tuple(sorted(entries))

    a = SparseSymmetricMatrix(m * n, row, 4, CLOCK_SCALE)
    return ClockHermitian(u, m, n, a, u.start_index())


def row_structure_report(clock: ClockHermitian, max_listed: int = 20) -> dict:
    """Check the "4 non-zero entries, all ±1" property row by row."""
    violations = []
    count = 0
    for idx in range(clock.dimension):
        r = clock.a_matrix.row(idx)
        ok = len(r) == 4 and all(isinstance(v, int) and abs(v) == 1 for _, v in r)
        if not ok:
            count += 1
            if len(violations) < max_listed:
                violations.append({"row": idx, "nonzeros": len(r),
                                   "values": [float(v) for _, v in r]})
    return {"rows_checked": clock.dimension, "violating_rows": count,
            "holds": count == 0, "examples": violations}


# -- closed-form spectral measure -----------------------------------------

@dataclass(frozen=True)
class AnalyticSpectralMeasure:
    """``P = |α_0|² P^(0) + |α_1|² P^(1)`` on the unit-normalized clock Hermitian."""

    clock_size: int
    alpha1_sq: float
    support0: np.ndarray
    weights0: np.ndarray
    support1: np.ndarray
    weights1: np.ndarray

    def measure(self) -> SpectralMeasure:
        values = np.concatenate([self.support0, self.support1])
        weights = np.concatenate([(1.0 - self.alpha1_sq) * self.weights0,
                                  self.alpha1_sq * self.weights1])
        order = np.argsort(values, kind="stable")
        return SpectralMeasure(values[order], weights[order])

    @property
    def total(self) -> float:
        return float((1.0 - self.alpha1_sq) * self.weights0.sum() + self.alpha1_sq * self.weights1.sum())


def analytic_measure(m_gates: int, alpha1_sq: float) -> AnalyticSpectralMeasure:
    """Closed-form spectral measure of ``½(W + W†)`` at the start state.

    For odd ``M``: ``P^(0)`` sits on ``cos(2πl/M)`` with weight ``1/M`` at
    ``l = 0`` and ``2/M`` for ``l = 1..(M-1)/2``; ``P^(1)`` on
    ``cos(π(2l+1)/M)`` with ``1/M`` at ``l = (M-1)/2`` and ``2/M`` below.
    Even ``M`` (lowered circuits) follows the same root-of-unity rule, which
    puts ``1/M`` at ``l = M/2`` in ``P^(0)`` and ``2/M`` on every ``P^(1)`` point.
    """
    if int(m_gates) != m_gates or m_gates < 3:
        raise SpecwalkError(f"clock size must be an integer >= 3, got {m_gates}")
    if not 0.0 <= alpha1_sq <= 1.0:
        raise SpecwalkError(f"alpha1_sq must lie in [0, 1], got {alpha1_sq}")
    m = int(m_gates)
    l0 = np.arange(m // 2 + 1)
    w0 = np.full(l0.size, 2.0 / m)
    w0[0] = 1.0 / m
    if m % 2 == 0:
        w0[-1] = 1.0 / m
    l1 = np.arange((m + 1) // 2)
    w1 = np.full(l1.size, 2.0 / m)
    if m % 2 == 1:
        w1[-1] = 1.0 / m
    return AnalyticSpectralMeasure(m, float(alpha1_sq),
                                   np.cos(2 * np.pi * l0 / m), w0,
                                   np.cos(np.pi * (2 * l1 + 1) / m), w1)


def analytic_moment(measure: AnalyticSpectralMeasure, m: int) -> float:
    """``Σ λ^m P(λ)`` on the unit-normalized measure."""
    if m < 0:
        raise SpecwalkError("moment order must be nonnegative")
    return ((1.0 - measure.alpha1_sq) * float(np.sum(measure.weights0 * measure.support0 ** m))
            + measure.alpha1_sq * float(np.sum(measure.weights1 * measure.support1 ** m)))


# -- text format -----------------------------------------------------------

def dumps_circuit(c: GateCircuit) -> str:
    lines = [f"circuit {c.width} {c.input_bits or '-'}"]
    if c.ones:
        lines.append("ones " + " ".join(map(str, c.ones)))
    lines += [g.to_line() for g in c.gates]
    return "\n".join(lines) + "\n"


def loads_circuit(text: str) -> GateCircuit:
    """Parse ``circuit <width> <input-bits>`` followed by gate lines.

    Gate lines: ``h <t>``, ``ht <c1> <c2> <t>``, ``th <c1> <c2> <t>``,
    ``z <t>``; an optional ``ones <w>...`` line lists constant-one wires.
    ``-`` stands for an empty input string.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise FormatError("empty circuit file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "circuit":
        raise FormatError(f"expected header 'circuit <width> <input-bits>', got {lines[0]!r}")
    try:
        width = int(head[1])
    except ValueError as exc:
        raise FormatError(f"bad width in {lines[0]!r}") from exc
    bits = "" if head[2] == "-" else head[2]
    ones: tuple[int, ...] = ()
    gates = []
    for ln in lines[1:]:
        parts = ln.split()
        try:
            args = tuple(int(p) for p in parts[1:])
        except ValueError as exc:
            raise FormatError(f"bad gate line {ln!r}") from exc
        if parts[0] == "ones":
            ones = args
            continue
        kind = parts[0]
        if kind in ("h", "z") and len(args) == 1:
            gates.append(Gate(kind, args[0]))
        elif kind in ("ht", "th") and len(args) == 3:
            gates.append(Gate(kind, args[2], args[:2]))
        else:
            raise FormatError(f"bad gate line {ln!r}")
    try:
        return GateCircuit(width, tuple(gates), bits, ones)
    except SpecwalkError as exc:
        raise FormatError(str(exc)) from exc


def load_circuit(path) -> GateCircuit:
    with open(path) as fh:
        return loads_circuit(fh.read())


def save_circuit(c: GateCircuit, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_circuit(c))


def not_gate(target: int, ones: tuple[int, int]) -> list[Gate]:
    """Classical NOT on ``target`` using two constant-one wires (Toffoli = H·HT)."""
    return [Gate("ht", target, ones), Gate("h", target)]


def toffoli(c1: int, c2: int, target: int) -> list[Gate]:
    return [Gate("ht", target, (c1, c2)), Gate("h", target)]
