"""Shared instance suites: small verifier circuits and regular graphs."""

from __future__ import annotations

import numpy as np
import pytest

from specwalk.circuits import Gate, GateCircuit, not_gate, toffoli
from specwalk.graph_gadget import Graph


def random_circuit(width: int, n_gates: int, seed: int) -> GateCircuit:
    """Random word over {h, ht, th} on ``width`` wires (no constant-one wires)."""
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(n_gates):
        kind = ["h", "ht", "th"][rng.integers(3)] if width >= 3 else "h"
        if kind == "h":
            gates.append(Gate("h", int(rng.integers(width))))
        else:
            t, c1, c2 = rng.choice(width, size=3, replace=False)
            gates.append(Gate(kind, int(t), (int(c1), int(c2))))
    return GateCircuit(width, gates)


def deterministic_circuits() -> list[tuple[str, GateCircuit]]:
    """Circuits whose acceptance probability is exactly 0 or 1."""
    out = []
    for k in (1, 2, 3):
        out.append((f"idle{k}-reject", GateCircuit(2, [Gate("h", 1)] * k, "0")))
        out.append((f"idle{k}-accept", GateCircuit(2, [Gate("h", 1)] * k, "1")))
    out.append(("not-accept", GateCircuit(3, not_gate(0, (1, 2)), "", (1, 2))))
    out.append(("cnot-reject", GateCircuit(4, toffoli(1, 2, 0), "0", (2, 3))))
    out.append(("cnot-accept", GateCircuit(4, toffoli(1, 2, 0), "01", (2, 3))))
    return out


def clock_suite() -> list[tuple[str, GateCircuit]]:
    """Verifier circuits ``Y`` whose literal and lowered clocks fit width ≤ 6, M ≤ 15."""
    suite = deterministic_circuits()
    suite.append(("hadamard", GateCircuit(1, [Gate("h", 0)])))
    suite.append(("hadamard-input", GateCircuit(2, [Gate("h", 0), Gate("h", 1)], "1")))
    seed = 0
    for width in (1, 2, 3, 4):
        for n_gates in (1, 3, 6):
            suite.append((f"random-w{width}-k{n_gates}", random_circuit(width, n_gates, seed)))
            seed += 1
    return suite


def complete_graph(n: int) -> Graph:
    return Graph.from_lists([[u for u in range(n) if u != v] for v in range(n)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_lists([[(v - 1) % n, (v + 1) % n] for v in range(n)])


# -- witness verifier families ---------------------------------------------

def verifier(w: int, gates_for) -> tuple[GateCircuit, tuple[int, ...]]:
    """Witness on wires 1..w, constant-one wires after them, output on wire 0."""
    ones = (w + 1, w + 2)
    wires = tuple(range(1, w + 1))
    return GateCircuit(w + 3, gates_for(wires, ones), "", ones), wires


def copy_bit(i):
    return lambda wires, ones: toffoli(wires[i], ones[0], 0)


def and_bits(i, k):
    return lambda wires, ones: toffoli(wires[i], wires[k], 0)


def negated_bit(i):
    return lambda wires, ones: not_gate(wires[i], ones) + toffoli(wires[i], ones[0], 0)


def idle(wires, ones):
    return [Gate("h", wires[0]), Gate("h", wires[0])]


FAMILIES = [
    ("copy-1of1", 1, copy_bit(0)),
    ("idle-1", 1, idle),
    ("negated-1of2", 2, negated_bit(1)),
    ("and-2", 2, and_bits(0, 1)),
    ("copy-3of3", 3, copy_bit(2)),
    ("idle-3", 3, idle),
    ("and-4", 4, and_bits(1, 3)),
]


@pytest.fixture(scope="session")
def suite():
    return clock_suite()


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
