import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import clock_suite, deterministic_circuits, random_circuit
from specwalk.circuits import (
    CLOCK_SCALE,
    Gate,
    GateCircuit,
    acceptance_probability,
    analytic_measure,
    analytic_moment,
    build_clock_hermitian,
    build_u_circuit,
    dumps_circuit,
    loads_circuit,
    not_gate,
    row_structure_report,
)
from specwalk.errors import FormatError, GateSetError
from specwalk.linalg_core import basis_state, eig, materialize, matrix_power, project_state

H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


def dense_gate(g: Gate, width: int) -> np.ndarray:
    n = 1 << width
    out = np.zeros((n, n))
    for i in range(n):
        out[:, i] = g.apply(basis_state(n, i), width)
    return out


def test_gate_rows_match_dense_action():
    width = 3
    for g in [Gate("h", 1), Gate("ht", 0, (1, 2)), Gate("th", 2, (0, 1)), Gate("z", 0)]:
        d = dense_gate(g, width)
        for i in range(1 << width):
            row = {c: s * g.amplitude for c, s in g.row(i, width)}
            expect = {c: v for c, v in enumerate(d[i]) if abs(v) > 1e-12}
            assert row.keys() == expect.keys()
            assert all(abs(row[c] - expect[c]) < 1e-12 for c in row)
        assert np.allclose(dense_gate(g.adjoint(), width) @ d, np.eye(1 << width))


def test_hadamard_toffoli_is_toffoli_then_h():
    d = dense_gate(Gate("ht", 0, (1, 2)), 3)
    tof = np.eye(8)[[0, 1, 2, 7, 4, 5, 6, 3]]
    assert np.allclose(d, np.kron(H, np.eye(4)) @ tof)


def test_acceptance_probability_examples():
    assert acceptance_probability(GateCircuit(1, [], "0")) == 0
    assert abs(acceptance_probability(GateCircuit(1, [Gate("h", 0)])) - 0.5) < 1e-12
    assert abs(acceptance_probability(GateCircuit(3, not_gate(0, (1, 2)), "", (1, 2))) - 1) < 1e-12


def test_build_u_circuit_structure():
    y = GateCircuit(1, [Gate("h", 0)])
    u = build_u_circuit(y)
    assert [g.kind for g in u.gates] == ["h", "z", "h"]
    y = random_circuit(3, 5, seed=3)
    u = build_u_circuit(y)
    assert len(u) == 11
    assert list(u.gates[6:]) == [g.adjoint() for g in reversed(y.gates)]
    with pytest.raises(GateSetError):
        build_u_circuit(GateCircuit(1, [Gate("z", 0)]))


@pytest.mark.parametrize("negate", [False, True])
def test_lowered_reflection_acts_as_z(negate):
    u = build_u_circuit(GateCircuit(1, [Gate("h", 0), Gate("h", 0)]), lowered=True, negate=negate)
    sign = -1 if negate else 1
    for b in (0, 1):
        state = basis_state(u.dimension, u.start_index() | (b << (u.width - 1)))
        out = u.apply(state)
        assert np.allclose(out, sign * (-1) ** b * state)


def test_small_clock_rows():
    u = build_u_circuit(GateCircuit(1, [Gate("h", 0)]))
    clock = build_clock_hermitian(u)
    assert clock.dimension == 6
    a = materialize(clock.a_matrix)
    assert (a == a.T).all()
    # rows next to the σz gate carry ±√2 and only three entries
    report = row_structure_report(clock)
    assert not report["holds"]
    lowered = build_clock_hermitian(build_u_circuit(GateCircuit(1, [Gate("h", 0)]), lowered=True))
    assert row_structure_report(lowered)["holds"]


@pytest.mark.parametrize("name,y", clock_suite())
def test_lowered_rows_have_four_unit_entries(name, y):
    clock = build_clock_hermitian(build_u_circuit(y, lowered=True))
    assert row_structure_report(clock)["holds"], name


def test_analytic_measure_examples():
    m = analytic_measure(3, 0.0).measure().compact()
    assert np.allclose(sorted(zip(m.values, m.weights)), [(-0.5, 2 / 3), (1.0, 1 / 3)])
    m = analytic_measure(3, 1.0).measure().compact()
    assert np.allclose(sorted(zip(m.values, m.weights)), [(-1.0, 1 / 3), (0.5, 2 / 3)])
    assert analytic_moment(analytic_measure(3, 0.0), 0) == pytest.approx(1)
    assert analytic_moment(analytic_measure(3, 0.0), 2) == pytest.approx(0.5)
    assert analytic_moment(analytic_measure(3, 1.0), 1) == pytest.approx(0, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 40), st.floats(0, 1))
def test_analytic_measure_normalized_and_reflected(m, a1):
    meas = analytic_measure(m, a1)
    assert meas.total == pytest.approx(1, abs=1e-12)
    if m % 2:
        p0 = analytic_measure(m, 0.0).measure().compact()
        p1 = analytic_measure(m, 1.0).measure().compact()
        assert np.allclose(np.sort(-p0.values), np.sort(p1.values))
        assert np.allclose(np.sort(p0.weights), np.sort(p1.weights))


@pytest.mark.parametrize("name,y", clock_suite())
@pytest.mark.parametrize("lowered", [False, True])
def test_clock_measure_matches_closed_form(name, y, lowered):
    clock = build_clock_hermitian(build_u_circuit(y, lowered=lowered))
    a = materialize(clock.a_matrix).astype(float) / clock.scale
    got = project_state(eig(a), basis_state(clock.dimension, clock.start_index))
    want = clock.expected_measure(acceptance_probability(y)).measure()
    dv, dw = got.max_deviation(want, atol=1e-10)
    assert dv <= 1e-8 and dw <= 1e-8, name


@pytest.mark.parametrize("name,y", deterministic_circuits())
def test_orbit_periodicity(name, y):
    u = build_u_circuit(y, lowered=True)
    clock = build_clock_hermitian(u)
    state = basis_state(clock.dimension, clock.start_index)
    out = state
    for _ in range(clock.clock_size):
        out = clock.apply_w(out)
    sign = 1 if acceptance_probability(y) < 0.5 else -1
    assert np.allclose(out, sign * state), name


def test_negated_clock_swaps_roles():
    y = GateCircuit(3, not_gate(0, (1, 2)), "", (1, 2))
    clock = build_clock_hermitian(build_u_circuit(y, lowered=True, negate=True))
    a = materialize(clock.a_matrix).astype(float)
    got = project_state(eig(a), basis_state(clock.dimension, clock.start_index))
    assert np.isclose(got.values.max(), CLOCK_SCALE)


@pytest.mark.parametrize("name,y", clock_suite()[:8])
def test_moments(name, y):
    clock = build_clock_hermitian(build_u_circuit(y, lowered=True))
    a = materialize(clock.a_matrix)
    meas = clock.expected_measure(acceptance_probability(y))
    j = clock.start_index
    for m in range(13):
        lhs = int(matrix_power(a, m)[j, j])
        rhs = CLOCK_SCALE ** m * analytic_moment(meas, m)
        assert abs(lhs - rhs) <= 1e-7 * max(1.0, abs(rhs)), (name, m)


def test_circuit_text_round_trip():
    y = GateCircuit(4, [Gate("h", 1), Gate("ht", 0, (1, 2)), Gate("th", 1, (0, 3))], "01", (2, 3))
    text = dumps_circuit(y)
    assert loads_circuit(text) == y
    assert text.startswith("circuit 4 01\nones 2 3\n")
    for bad in ["", "circuit x -", "circuit 2 -\ncnot 0 1", "circuit 1 -\nh 3"]:
        with pytest.raises(FormatError):
            loads_circuit(bad)


def test_all_two_gate_words_on_three_wires():
    kinds = [Gate("h", t) for t in range(3)] + [
        Gate(k, t, tuple(c for c in range(3) if c != t)) for k in ("ht", "th") for t in range(3)]
    for g1, g2 in itertools.product(kinds, repeat=2):
        y = GateCircuit(3, [g1, g2])
        clock = build_clock_hermitian(build_u_circuit(y, lowered=True))
        a = materialize(clock.a_matrix).astype(float) / clock.scale
        got = project_state(eig(a), basis_state(clock.dimension, clock.start_index))
        want = clock.expected_measure(acceptance_probability(y)).measure()
        dv, dw = got.max_deviation(want, atol=1e-10)
        assert clock.clock_size == 6 and dv <= 1e-8 and dw <= 1e-8
