import math

import numpy as np
import pytest

from conftest import complete_graph, cycle_graph, deterministic_circuits
from specwalk.circuits import CLOCK_SCALE, Gate, GateCircuit
from specwalk.errors import SpecwalkError
from specwalk.graph_gadget import Graph, path_difference_exact
from specwalk.random_walks import (
    DecayDecision,
    WalkInstance,
    c_exact,
    clock_walk_instance,
    decay_sweep,
    decide_decay,
    discrete_walk_matrix,
    doubly_stochastic_deviation,
    hardness_parameters,
    k2_graph,
    laplacian_of,
    verify_decay_reduction,
)


def test_laplacian_examples():
    assert laplacian_of(k2_graph()).tolist() == [[1, -1], [-1, 1]]
    l5 = laplacian_of(complete_graph(5))
    assert (np.diag(l5) == 4).all() and (l5.sum(axis=1) == 0).all()
    assert l5[0, 1] == -1


def test_laplacian_with_self_loops_has_zero_row_sums():
    g = Graph.from_lists([[0, 1], [0, 1]])
    assert (laplacian_of(g).sum(axis=1) == 0).all()


def test_c_exact_on_k2():
    inst = WalkInstance(k2_graph(), 0, 1, 2.0, 0.9, 0.5, 1.0)
    for t in np.linspace(0, 5, 11):
        assert c_exact(inst, t) == pytest.approx(math.exp(-2 * t), abs=1e-12)
    assert c_exact(inst, 0) == pytest.approx(1)


@pytest.mark.parametrize("graph,perm", [
    (complete_graph(5), (1, 0, 2, 3, 4)),
    (cycle_graph(7), tuple((1 - v) % 7 for v in range(7))),
])
def test_two_routes_agree(graph, perm):
    inst = WalkInstance(graph, 0, 1, 0.5, 0.9, 0.5, 1.0, perm)
    for t in (0.0, 0.3, 1.7, 4.0):
        assert abs(c_exact(inst, t) - c_exact(inst, t, "spectral")) <= 1e-10


def test_discrete_walk_matrix():
    a = discrete_walk_matrix(complete_graph(5))
    assert np.allclose(a.sum(axis=0), 1, atol=1e-12) and np.allclose(a.sum(axis=1), 1, atol=1e-12)
    k5 = complete_graph(5)
    for m in range(6):
        am = np.linalg.matrix_power(a, m)
        assert am[0, 0] - am[0, 1] == pytest.approx(path_difference_exact(k5, 0, 1, m) / 4 ** m)
    far = np.linalg.matrix_power(a, 60)
    assert abs(far[0, 0] - far[0, 1]) < 1e-12
    with pytest.raises(SpecwalkError):
        discrete_walk_matrix(cycle_graph(5))


def test_hardness_parameters_examples():
    hp = hardness_parameters(9)
    assert hp.mu == pytest.approx(2.585786, abs=1e-6)
    assert hp.nu == pytest.approx(2.671074, abs=1e-6)
    assert hp.t_star == pytest.approx(46.77, abs=0.01)
    hp3 = hardness_parameters(3)
    assert hp3.nu - hp3.mu == pytest.approx(math.sqrt(2) / 2)
    for m in (3, 5, 7, 9, 15):
        hp = hardness_parameters(m)
        assert hp.reject_threshold - hp.accept_threshold == pytest.approx(1 / (6 * m))
        assert hp.nu - hp.mu == pytest.approx(math.sqrt(2) * (1 - math.cos(math.pi / m)))
    ts = [hardness_parameters(m).t_star for m in (3, 5, 7, 9, 15)]
    assert ts == sorted(ts)
    with pytest.raises(SpecwalkError):
        hardness_parameters(2)


def test_envelopes_at_t_star():
    hp = hardness_parameters(7, CLOCK_SCALE)
    decay = math.exp(-hp.mu * hp.t_star)
    # e^{-νT} = e^{-μT}/(6M) by the choice of T
    assert hp.upper_envelope(0.0)(hp.t_star) == pytest.approx(decay / (6 * 7))
    assert hp.lower_envelope(1.0)(hp.t_star) == pytest.approx(decay / 7)


def test_decide_decay_k2():
    inst = WalkInstance(k2_graph(), 0, 1, 2.0, 0.9, 0.5, 1.0)
    assert decide_decay(inst).decision is DecayDecision.GE_A
    assert decide_decay(inst, "quantum-sim", seed=1).decision is DecayDecision.GE_A


def test_decide_decay_promise_violation():
    inst = WalkInstance(k2_graph(), 0, 1, 3.0, 0.9, 0.5, 1.0)
    res = decide_decay(inst)
    assert res.decision is DecayDecision.PROMISE_VIOLATED
    assert res.min_support == pytest.approx(2)


@pytest.mark.parametrize("name,y", deterministic_circuits())
def test_clock_instances_land_on_the_right_side(name, y):
    _, inst, _ = clock_walk_instance(y)
    res = decide_decay(inst)
    accepts = name.endswith("accept")
    assert res.decision is (DecayDecision.LE_B if accepts else DecayDecision.GE_A), name


@pytest.mark.parametrize("name,y", deterministic_circuits()[:4] + [
    ("hadamard", GateCircuit(1, [Gate("h", 0)]))])
@pytest.mark.parametrize("negate", [False, True])
def test_verify_decay_reduction(name, y, negate):
    rep = verify_decay_reduction(y, negate=negate)
    assert rep["identity_ok"] and rep["lower_envelope_ok"] and rep["upper_envelope_ok"]
    if rep["alpha0_sq"] > 0.99:
        assert rep["c_T"] >= math.exp(-rep["parameters"]["mu"] * rep["parameters"]["T"]) / rep["M"] - 1e-12
    if rep["alpha0_sq"] < 0.01:
        assert rep["c_T"] <= math.exp(-rep["parameters"]["nu"] * rep["parameters"]["T"]) + 1e-12


def test_sweep_envelopes_sandwich():
    _, inst, _ = clock_walk_instance(GateCircuit(1, [Gate("h", 0)]))
    rows = decay_sweep(inst, np.linspace(0, 20, 41))
    for t, c, lo, hi in rows:
        assert lo - 1e-12 <= c <= hi + 1e-12
    cs = [r[1] for r in rows]
    assert all(c > 0 for c in cs) and cs == sorted(cs, reverse=True)


@pytest.mark.parametrize("graph", [k2_graph(), complete_graph(5), cycle_graph(6)])
def test_heat_kernel_doubly_stochastic(graph):
    for t in (0.0, 0.5, 2.0, 10.0):
        assert doubly_stochastic_deviation(graph, t) <= 1e-9


def test_instance_validation():
    with pytest.raises(SpecwalkError):
        WalkInstance(k2_graph(), 0, 1, 1.0, 0.4, 0.5, 1.0)
    with pytest.raises(SpecwalkError):
        WalkInstance(complete_graph(5), 0, 2, 1.0, 0.9, 0.5, 1.0)
