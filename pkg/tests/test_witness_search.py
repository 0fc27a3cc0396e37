import numpy as np
import pytest

from conftest import FAMILIES, copy_bit, verifier
from specwalk.circuits import Gate, GateCircuit
from specwalk.errors import SpecwalkError
from specwalk.graph_gadget import Graph
from specwalk.witness_search import (
    Verdict,
    WitnessInstance,
    build_witness_instance,
    decide_witness,
    witness_acceptance,
)


@pytest.mark.parametrize("name,w,gates_for", FAMILIES)
def test_exists_iff_some_witness_accepts(name, w, gates_for):
    y, wires = verifier(w, gates_for)
    acc = witness_acceptance(y, wires)
    inst = build_witness_instance(y, wires)
    assert inst.n_tilde == 2 ** w
    res = decide_witness(inst)
    accepting = [j for j, p in enumerate(acc) if p >= 2 / 3]
    if accepting:
        assert res.verdict is Verdict.EXISTS and res.index == accepting[0], name
    else:
        assert res.verdict is Verdict.NONE, name
    # one-to-one: every pair's decision tracks its own witness
    for j, pair in enumerate(res.pairs):
        assert (pair.decision.value == "GE_a") == (acc[j] >= 2 / 3)


def test_smallest_family_has_two_pairs():
    y, wires = verifier(1, copy_bit(0))
    inst = build_witness_instance(y, wires)
    assert inst.n_tilde == 2 and len(decide_witness(inst).pairs) == 2


def test_relabeling_witness_wires_permutes_index():
    y, wires = verifier(2, copy_bit(0))
    forward = decide_witness(build_witness_instance(y, wires))
    backward = decide_witness(build_witness_instance(y, wires[::-1]))
    # accepting witnesses are 10 and 11 in forward order; reversing the wires reads them as 01 and 11
    assert forward.index == 0b10 and backward.index == 0b01


def test_n_tilde_zero_and_truncation():
    y, wires = verifier(2, copy_bit(0))
    assert decide_witness(build_witness_instance(y, wires, n_tilde=0)).verdict is Verdict.NONE
    # witnesses 0 and 1 both start with a 0 bit
    assert decide_witness(build_witness_instance(y, wires, n_tilde=2)).verdict is Verdict.NONE
    with pytest.raises(SpecwalkError):
        build_witness_instance(y, wires, n_tilde=5)


def test_fast_decay_pairs_give_none():
    g = Graph.from_lists([[1], [0], [3], [2]])
    inst = WitnessInstance(g, 2, 1.0, 0.9, 0.5, 5.0)
    assert decide_witness(inst).verdict is Verdict.NONE


def test_half_accepting_witness_violates_promise():
    y = GateCircuit(4, [Gate("h", 0)], "", (2, 3))
    assert decide_witness(build_witness_instance(y, (1,))).verdict is Verdict.PROMISE_VIOLATED


def test_pairing_must_be_an_automorphism():
    square = Graph.from_lists([[1, 2], [0, 3], [0, 3], [1, 2]])  # 4-cycle 0-1-3-2
    WitnessInstance(square, 1, 1.0, 0.9, 0.5, 1.0)
    matching = Graph.from_lists([[2], [3], [0], [1]])
    WitnessInstance(matching, 1, 1.0, 0.9, 0.5, 1.0)
    # two triangles {0,1,2} and {3,4,5}: swapping 2 and 3 breaks edge 0-2
    skew = Graph.from_lists([[1, 2], [0, 2], [0, 1], [4, 5], [3, 5], [3, 4]])
    with pytest.raises(SpecwalkError):
        WitnessInstance(skew, 1, 1.0, 0.9, 0.5, 1.0)


def test_reserved_wires_rejected():
    y, _ = verifier(1, copy_bit(0))
    for wires in [(0,), (2,), (1, 1)]:
        with pytest.raises(SpecwalkError):
            build_witness_instance(y, wires)


def test_quantum_sim_matches_exact_on_small_families():
    for name, w, gates_for in FAMILIES[:3]:
        y, wires = verifier(w, gates_for)
        inst = build_witness_instance(y, wires)
        exact, sim = decide_witness(inst), decide_witness(inst, "quantum-sim", seed=2)
        assert (exact.verdict, exact.index) == (sim.verdict, sim.index), name
    assert np.isfinite(sim.pairs[0].c_value)
