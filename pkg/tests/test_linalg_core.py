import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specwalk.errors import CapExceededError, FormatError, SymmetryError
from specwalk.linalg_core import (
    SparseSymmetricMatrix,
    diagonal_moments,
    dumps_matrix,
    eig,
    loads_matrix,
    materialize,
    matrix_exp,
    matrix_power,
    project_state,
    unit_vector,
)

SX = np.array([[0, -1], [-1, 0]])


def symmetric_matrices(max_n=6, integer=False):
    elems = st.integers(-2, 2) if integer else st.floats(-3, 3, allow_nan=False)

    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_n))
        vals = draw(st.lists(elems, min_size=n * n, max_size=n * n))
        a = np.array(vals, dtype=np.int64 if integer else float).reshape(n, n)
        return np.triu(a) + np.triu(a, 1).T

    return build()


def unit_vectors(n):
    return st.lists(st.floats(-1, 1, allow_nan=False), min_size=n, max_size=n).filter(
        lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: np.array(v) / np.linalg.norm(v))


def test_materialize_small_oracles():
    one = SparseSymmetricMatrix(1, lambda i: [(0, 1)], 1, 1.0)
    assert materialize(one).tolist() == [[1]]
    flip = SparseSymmetricMatrix(2, lambda i: [(1 - i, -1)], 1, 1.0)
    assert materialize(flip).tolist() == [[0, -1], [-1, 0]]
    assert materialize(flip).dtype == np.int64


def test_materialize_rejects_malformed_rows():
    dup = SparseSymmetricMatrix(2, lambda i: [(1 - i, 1), (1 - i, 1)], 2, 2.0)
    with pytest.raises(SymmetryError):
        materialize(dup)
    lopsided = SparseSymmetricMatrix(2, lambda i: [(1, 1)] if i == 0 else [], 1, 1.0)
    with pytest.raises(SymmetryError):
        materialize(lopsided)


def test_materialize_cap(monkeypatch):
    a = SparseSymmetricMatrix.from_dense(np.eye(5, dtype=int))
    with pytest.raises(CapExceededError):
        materialize(a, cap=4)
    monkeypatch.setenv("SPECWALK_DENSE_CAP", "3")
    with pytest.raises(CapExceededError):
        materialize(a)


def test_eig_hand_cases():
    assert np.allclose(eig(SX).eigenvalues, [-1, 1])
    assert np.allclose(eig(np.eye(4)).eigenvalues, 1)
    assert np.allclose(eig(np.ones((2, 2))).eigenvalues, [0, 2])


def test_matrix_power_hand_cases():
    assert (matrix_power(SX, 0) == np.eye(2)).all()
    assert (matrix_power(SX, 2) == np.eye(2)).all()
    assert matrix_power(np.ones((2, 2), dtype=int), 3).tolist() == [[4, 4], [4, 4]]


def test_matrix_power_switches_to_python_ints():
    big = matrix_power(np.full((2, 2), 3, dtype=np.int64), 40)
    assert big.dtype == object
    assert big[0, 0] == 6 ** 40 // 2


def test_matrix_exp_hand_cases():
    assert np.allclose(matrix_exp(np.zeros((3, 3)), 1.0), np.eye(3))
    t = 0.7
    e = matrix_exp(np.array([[1, -1], [-1, 1]]), -t)
    d, o = (1 + np.exp(-2 * t)) / 2, (1 - np.exp(-2 * t)) / 2
    assert np.allclose(e, [[d, o], [o, d]], atol=1e-12)
    u = matrix_exp(np.diag([np.pi, 0.0]), 1.0, imaginary=True)
    assert np.allclose(u, np.diag([-1, 1]), atol=1e-12)


def test_project_state_hand_cases():
    m = project_state(eig(SX), [1, 0])
    assert np.allclose(m.values, [-1, 1]) and np.allclose(m.weights, [0.5, 0.5])
    m = project_state(eig(SX), unit_vector([1, 1]))
    assert np.allclose(m.values, [-1]) and np.allclose(m.weights, [1])


def test_project_state_requires_unit_vector():
    with pytest.raises(Exception):
        project_state(eig(SX), [1, 1])


def test_text_format_round_trip():
    a = SparseSymmetricMatrix.from_dense(np.array([[0, -1, 2], [-1, 1, 0], [2, 0, 0]]))
    text = dumps_matrix(a)
    assert text.splitlines()[0] == "symmetric 3"
    assert (materialize(loads_matrix(text)) == materialize(a)).all()
    with pytest.raises(FormatError):
        loads_matrix("symmetric 2\n1 0 1\n")
    with pytest.raises(FormatError):
        loads_matrix("matrix 2\n")


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices())
def test_eig_reconstructs(a):
    es = eig(a)
    n = a.shape[0]
    assert np.max(np.abs(es.reconstruct() - a)) <= 1e-9 * n
    q = es.eigenvectors
    assert np.max(np.abs(q.conj().T @ q - np.eye(n))) <= 1e-10
    assert np.all(np.diff(es.eigenvalues) >= 0)


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices(max_n=5), st.data())
def test_project_state_weights_sum_to_one(a, data):
    psi = data.draw(unit_vectors(a.shape[0]))
    m = project_state(eig(a), psi, drop_below=0.0)
    assert np.all(m.weights >= 0)
    assert abs(m.total - 1) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices(max_n=5, integer=True), st.integers(0, 8))
def test_exact_power_matches_float(a, m):
    exact = matrix_power(a, m).astype(float)
    approx = matrix_power(a, m, exact=False)
    scale = max(1.0, np.max(np.abs(exact)))
    assert np.max(np.abs(exact - approx)) <= 1e-9 * scale


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices(max_n=5, integer=True), st.integers(0, 10), st.data())
def test_diagonal_moments_match_powers(a, m, data):
    j = data.draw(st.integers(0, a.shape[0] - 1))
    got = diagonal_moments(a, j, m)
    assert got == [int(matrix_power(a, n)[j, j]) for n in range(m + 1)]
    floats = diagonal_moments(a.astype(float) / 2, j, m)
    assert np.allclose(floats, [g / 2 ** n for n, g in enumerate(got)], rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(symmetric_matrices(max_n=4), st.floats(-1, 1), st.floats(-1, 1))
def test_exp_semigroup(a, t, s):
    for imaginary in (False, True):
        lhs = matrix_exp(a, t, imaginary) @ matrix_exp(a, s, imaginary)
        rhs = matrix_exp(a, t + s, imaginary)
        assert np.max(np.abs(lhs - rhs)) <= 1e-8 * max(1.0, np.max(np.abs(rhs)))
