"""Dense linear-algebra backbone and the sparse symmetric oracle type.

Everything downstream either consumes a :class:`SparseSymmetricMatrix` (a row
oracle, lazily evaluated) or a dense ``numpy`` array obtained from it with
:func:`materialize`.  The dense routines here double as the brute-force oracle
for every spectral claim checked in the test suite.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CapExceededError, FormatError, SpecwalkError, SymmetryError

DEFAULT_DENSE_CAP = 4096
HERMITIAN_ATOL = 1e-12
DEGENERACY_RTOL = 1e-8
NORM_ATOL = 1e-10

Row = list  # list[tuple[int, float]]


def dense_cap() -> int:
    """Materialization cap, overridable through ``SPECWALK_DENSE_CAP``."""
    value = os.environ.get("SPECWALK_DENSE_CAP")
    if value is None:
        return DEFAULT_DENSE_CAP
    try:
        cap = int(value)
    except ValueError as exc:
        raise SpecwalkError(f"SPECWALK_DENSE_CAP must be an integer, got {value!r}") from exc
    if cap <= 0:
        raise SpecwalkError("SPECWALK_DENSE_CAP must be positive")
    return cap


@dataclass(frozen=True)
class SparseSymmetricMatrix:
    """Real symmetric matrix given by a row oracle.

    Parameters
    ----------
    dimension : int
        Number of rows ``N``.
    row_oracle : callable
        Maps a row index to a sorted sequence of ``(column, value)`` pairs
        listing the non-zero entries of that row.
    max_row_nonzeros : int
        A priori bound ``s`` on the number of entries per row.
    norm_bound : float
        A priori bound ``b`` on the operator norm.
    """

    dimension: int
    row_oracle: Callable[[int], Sequence[tuple[int, float]]] = field(repr=False)
    max_row_nonzeros: int
    norm_bound: float

    def __post_init__(self):
        if self.dimension <= 0:
            raise SpecwalkError("dimension must be positive")
        if self.max_row_nonzeros <= 0:
            raise SpecwalkError("max_row_nonzeros must be positive")
        if self.norm_bound < 0:
            raise SpecwalkError("norm_bound must be nonnegative")

    def row(self, i: int) -> list[tuple[int, float]]:
        if not 0 <= i < self.dimension:
            raise IndexError(f"row {i} out of range for dimension {self.dimension}")
        return list(self.row_oracle(i))

    @classmethod
    def from_dense(cls, matrix, norm_bound: float | None = None) -> "SparseSymmetricMatrix":
        """Wrap an explicit symmetric array (values kept as given, zeros dropped)."""
        a = np.asarray(matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise SpecwalkError("expected a square matrix")
        if np.iscomplexobj(a):
            raise SpecwalkError("complex-valued matrices are not supported")
        if not np.array_equal(a, a.T):
            raise SymmetryError("matrix is not symmetric")
        rows = []
        for i in range(a.shape[0]):
            cols = np.nonzero(a[i])[0]
            rows.append(tuple((int(j), _scalar(a[i, j])) for j in cols))
        return cls.from_rows(rows, norm_bound=norm_bound)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[tuple[int, float]]],
                  norm_bound: float | None = None) -> "SparseSymmetricMatrix":
        rows = tuple(tuple(sorted(r)) for r in rows)
        s = max((len(r) for r in rows), default=0) or 1
        if norm_bound is None:
            # Gershgorin / Schur bound: max absolute row sum
            norm_bound = max((sum(abs(v) for _, v in r) for r in rows), default=0.0)
        return cls(len(rows), rows.__getitem__, s, float(norm_bound))


def _scalar(v):
    """Keep integral values as Python ints so exact arithmetic survives."""
    if isinstance(v, (int, np.integer)):
        return int(v)
    fv = float(v)
    return int(fv) if fv.is_integer() else fv


def materialize(matrix: SparseSymmetricMatrix, cap: int | None = None,
                check_symmetry: bool = True) -> np.ndarray:
    """Return the dense form of ``matrix``.

    The result has an integer dtype when every oracle value is an integer,
    so that :func:`matrix_power` can count paths exactly.

    Raises
    ------
    CapExceededError
        If the dimension exceeds ``cap`` (default :func:`dense_cap`).
    SymmetryError
        On duplicate column indices, out-of-range columns, rows exceeding
        ``max_row_nonzeros``, or asymmetric values.
    """
    cap = dense_cap() if cap is None else cap
    n = matrix.dimension
    if n > cap:
        raise CapExceededError(f"dimension {n} exceeds dense cap {cap}")
    rows = [matrix.row(i) for i in range(n)]
    integral = all(isinstance(v, (int, np.integer)) for r in rows for _, v in r)
    out = np.zeros((n, n), dtype=np.int64 if integral else float)
    for i, r in enumerate(rows):
        seen = set()
        if len(r) > matrix.max_row_nonzeros:
            raise SymmetryError(f"row {i} has {len(r)} entries, more than s={matrix.max_row_nonzeros}")
        for j, v in r:
            if j in seen:
                raise SymmetryError(f"row {i} lists column {j} twice")
            if not 0 <= j < n:
                raise SymmetryError(f"row {i} references column {j} outside [0, {n})")
            if v == 0:
                raise SymmetryError(f"row {i} lists an explicit zero at column {j}")
            seen.add(j)
            out[i, j] = v
    if check_symmetry and not np.array_equal(out, out.T):
        bad = np.argwhere(out != out.T)[0]
        raise SymmetryError(f"oracle is not symmetric at entry {tuple(int(x) for x in bad)}")
    return out


def check_hermitian(h, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate a dense Hermitian matrix and return it as an array."""
    a = np.asarray(h)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise SpecwalkError(f"expected a non-empty square matrix, got shape {a.shape}")
    if a.dtype == object:
        a = a.astype(float)
    if not np.allclose(a, a.conj().T, rtol=0.0, atol=atol):
        raise SymmetryError("matrix is not Hermitian within tolerance")
    return a


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Return ``Q·fn(Λ)·Q†``."""
        q = self.eigenvectors
        return (q * fn(self.eigenvalues)) @ q.conj().T


def eig(h) -> EigenSystem:
    """Eigendecomposition of a dense Hermitian matrix.

    Raises ``SpecwalkError`` when LAPACK fails to converge.
    """
    a = check_hermitian(h)
    if np.issubdtype(a.dtype, np.integer):
        a = a.astype(float)
    try:
        w, q = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise SpecwalkError(f"eigendecomposition failed to converge: {exc}") from exc
    return EigenSystem(w, q)


def _is_integral(a: np.ndarray) -> bool:
    if np.issubdtype(a.dtype, np.integer) or a.dtype == object:
        return True
    if np.iscomplexobj(a):
        return False
    return bool(np.all(np.isfinite(a)) and np.all(a == np.round(a)))


def matrix_power(h, m: int, exact: bool | None = None) -> np.ndarray:
    """``h**m`` by repeated squaring.

    When all entries are integers (or ``exact=True``) the product is formed
    in exact integer arithmetic: ``int64`` while the entries provably fit,
    Python integers otherwise.  ``exact=False`` forces floating point.
    """
    if m < 0:
        raise SpecwalkError("matrix_power needs m >= 0")
    a = np.asarray(h)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SpecwalkError("matrix_power needs a square matrix")
    if exact is None:
        exact = _is_integral(a)
    if exact:
        if not _is_integral(a):
            raise SpecwalkError("exact mode requires integer entries")
        row_sum = int(np.max(np.sum(np.abs(a.astype(object)), axis=1))) if a.size else 0
        if row_sum <= 1 or m * row_sum.bit_length() < 62:
            a = a.astype(np.int64)
            ident = np.eye(a.shape[0], dtype=np.int64)
        else:
            a = a.astype(object)
            ident = np.eye(a.shape[0], dtype=np.int64).astype(object)
    else:
        a = a.astype(complex if np.iscomplexobj(a) else float)
        ident = np.eye(a.shape[0], dtype=a.dtype)
    result = ident
    base = a
    while m:
        if m & 1:
            result = result @ base
        m >>= 1
        if m:
            base = base @ base
    return result


def diagonal_moments(h, j: int, m: int) -> list:
    """``[(h^n)_jj for n = 0..m]`` by repeated matrix-vector products.

    Exact (Python ``int`` results) when ``h`` has integer entries, floating
    point otherwise.  Costs ``m`` products with a vector instead of matrix
    products.
    """
    a = np.asarray(h)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not 0 <= j < a.shape[0]:
        raise SpecwalkError("diagonal_moments needs a square matrix and a valid index")
    if m < 0:
        raise SpecwalkError("diagonal_moments needs m >= 0")
    if _is_integral(a):
        row_sum = int(np.max(np.sum(np.abs(a.astype(object)), axis=1))) if a.size else 0
        dtype = np.int64 if row_sum <= 1 or m * row_sum.bit_length() < 62 else object
        a = a.astype(dtype)
        v = np.zeros(a.shape[0], dtype=dtype)
        v[j] = 1
        cast = int
    else:
        a = a.astype(complex if np.iscomplexobj(a) else float)
        v = np.zeros(a.shape[0], dtype=a.dtype)
        v[j] = 1.0
        cast = (lambda x: x) if np.iscomplexobj(a) else float
    out = [cast(v[j])]
    for _ in range(m):
        v = a @ v
        out.append(cast(v[j]))
    return out


def matrix_exp(h, scale: float, imaginary: bool = False) -> np.ndarray:
    """``exp(scale·h)`` or, with ``imaginary=True``, ``exp(i·scale·h)``.

    Computed through the eigendecomposition.  The imaginary mode is checked
    to be unitary to 1e-9.
    """
    es = eig(h)
    if not np.isfinite(scale * (np.max(np.abs(es.eigenvalues)) if es.dimension else 0.0)):
        raise SpecwalkError("scale·‖h‖ is not finite")
    if imaginary:
        u = es.apply(lambda lam: np.exp(1j * scale * lam))
        resid = np.max(np.abs(u @ u.conj().T - np.eye(len(u))))
        if resid > 1e-9:
            raise SpecwalkError(f"exponential is not unitary (residual {resid:.2e})")
        return u
    out = es.apply(lambda lam: np.exp(scale * lam))
    return out.real if not np.iscomplexobj(np.asarray(h)) else out


@dataclass(frozen=True)
class SpectralMeasure:
    """Finitely supported probability measure on the real line."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.values.shape != self.weights.shape:
            raise SpecwalkError("values and weights must have the same length")

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def moment(self, m: int) -> float:
        return float(np.sum(self.weights * self.values ** m))

    def expectation(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(self.weights * fn(self.values)))

    def scaled(self, factor: float) -> "SpectralMeasure":
        order = np.argsort(self.values * factor, kind="stable")
        return SpectralMeasure((self.values * factor)[order], self.weights[order])

    def compact(self, atol: float = 1e-12) -> "SpectralMeasure":
        """Drop support points whose weight is at most ``atol``."""
        keep = self.weights > atol
        return SpectralMeasure(self.values[keep], self.weights[keep])

    def max_deviation(self, other: "SpectralMeasure", atol: float = 1e-12) -> tuple[float, float]:
        """Largest value and weight mismatch after dropping negligible weights.

        Returns ``(inf, inf)`` when the compacted supports differ in size.
        """
        a, b = self.compact(atol), other.compact(atol)
        if len(a.values) != len(b.values):
            return float("inf"), float("inf")
        ia, ib = np.argsort(a.values), np.argsort(b.values)
        return (float(np.max(np.abs(a.values[ia] - b.values[ib]), initial=0.0)),
                float(np.max(np.abs(a.weights[ia] - b.weights[ib]), initial=0.0)))


def group_eigenvalues(eigenvalues: np.ndarray, rtol: float = DEGENERACY_RTOL) -> list[np.ndarray]:
    """Split ascending eigenvalues into clusters of numerically equal values."""
    lam = np.asarray(eigenvalues)
    if lam.size == 0:
        return []
    diameter = float(lam[-1] - lam[0])
    thresh = rtol * diameter if diameter > 0 else 0.0
    breaks = np.nonzero(np.diff(lam) > thresh)[0] + 1
    return np.split(np.arange(lam.size), breaks)


def project_state(es: EigenSystem, psi, rtol: float = DEGENERACY_RTOL,
                  drop_below: float = 1e-14) -> SpectralMeasure:
    """Spectral measure of ``psi``: weights ``<psi|Q_j|psi>`` on distinct eigenvalues.

    Degenerate eigenvalues are binned with tolerance ``rtol`` relative to the
    spectral diameter.  Support points with weight below ``drop_below`` are
    omitted.
    """
    v = np.asarray(psi, dtype=complex).ravel()
    if v.shape[0] != es.dimension:
        raise SpecwalkError("state dimension does not match the eigensystem")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > NORM_ATOL:
        raise SpecwalkError(f"state is not normalized (norm {nrm!r})")
    amp = np.abs(es.eigenvectors.conj().T @ v) ** 2
    values, weights = [], []
    for idx in group_eigenvalues(es.eigenvalues, rtol):
        w = float(amp[idx].sum())
        if w > drop_below:
            values.append(float(es.eigenvalues[idx].mean()))
            weights.append(w)
    return SpectralMeasure(np.array(values), np.array(weights))


def basis_state(dimension: int, index: int) -> np.ndarray:
    v = np.zeros(dimension)
    v[index] = 1.0
    return v


# -- text format -----------------------------------------------------------

def dumps_matrix(matrix: SparseSymmetricMatrix) -> str:
    """Serialize as ``symmetric <N>`` plus sorted upper-triangle ``i j value`` lines."""
    lines = [f"symmetric {matrix.dimension}"]
    for i in range(matrix.dimension):
        for j, v in sorted(matrix.row(i)):
            if j >= i:
                lines.append(f"{i} {j} {_fmt_value(v)}")
    return "\n".join(lines) + "\n"


def _fmt_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def loads_matrix(text: str) -> SparseSymmetricMatrix:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise FormatError("empty matrix file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "symmetric":
        raise FormatError(f"expected header 'symmetric <N>', got {lines[0]!r}")
    try:
        n = int(head[1])
    except ValueError as exc:
        raise FormatError(f"bad dimension in header {lines[0]!r}") from exc
    if n <= 0:
        raise FormatError("dimension must be positive")
    rows: list[dict[int, float]] = [dict() for _ in range(n)]
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise FormatError(f"expected 'i j value', got {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            v = _parse_value(parts[2])
        except ValueError as exc:
            raise FormatError(f"bad entry line {ln!r}") from exc
        if not (0 <= i <= j < n):
            raise FormatError(f"entry ({i}, {j}) must satisfy 0 <= i <= j < {n}")
        if j in rows[i]:
            raise FormatError(f"duplicate entry ({i}, {j})")
        if v == 0:
            continue
        rows[i][j] = v
        rows[j][i] = v
    return SparseSymmetricMatrix.from_rows([sorted(r.items()) for r in rows])


def _parse_value(s: str):
    try:
        return int(s)
    except ValueError:
        return _scalar(float(s))


def save_matrix(matrix: SparseSymmetricMatrix, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_matrix(matrix))


def load_matrix(path) -> SparseSymmetricMatrix:
    with open(path) as fh:
        return loads_matrix(fh.read())


def operator_norm(h) -> float:
    a = np.asarray(h)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a.astype(complex if np.iscomplexobj(a) else float), 2))


def unit_vector(entries: Iterable[complex]) -> np.ndarray:
    v = np.asarray(list(entries), dtype=complex)
    return v / np.linalg.norm(v)
