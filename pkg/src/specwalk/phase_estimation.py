"""Measuring functions of observables by phase estimation.

The outcome distribution of textbook phase estimation with ``p`` ancillas on
``V = exp(iB)`` is available three ways here:

* :func:`statevector_distribution` runs the circuit (Hadamards, controlled
  powers of ``V``, inverse QFT) on the full ``(p + n)``-qubit state;
* :func:`kernel_distribution` evaluates the Fejér-kernel mixture over the
  eigendecomposition of ``B``;
* :class:`OutcomeSampler` draws outcomes from that same mixture without
  tabulating all ``2**p`` probabilities, which is what the decision
  procedures use when ``p`` reaches 30 or more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BudgetError, CapExceededError, SpecwalkError
from .linalg_core import (
    NORM_ATOL,
    EigenSystem,
    check_hermitian,
    eig,
    matrix_exp,
    operator_norm,
    project_state,
)

STATEVECTOR_CAP = 1 << 22  # amplitudes
DENSE_OUTCOME_MAX_P = 22
MAX_P = 50
_WINDOW = 1 << 12
_CHUNK = 1 << 16


def ancilla_count(theta: float, eta: float) -> int:
    """``⌈log2(1/η)⌉ + ⌈log2(2 + 1/(2θ))⌉``."""
    if not (0.0 < theta < 1.0 and 0.0 < eta < 1.0):
        raise SpecwalkError(f"need 0 < theta, eta < 1, got theta={theta}, eta={eta}")
    return _ceil_log2(1.0 / eta) + _ceil_log2(2.0 + 1.0 / (2.0 * theta))


def _ceil_log2(x: float) -> int:
    c = math.ceil(math.log2(x))
    # guard against log2 rounding just above an exact power of two
    if 2.0 ** (c - 1) >= x:
        c -= 1
    return c


@dataclass(frozen=True)
class PEConfig:
    theta: float
    eta: float
    delta: float = 0.0
    repetitions: int = 1
    alpha: float = 0.05
    rng_seed: int = 0
    p: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", ancilla_count(self.theta, self.eta))
        if self.delta < 0:
            raise SpecwalkError("delta must be nonnegative")
        if self.repetitions < 1:
            raise SpecwalkError("repetitions must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise SpecwalkError("alpha must lie in (0, 1)")

    def as_dict(self) -> dict:
        return {"theta": self.theta, "eta": self.eta, "p": self.p, "delta": self.delta,
                "repetitions": self.repetitions, "alpha": self.alpha, "seed": self.rng_seed}


@dataclass(frozen=True)
class FunctionDescriptor:
    """Lipschitz function on a closed interval ``[lo, hi]`` (``hi`` may be ``inf``)."""

    lo: float
    hi: float
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lipschitz_k: float
    sup_norm: float
    name: str = "f"

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise SpecwalkError("empty domain interval")
        if self.lipschitz_k < 0 or self.sup_norm < 0:
            raise SpecwalkError("Lipschitz constant and sup norm must be nonnegative")

    def clamp(self, x):
        return np.clip(x, self.lo, self.hi)

    def __call__(self, x):
        return self.evaluator(self.clamp(np.asarray(x, dtype=float)))

    def spot_check(self, rng: np.random.Generator, n: int = 200, span: float = 10.0) -> bool:
        """Sample the Lipschitz and sup-norm claims on random domain points."""
        hi = self.hi if np.isfinite(self.hi) else self.lo + span
        x = rng.uniform(self.lo, hi, n)
        y = rng.uniform(self.lo, hi, n)
        fx, fy = self(x), self(y)
        slack = 1e-12 * (1.0 + self.sup_norm)
        return bool(np.all(np.abs(fx - fy) <= self.lipschitz_k * np.abs(x - y) + slack)
                    and np.all(np.abs(fx) <= self.sup_norm + slack))


def power_function(m: int, c: float = 1.0) -> FunctionDescriptor:
    """``x**m`` on ``[-c, c]``."""
    k = m * c ** (m - 1) if m > 0 else 0.0
    return FunctionDescriptor(-c, c, lambda x: x ** m, k, c ** m, name=f"x^{m}")


def decay_function(rate: float, lo: float) -> FunctionDescriptor:
    """``exp(-rate·x)`` on ``[lo, ∞)``."""
    e = math.exp(-rate * lo)
    return FunctionDescriptor(lo, math.inf, lambda x: np.exp(-rate * x), rate * e, e,
                              name=f"exp(-{rate:g}x)")


def remap(a, p: int):
    """Phase outcome ``x`` for register value ``a`` (``x ∈ (-π, π]``)."""
    a = np.asarray(a)
    n = 1 << p
    x = a * (2 * np.pi / n)
    return np.where(a <= n // 2, x, x - 2 * np.pi)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities ``q(a)`` for register values ``a = 0..2**p-1``."""

    p: int
    probabilities: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.probabilities, dtype=float)
        if q.shape != (1 << self.p,):
            raise SpecwalkError("probability vector must have length 2**p")
        object.__setattr__(self, "probabilities", q)

    @property
    def support(self) -> np.ndarray:
        return remap(np.arange(1 << self.p), self.p)

    @property
    def mass(self) -> float:
        return float(self.probabilities.sum())

    def expectation(self, f: FunctionDescriptor) -> float:
        """Exact ``E f(X)`` with the clamping rule applied to each outcome."""
        return float(np.dot(self.probabilities, f(self.support)))

    def l1_distance(self, other: "OutcomeDistribution") -> float:
        return float(np.sum(np.abs(self.probabilities - other.probabilities)))

    def to_csv(self) -> str:
        x = self.support
        order = np.argsort(x, kind="stable")
        rows = ["x,probability"] + [f"{x[i]!r},{self.probabilities[i]!r}" for i in order]
        return "\n".join(rows) + "\n"


def _check_inputs(b_obs, psi):
    b = check_hermitian(b_obs)
    v = np.asarray(psi, dtype=complex).ravel()
    if v.shape[0] != b.shape[0]:
        raise SpecwalkError("state dimension does not match the observable")
    if abs(np.linalg.norm(v) - 1.0) > NORM_ATOL:
        raise SpecwalkError("state is not normalized")
    return b, v


def statevector_distribution(b_obs, psi, p: int, cap: int = STATEVECTOR_CAP) -> OutcomeDistribution:
    """Simulate the phase-estimation circuit on the joint register.

    Ancilla ``k`` (weight ``2**k``) controls ``V^(2**k)``; the inverse Fourier
    transform is then applied to the ancilla register and the ancillas are
    read out.
    """
    b, v = _check_inputs(b_obs, psi)
    n = b.shape[0]
    size = (1 << p) * n
    if size > cap:
        raise CapExceededError(f"statevector of {size} amplitudes exceeds cap {cap}")
    state = np.zeros((1 << p, n), dtype=complex)
    state[0] = v
    # Hadamard on every ancilla: uniform superposition over the register
    state[:] = state[0] / math.sqrt(1 << p)
    power = matrix_exp(b, 1.0, imaginary=True)
    reg = np.arange(1 << p)
    for k in range(p):
        on = (reg >> k) & 1 == 1
        state[on] = state[on] @ power.T
        power = power @ power
    # inverse QFT: amplitude(a) = 2^{-p/2} Σ_k e^{-2πi k a / 2^p} amplitude(k)
    out = np.fft.fft(state, axis=0) / math.sqrt(1 << p)
    return OutcomeDistribution(p, np.sum(np.abs(out) ** 2, axis=1))


def fejer_kernel(lam, p: int) -> np.ndarray:
    """``|2^{-p} Σ_k e^{ik(λ - 2πa/2^p)}|²`` for every ``a``; rows follow ``lam``."""
    n = 1 << p
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    u = lam[:, None] - 2 * np.pi * np.arange(n)[None, :] / n
    half = np.sin(u / 2)
    num = np.sin(n * u / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = (num / (n * half)) ** 2
    return np.where(np.abs(half) < 1e-15, 1.0, k)


def kernel_distribution(b_obs, psi, p: int, es: EigenSystem | None = None) -> OutcomeDistribution:
    """Outcome distribution as the ``|c_j|²``-mixture of Fejér kernels."""
    if p > DENSE_OUTCOME_MAX_P:
        raise CapExceededError(f"p={p} is too large to tabulate the outcome distribution")
    if es is None:
        b, v = _check_inputs(b_obs, psi)
        es = eig(b)
    else:
        v = np.asarray(psi, dtype=complex).ravel()
    meas = project_state(es, v, drop_below=0.0)
    q = np.zeros(1 << p)
    for lam, w in zip(meas.values, meas.weights):
        q += w * fejer_kernel(lam, p)[0]
    return OutcomeDistribution(p, q)


def exact_outcome_distribution(b_obs, psi, cfg: PEConfig, cross_check: bool = True,
                               tol: float = 1e-9) -> OutcomeDistribution:
    """Outcome distribution for ``V = exp(i·b_obs)``, computed two ways.

    Requires ``‖b_obs‖ ≤ 1``.  With ``cross_check`` the statevector circuit
    and the kernel mixture must agree in ℓ¹ to ``tol``.
    """
    b, v = _check_inputs(b_obs, psi)
    if operator_norm(b) > 1.0 + 1e-12:
        raise SpecwalkError("observable norm exceeds 1; rescale before phase estimation")
    q_kernel = kernel_distribution(b, v, cfg.p)
    if cross_check:
        q_circ = statevector_distribution(b, v, cfg.p)
        gap = q_kernel.l1_distance(q_circ)
        if gap > tol:
            raise SpecwalkError(f"kernel and circuit distributions differ by {gap:.3e} in l1")
    return q_kernel


def perturbed_distribution(b_obs, psi, cfg: PEConfig, perturbation) -> OutcomeDistribution:
    """Outcome distribution when ``U = exp(i(b_obs + perturbation))`` replaces ``V``.

    Raises ``BudgetError`` if ``‖U − V‖ > cfg.delta``.
    """
    b, v = _check_inputs(b_obs, psi)
    pert = check_hermitian(perturbation)
    u_err = unitary_error(b, pert)
    if u_err > cfg.delta + 1e-15:
        raise BudgetError(f"‖U − V‖ = {u_err:.3e} exceeds delta = {cfg.delta:.3e}")
    return kernel_distribution(b + pert, v, cfg.p)


def unitary_error(b_obs, perturbation) -> float:
    v = matrix_exp(b_obs, 1.0, imaginary=True)
    u = matrix_exp(np.asarray(b_obs) + np.asarray(perturbation), 1.0, imaginary=True)
    return operator_norm(u - v)


def random_perturbation(dim: int, norm: float, rng: np.random.Generator) -> np.ndarray:
    """Random real symmetric matrix with operator norm exactly ``norm``."""
    if norm == 0:
        return np.zeros((dim, dim))
    g = rng.standard_normal((dim, dim))
    h = (g + g.T) / 2
    return h * (norm / operator_norm(h))


def outcome_bias_bound(cfg: PEConfig, f: FunctionDescriptor, delta_coeff_exp: int = 2) -> float:
    """``(2θ + 2^{p+c}δ)‖f‖∞ + 2πKη`` with ``c = delta_coeff_exp``."""
    return ((2 * cfg.theta + 2.0 ** (cfg.p + delta_coeff_exp) * cfg.delta) * f.sup_norm
            + 2 * math.pi * f.lipschitz_k * cfg.eta)


def exact_expectation(b_obs, psi, f: FunctionDescriptor) -> float:
    """``⟨ψ|f(B)|ψ⟩`` through the spectral measure."""
    b, v = _check_inputs(b_obs, psi)
    return project_state(eig(b), v).expectation(f)


# -- sampling --------------------------------------------------------------

class OutcomeSampler:
    """Exact sampler for phase-estimation outcomes on ``exp(iH)``.

    Draws the eigen-component first (weights ``|c_j|²``), then the register
    offset from that component's Fejér kernel.  Offsets within ``±_WINDOW``
    of the eigenphase are drawn from tabulated probabilities; the far tails
    by rejection from a ``1/(k−Δ)²`` envelope, which dominates the kernel
    because ``sin(x) ≥ 2x/π`` on ``[0, π/2]``.
    """

    def __init__(self, hamiltonian, psi, p: int):
        if not 1 <= p <= MAX_P:
            raise SpecwalkError(f"p must lie in [1, {MAX_P}]")
        b, v = _check_inputs(hamiltonian, psi)
        self.p = p
        self.n = 1 << p
        meas = project_state(eig(b), v)
        self.measure = meas
        self.weights = meas.weights / meas.weights.sum()
        self._components = [self._component(lam) for lam in meas.values]

    def _component(self, lam: float):
        phi = (lam % (2 * np.pi)) * self.n / (2 * np.pi)
        base = math.floor(phi)
        frac = phi - base
        if frac < 1e-12 or self.n == 1:
            return base, frac, np.array([0]), np.array([1.0]), 0.0
        if self.n <= 2 * _WINDOW:
            ks = np.arange(-(self.n // 2) + 1, self.n // 2 + 1)
        else:
            ks = np.arange(-_WINDOW + 1, _WINDOW + 1)
        pk = self._pmf(ks, frac)
        inner = float(pk.sum())
        if self.n <= 2 * _WINDOW:
            pk = pk / inner
            inner = 1.0
        return base, frac, ks, np.cumsum(pk), 1.0 - inner

    def _pmf(self, ks, frac):
        d = frac - ks
        return (math.sin(math.pi * frac) ** 2
                / (self.n ** 2 * np.sin(np.pi * d / self.n) ** 2))

    def sample_register(self, size: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        out = np.empty(size, dtype=np.int64)
        for c, (base, frac, ks, cdf, tail) in enumerate(self._components):
            idx = np.nonzero(comp == c)[0]
            if idx.size == 0:
                continue
            offsets = np.empty(idx.size, dtype=np.int64)
            u = rng.random(idx.size)
            in_tail = u < tail
            inner = ~in_tail
            if inner.any():
                pos = np.searchsorted(cdf, rng.random(int(inner.sum())) * cdf[-1], side="right")
                offsets[inner] = ks[np.minimum(pos, len(ks) - 1)]
            if in_tail.any():
                offsets[in_tail] = self._sample_tail(int(in_tail.sum()), frac, rng)
            out[idx] = (base + offsets) % self.n
        return out

    def _sample_tail(self, size, frac, rng):
        """Offsets ``k`` with ``k > W`` or ``k ≤ -W``, drawn from the kernel restricted there."""
        w, half = _WINDOW, self.n // 2
        c = math.sin(math.pi * frac) ** 2 / 4.0
        # envelope c/(s−Δ)² integrated over s ∈ (k−1, k] (right) or [k, k+1) (left)
        r_lo, r_hi = w - frac, half - frac             # right tail: s − Δ ∈ [r_lo, r_hi]
        l_lo, l_hi = w - 1 + frac, half - 1 + frac     # left tail: Δ − s ∈ [l_lo, l_hi]
        mass_r = 1 / r_lo - 1 / r_hi
        mass_l = 1 / l_lo - 1 / l_hi
        result = np.empty(0, dtype=np.int64)
        while result.size < size:
            m = 2 * (size - result.size) + 8
            right = rng.random(m) < mass_r / (mass_r + mass_l)
            u = rng.random(m)
            lo = np.where(right, r_lo, l_lo)
            hi = np.where(right, r_hi, l_hi)
            # inverse CDF of density ∝ 1/t² on [lo, hi]
            t = 1.0 / (1.0 / lo - u * (1.0 / lo - 1.0 / hi))
            s = np.where(right, frac + t, frac - t)
            k = np.where(right, np.ceil(s), np.floor(s)).astype(np.int64)
            k = np.where(right, np.clip(k, w + 1, half), np.clip(k, -half + 1, -w))
            a_edge = np.where(right, k - 1 - frac, frac - k - 1)
            b_edge = np.where(right, k - frac, frac - k)
            a_edge = np.maximum(a_edge, np.where(right, r_lo, l_lo))
            env = c * (1.0 / a_edge - 1.0 / b_edge)
            accept = rng.random(m) * env < self._pmf(k, frac)
            result = np.concatenate([result, k[accept]])
        return result[:size]

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Remapped outcomes ``x``."""
        return remap(self.sample_register(size, rng), self.p)


def functional_sample(dist: OutcomeDistribution, f: FunctionDescriptor, rng_seed=None,
                      size: int | None = None):
    """Draw outcome(s) from ``dist``, clamp to the domain of ``f`` and evaluate."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    q = dist.probabilities / dist.probabilities.sum()
    a = rng.choice(q.size, size=size, p=q)
    vals = f(remap(a, dist.p))
    return float(vals) if size is None else vals


def hoeffding_count(value_range: float, accuracy: float, alpha: float) -> int:
    """``⌈(R²/(2ε²))·ln(2/α)⌉`` two-sided Hoeffding repetitions."""
    if accuracy <= 0:
        raise BudgetError("sampling accuracy must be positive")
    if value_range == 0:
        return 1
    return max(1, math.ceil(value_range ** 2 / (2 * accuracy ** 2) * math.log(2 / alpha)))


@dataclass(frozen=True)
class ExpectationEstimate:
    estimate: float
    sample_count: int
    config: PEConfig
    error_bound: float
    bias_bound: float

    def __iter__(self):
        return iter((self.estimate, self.sample_count))

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "sample_count": self.sample_count,
                "error_bound": self.error_bound, "bias_bound": self.bias_bound,
                **self.config.as_dict()}


def estimate_expectation(b_obs, psi, f: FunctionDescriptor, epsilon: float, alpha: float,
                         delta: float = 0.0, rng_seed: int = 0, perturbation=None,
                         repetitions: int | None = None) -> ExpectationEstimate:
    """Estimate ``⟨ψ|f(B)|ψ⟩`` to ``ε(‖f‖∞ + K)`` with confidence ``1 − α``.

    Sets ``η = ε/(6π)``, ``θ = ε/6`` and requires ``δ·2^{p+2} ≤ ε/3``.  Two
    thirds of the error budget go to the phase-estimation bias, one third to
    Hoeffding sampling noise.  When ``delta > 0`` and no ``perturbation`` is
    given, a random Hermitian perturbation of norm ``delta`` stands in for
    the approximate unitary.
    """
    if not (0.0 < epsilon < 1.0 and 0.0 < alpha < 1.0):
        raise SpecwalkError("epsilon and alpha must lie in (0, 1)")
    b, v = _check_inputs(b_obs, psi)
    if operator_norm(b) > 1.0 + 1e-12:
        raise SpecwalkError("observable norm exceeds 1; rescale before phase estimation")
    theta, eta = epsilon / 6.0, epsilon / (6.0 * math.pi)
    p = ancilla_count(theta, eta)
    if p > MAX_P:
        raise BudgetError(f"epsilon={epsilon:g} needs p={p} ancillas, beyond {MAX_P}")
    if delta * 2.0 ** (p + 2) > epsilon / 3.0:
        raise BudgetError(f"delta·2^(p+2) = {delta * 2.0 ** (p + 2):.3e} exceeds epsilon/3")
    seeds = np.random.SeedSequence(rng_seed)
    pert_seed, sample_seed = seeds.spawn(2)
    if perturbation is None:
        perturbation = random_perturbation(b.shape[0], delta, np.random.default_rng(pert_seed))
    if delta > 0 or np.any(perturbation):
        err = unitary_error(b, perturbation)
        if err > delta + 1e-15:
            raise BudgetError(f"‖U − V‖ = {err:.3e} exceeds delta = {delta:.3e}")
    target = epsilon * (f.sup_norm + f.lipschitz_k)
    n = hoeffding_count(2.0 * f.sup_norm, target / 3.0, alpha)
    if repetitions is not None:
        n = int(repetitions)
    cfg = PEConfig(theta, eta, delta, n, alpha, rng_seed)
    sampler = OutcomeSampler(b + perturbation, v, p)
    total = 0.0
    # fixed-size chunks, one child stream each: reproducible however chunks are scheduled
    for i, child in enumerate(sample_seed.spawn(math.ceil(n / _CHUNK))):
        size = min(_CHUNK, n - i * _CHUNK)
        x = sampler.sample(size, np.random.default_rng(child))
        total += float(np.sum(f(x)))
    return ExpectationEstimate(total / n, n, cfg, target, outcome_bias_bound(cfg, f))
