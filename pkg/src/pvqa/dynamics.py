"""State-vector dynamics of s(t) H_Ising + (1 - s(t)) H_q with H_q = -sum_i X_i."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .model import IsingModel, index_to_bits
from .schedules import Continuous, Qaoa, Schedule, validate

__all__ = [
    "IntegratorError",
    "Distribution",
    "initial_state",
    "apply_hamiltonian",
    "default_dt",
    "time_grid",
    "evolve_rk4",
    "evolve_qaoa_exact",
    "evolve",
    "measure_distribution",
    "sample_shots",
    "expectation_and_gradient",
    "write_distribution_csv",
]

MAX_SPINS = 24
NORM_TOLERANCE = 1e-4


class IntegratorError(RuntimeError):
    pass


@dataclass(frozen=True)
class Distribution:
    """Probability per configuration index; ``shots`` is set for empirical ones."""

    probs: np.ndarray
    shots: int | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        dim = probs.shape[0]
        if probs.ndim != 1 or dim & (dim - 1):
            raise ValueError("distribution length must be a power of two")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return int(self.probs.shape[0]).bit_length() - 1

    @property
    def counts(self) -> np.ndarray:
        if self.shots is None:
            raise ValueError("exact distributions have no shot counts")
        return np.rint(self.probs * self.shots).astype(np.int64)

    def mass(self, config) -> float:
        idx = config if np.isscalar(config) else int(np.dot(config, 1 << np.arange(self.n)))
        return float(self.probs[int(idx)])

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(index_to_bits(i, self.n).tolist()): float(self.probs[i]) for i in self.support()}


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_SPINS:
        raise ValueError(f"spin count {n} outside [1, {MAX_SPINS}]")


def initial_state(n: int) -> np.ndarray:
    """Uniform superposition, the ground state of -sum_i X_i."""
    _check_n(n)
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128)


def apply_hamiltonian(m: IsingModel, s: float, psi) -> np.ndarray:
    """[s H_Ising + (1 - s) H_q] psi."""
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape != (1 << m.n,):
        raise ValueError(f"dimension mismatch: state has shape {psi.shape}, model has n={m.n}")
    idx = np.arange(psi.shape[0])
    mixed = sum(psi[idx ^ (1 << i)] for i in range(m.n))
    return s * m.diagonal * psi - (1.0 - s) * mixed


@dataclass(frozen=True)
class _System:
    """Diagonal and mixer masks, optionally restricted to the even-parity sector.

    With all fields zero, H commutes with the global spin flip and the uniform
    initial state is flip-symmetric, so amplitudes satisfy psi[j] = psi[~j].
    The sector stores indices below 2^(n-1); the top spin's flip maps j to its
    partner's complement j ^ (2^(n-1) - 1).
    """

    n: int
    diag: np.ndarray
    masks: np.ndarray
    reduced: bool

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    def initial(self) -> np.ndarray:
        return np.full(self.dim, 2.0 ** (-self.n / 2), dtype=np.complex128)

    def expand(self, psi: np.ndarray) -> np.ndarray:
        if not self.reduced:
            return psi
        full = 1 << self.n
        return np.concatenate([psi, psi[(full - 1) ^ np.arange(self.dim, full)]])

    def reduce_weights(self, w: np.ndarray) -> np.ndarray:
        """Observable on the stored amplitudes giving the full-space expectation."""
        if not self.reduced:
            return np.asarray(w, dtype=np.float64)
        full = 1 << self.n
        j = np.arange(self.dim)
        return w[j] + w[(full - 1) ^ j]


@lru_cache(maxsize=64)
def _system(m: IsingModel, reduce: bool = True) -> _System:
    _check_n(m.n)
    diag = np.ascontiguousarray(m.diagonal, dtype=np.float64)
    if reduce and m.n >= 2 and not m.has_fields():
        half = 1 << (m.n - 1)
        masks = [1 << i for i in range(m.n - 1)] + [half - 1]
        return _System(m.n, diag[:half].copy(), np.array(masks, dtype=np.int64), True)
    return _System(m.n, diag, np.array([1 << i for i in range(m.n)], dtype=np.int64), False)


def default_dt(T: float) -> float:
    return min(1e-3, T / 1000.0)


def time_grid(sch: Schedule, dt: float | None = None):
    """Step start times, step sizes and stage values of s for RK4.

    Steps never straddle a breakpoint of the schedule; inside each segment the
    steps have size ``dt`` except a shorter final one landing on the segment
    end. Stage values are s at the step start, midpoint, and the left limit
    at the step end.
    """
    dt = default_dt(sch.T) if dt is None else float(dt)
    if not dt > 0:
        raise ValueError("dt must be positive")
    end = sch.end_time
    bps = [b for b in np.unique(sch.breakpoints()) if 0.0 < b < end]
    cuts = [0.0] + bps + [end]
    starts, steps = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        length = b - a
        if length <= 0:
            continue
        k = max(int(np.floor(length / dt + 1e-9)), 1)
        ts = a + dt * np.arange(k + 1)
        if length - k * dt > 1e-9 * dt:
            ts = np.append(ts, b)
        ts[-1] = b
        starts.append(ts[:-1])
        steps.append(np.diff(ts))
    if not starts:
        return np.empty(0), np.empty(0), np.empty((0, 3))
    t0 = np.concatenate(starts)
    h = np.concatenate(steps)
    svals = np.column_stack([
        sch.values(t0, side="right"),
        sch.values(t0 + 0.5 * h, side="right"),
        sch.values(t0 + h, side="left"),
    ])
    return t0, h, np.ascontiguousarray(svals)


def _check_norm(psi_full: np.ndarray) -> None:
    drift = abs(np.vdot(psi_full, psi_full).real - 1.0)
    if not drift <= NORM_TOLERANCE:
        raise IntegratorError(f"integrator unstable, reduce dt (norm drift {drift:.3e})")


def _prepare(sch: Schedule) -> Schedule:
    problems = validate(sch)
    if problems:
        raise ValueError("invalid schedule: " + "; ".join(problems))
    return sch


def evolve_rk4(m: IsingModel, sch: Schedule, dt: float | None = None, *, reduce: bool = True) -> np.ndarray:
    """Final state of RK4 integration from the uniform superposition."""
    _prepare(sch)
    system = _system(m, reduce)
    _, h, svals = time_grid(sch, dt)
    psi = system.initial()
    _kernels.rk4_forward(system.diag, system.masks, svals, h, psi, np.empty((0, system.dim), np.complex128))
    full = system.expand(psi)
    _check_norm(full)
    return full


def evolve_qaoa_exact(m: IsingModel, sch: Qaoa, *, reduce: bool = True) -> np.ndarray:
    """Exact bang-bang propagation layer by layer; identity after the last breakpoint."""
    if not isinstance(sch, Qaoa):
        raise TypeError("exact propagation requires a QAOA schedule")
    _prepare(sch)
    system = _system(m, reduce)
    psi = system.initial()
    durations = np.array(sch.durations(), dtype=np.float64).reshape(-1, 2)
    _kernels.qaoa_layers(system.diag, system.masks, durations, psi)
    return system.expand(psi)


def evolve(m: IsingModel, sch: Schedule, dt: float | None = None, *, exact_qaoa: bool = True) -> np.ndarray:
    if exact_qaoa and isinstance(sch, Qaoa):
        return evolve_qaoa_exact(m, sch)
    return evolve_rk4(m, sch, dt)


def measure_distribution(psi) -> Distribution:
    probs = np.abs(np.asarray(psi)) ** 2
    return Distribution(probs / probs.sum())


def sample_shots(d: Distribution, shots: int, seed=None) -> Distribution:
    """Empirical distribution of ``shots`` independent measurements."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.multinomial(shots, d.probs / d.probs.sum())
    return Distribution(counts / shots, shots=shots)


def expectation_and_gradient(m: IsingModel, sch: Continuous, weights, dt: float | None = None):
    """Expectation of a diagonal observable and its gradient in the path values.

    The gradient is the exact derivative of the discretized (RK4) objective,
    obtained by backpropagating through the integrator. The expectation uses
    the renormalized distribution, matching :func:`measure_distribution`.
    """
    if not isinstance(sch, Continuous):
        raise TypeError("gradients are available for continuous schedules only")
    _prepare(sch)
    system = _system(m)
    w = system.reduce_weights(np.asarray(weights, dtype=np.float64))
    norm_w = system.reduce_weights(np.ones(1 << m.n))
    t0, h, svals = time_grid(sch, dt)
    psi = system.initial()
    states = np.empty((h.shape[0] + 1, system.dim), np.complex128)
    _kernels.rk4_forward(system.diag, system.masks, svals, h, psi, states)
    prob = np.abs(psi) ** 2
    norm = float(prob @ norm_w)
    value = float(prob @ w) / norm
    _check_norm(system.expand(psi))
    # d(F/N) = (dF - value dN) / N evaluated through a single adjoint
    lam = (w - value * norm_w) * psi / norm
    step_grad = _kernels.rk4_adjoint(system.diag, system.masks, svals[:, 1].copy(), h, states, lam)
    index = np.clip(np.floor((t0 + 0.5 * h) * sch.M / sch.T).astype(np.int64), 0, sch.M - 1)
    grad = np.bincount(index, weights=step_grad, minlength=sch.M)
    return value, grad


def write_distribution_csv(d: Distribution, path) -> None:
    """``config,probability`` rows; config is the bit string x_0 x_1 ... x_{n-1}."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "probability"])
        for i in range(d.probs.shape[0]):
            bits = "".join(str(b) for b in index_to_bits(i, d.n))
            writer.writerow([bits, repr(float(d.probs[i]))])
