"""Outer-loop optimizers over schedule parameters."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "ObjectiveFn",
    "OptimizeResult",
    "NonFiniteObjective",
    "powell_minimize",
    "grid_search",
    "continuous_gradient_descent",
    "write_trace_csv",
]

LINE_XATOL = 1e-4
LINE_MAXITER = 50
POWELL_FTOL = 1e-6
MAX_GRID_POINTS = 10**6
MAX_GRID_DIMS = 3


class NonFiniteObjective(FloatingPointError):
    pass


@dataclass
class ObjectiveFn:
    """Scalar objective over a bounded parameter box.

    Every evaluation passes the parameters through ``project`` (defaults to
    clipping into ``bounds``) and is counted. ``value_and_grad``, when given,
    returns the value and gradient at projected parameters in one call.
    """

    func: Callable[[np.ndarray], float]
    bounds: list[tuple[float, float]]
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None
    value_and_grad: Optional[Callable[[np.ndarray], tuple[float, np.ndarray]]] = None
    record: bool = False
    evaluations: int = 0
    iteration: int = 0
    trace: list = field(default_factory=list)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds], dtype=np.float64)

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds], dtype=np.float64)

    def projected(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.project is not None:
            return np.asarray(self.project(x), dtype=np.float64)
        return np.clip(x, self.lower, self.upper)

    def _log(self, x, value):
        self.evaluations += 1
        if not np.isfinite(value):
            raise NonFiniteObjective(f"objective returned {value} at {x.tolist()}")
        if self.record:
            self.trace.append((self.iteration, x.copy(), float(value)))

    def __call__(self, x) -> float:
        x = self.projected(x)
        value = float(self.func(x))
        self._log(x, value)
        return value

    def gradient(self, x, fd_step: float = 1e-4) -> tuple[float, np.ndarray]:
        """Value and gradient, exact if available, else central differences."""
        x = self.projected(x)
        if self.value_and_grad is not None:
            value, grad = self.value_and_grad(x)
            self._log(x, float(value))
            return float(value), np.asarray(grad, dtype=np.float64)
        value = self(x)
        lo, hi = self.lower, self.upper
        grad = np.zeros_like(x)
        for k in range(x.shape[0]):
            plus, minus = x.copy(), x.copy()
            plus[k] = min(x[k] + fd_step, hi[k])
            minus[k] = max(x[k] - fd_step, lo[k])
            width = plus[k] - minus[k]
            if width > 0:
                grad[k] = (self(plus) - self(minus)) / width
        return value, grad


@dataclass
class OptimizeResult:
    best_params: np.ndarray
    best_value: float
    evaluations: int
    iterations: int
    trace: Optional[list] = None


class _Best:
    def __init__(self, x, value):
        self.x, self.value = x.copy(), value

    def offer(self, x, value):
        if value < self.value:
            self.x, self.value = x.copy(), value


def _alpha_range(x, u, lo, hi):
    a_min, a_max = -np.inf, np.inf
    for xk, uk, lk, hk in zip(x, u, lo, hi):
        if uk > 0:
            a_min, a_max = max(a_min, (lk - xk) / uk), min(a_max, (hk - xk) / uk)
        elif uk < 0:
            a_min, a_max = max(a_min, (hk - xk) / uk), min(a_max, (lk - xk) / uk)
    return a_min, a_max


def _line_minimize(f: ObjectiveFn, x, fx, u, best: _Best):
    """Bounded scalar minimization of f(x + a u) over the feasible a."""
    a_min, a_max = _alpha_range(x, u, f.lower, f.upper)
    if not np.isfinite(a_min) or a_max - a_min <= 1e-12:
        return x, fx

    def along(a):
        point = f.projected(x + a * u)
        value = f(point)
        best.offer(point, value)
        return value

    res = minimize_scalar(along, bounds=(a_min, a_max), method="bounded",
                          options={"xatol": LINE_XATOL, "maxiter": LINE_MAXITER})
    alpha, value = float(res.x), float(res.fun)
    # bounded Brent never probes the ends; optima at the box edge are common here
    for edge in (a_min, a_max):
        if abs(alpha - edge) < 2 * LINE_XATOL:
            edge_value = along(edge)
            if edge_value < value:
                alpha, value = edge, edge_value
    if value < fx:
        return f.projected(x + alpha * u), value
    return x, fx


def powell_minimize(f: ObjectiveFn, x0, max_iter: int = 10) -> OptimizeResult:
    """Powell's conjugate-direction method inside the parameter box.

    Starts from the coordinate axes, line-minimizes along each direction and
    swaps the direction of largest decrease for the net displacement when the
    standard extrapolation test allows. Stops after ``max_iter`` sweeps or when
    a sweep improves the value by less than a relative 1e-6.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    x = f.projected(x0)
    dim = x.shape[0]
    f.iteration = 0
    fx = f(x)
    best = _Best(x, fx)
    directions = list(np.eye(dim))
    iterations = 0
    for it in range(1, max_iter + 1):
        f.iteration = it
        iterations = it
        x_start, f_start = x.copy(), fx
        drop, drop_index = 0.0, 0
        for i, u in enumerate(directions):
            f_before = fx
            x, fx = _line_minimize(f, x, fx, u, best)
            if f_before - fx > drop:
                drop, drop_index = f_before - fx, i
        if 2.0 * (f_start - fx) <= POWELL_FTOL * (abs(f_start) + abs(fx)) + 1e-300:
            break
        shift = x - x_start
        if np.max(np.abs(shift)) == 0.0:
            break
        x_ext = f.projected(x + shift)
        f_ext = f(x_ext)
        best.offer(x_ext, f_ext)
        if f_ext < f_start:
            t = 2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - drop) ** 2 - drop * (f_start - f_ext) ** 2
            if t < 0.0:
                x, fx = _line_minimize(f, x, fx, shift, best)
                directions[drop_index] = directions[-1]
                directions[-1] = shift / np.max(np.abs(shift))
    return OptimizeResult(best.x, best.value, f.evaluations, iterations, f.trace if f.record else None)


def _lattice(lo: float, hi: float, resolution: float) -> np.ndarray:
    count = int(np.floor((hi - lo) / resolution + 1e-9)) + 1
    return np.round(lo + resolution * np.arange(count), 12)


def grid_search(f: ObjectiveFn, resolution: float = 0.1) -> OptimizeResult:
    """Exhaustive lattice search; ties go to the lexicographically first point."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if len(f.bounds) > MAX_GRID_DIMS:
        raise ValueError(f"grid search supports at most {MAX_GRID_DIMS} parameters")
    axes = [_lattice(lo, hi, resolution) for lo, hi in f.bounds]
    size = int(np.prod([a.shape[0] for a in axes]))
    if size > MAX_GRID_POINTS:
        raise ValueError(f"lattice has {size} points, limit is {MAX_GRID_POINTS}")
    f.iteration = 0
    best = None
    for point in itertools.product(*axes):
        x = np.array(point)
        value = f(x)
        if best is None or value < best.value:
            best = _Best(x, value)
    return OptimizeResult(best.x, best.value, f.evaluations, 1, f.trace if f.record else None)


def continuous_gradient_descent(f: ObjectiveFn, M: int, max_iter: int = 100, *,
                                initial: float = 0.5, step: float = 0.1, min_step: float = 1e-6,
                                gtol: float = 1e-5, fd_step: float = 1e-4) -> OptimizeResult:
    """Projected descent over M path values in [0, 1] from a constant path.

    The search direction is the projected negative gradient scaled to unit
    max-norm, so the first trial step moves each value by at most ``step``.
    The step halves until the objective decreases; iteration stops when no
    step down to ``min_step`` helps or the projected gradient is below
    ``gtol``.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    if len(f.bounds) != M:
        raise ValueError(f"objective has {len(f.bounds)} parameters, expected {M}")
    lo, hi = f.lower, f.upper
    x = f.projected(np.full(M, initial))
    iterations = 0
    fx = None
    for it in range(1, max_iter + 1):
        f.iteration = it
        iterations = it
        value, grad = f.gradient(x, fd_step)
        fx = value if fx is None else fx
        g = grad.copy()
        g[(x <= lo) & (g > 0)] = 0.0
        g[(x >= hi) & (g < 0)] = 0.0
        gnorm = np.max(np.abs(g))
        if gnorm < gtol:
            break
        direction = -g / gnorm
        eta = step
        moved = False
        while eta >= min_step:
            trial = f.projected(x + eta * direction)
            f_trial = f(trial)
            if f_trial < fx:
                x, fx, moved = trial, f_trial, True
                break
            eta *= 0.5
        if not moved:
            break
    if fx is None:
        fx = f(x)
    return OptimizeResult(x, fx, f.evaluations, iterations, f.trace if f.record else None)


def write_trace_csv(trace, path) -> None:
    """Rows of (iteration, params..., value)."""
    width = max((len(p) for _, p, _ in trace), default=0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration"] + [f"param_{k}" for k in range(width)] + ["value"])
        for it, params, value in trace:
            writer.writerow([it] + [repr(float(v)) for v in params] + [repr(value)])
