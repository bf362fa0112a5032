"""Greedy repair onto the feasible set and the induced map on distributions.

The repair energy is Q' = Q_obj + A' * penalty(x) with the piecewise-linear
penalty of the constraint. When A' exceeds the largest possible single-flip
change of Q_obj, every local minimum of Q' under single flips is feasible, so
steepest single-flip descent always ends on a feasible configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dynamics import Distribution
from .model import Qubo, all_bits, as_bits, bits_to_index
from .problems import ConstraintSpec, KHot, feasible_mask

__all__ = [
    "RepairModel",
    "RepairError",
    "linear_penalty",
    "delta_q_bound",
    "default_a_prime",
    "greedy_repair",
    "repair_table",
    "transform_distribution",
    "repair_trace_json",
]

EPSILON = 1e-6
_CHUNK_BITS = 16


class RepairError(RuntimeError):
    """Descent failed to terminate; unreachable when the model invariants hold."""


def _lhs(c: ConstraintSpec, x: np.ndarray):
    return x @ c.coefficients(x.shape[-1])


def _penalty_from_lhs(c: ConstraintSpec, lhs):
    lo, hi = c.bounds()
    if isinstance(c, KHot):
        return np.abs(lhs - c.k)
    return np.maximum(0, np.maximum(lhs - hi, lo - lhs))


def linear_penalty(c: ConstraintSpec, x) -> float:
    """Distance of the constraint sum from its admissible range; zero iff feasible."""
    x = np.asarray(x, dtype=np.int64)
    if isinstance(c, KHot):
        x = as_bits(x, len(x))
    else:
        x = as_bits(x, len(c.a))
    return float(_penalty_from_lhs(c, int(_lhs(c, x))))


def delta_q_bound(q: Qubo) -> float:
    """max_i (|q_ii| + sum_j |q_ij|), a bound on |Q(x) - Q(x with bit i flipped)|."""
    if q.n == 0:
        return 0.0
    row = np.zeros(q.n)
    for i, v in q.linear.items():
        row[i] += abs(v)
    for (i, j), v in q.quadratic.items():
        row[i] += abs(v)
        row[j] += abs(v)
    return float(row.max())


def default_a_prime(q: Qubo) -> float:
    return delta_q_bound(q) * (1.0 + EPSILON) + EPSILON


@dataclass(frozen=True)
class RepairModel:
    """Objective, constraint and the repair penalty weight A'."""

    objective: Qubo
    constraint: ConstraintSpec
    a_prime: float

    def __post_init__(self):
        bound = delta_q_bound(self.objective)
        if not self.a_prime > bound:
            raise ValueError(f"A' = {self.a_prime} must exceed the flip bound {bound}")
        problems = self.constraint.violations()
        if problems:
            raise ValueError("; ".join(problems))
        if isinstance(self.constraint, KHot):
            if any(not 0 <= i < self.n for i in self.constraint.subset):
                raise ValueError("k-hot subset index out of range")
        elif len(self.constraint.a) != self.n:
            raise ValueError(f"dimension mismatch: constraint has {len(self.constraint.a)} coefficients")

    @classmethod
    def with_default(cls, objective: Qubo, constraint: ConstraintSpec) -> "RepairModel":
        return cls(objective, constraint, default_a_prime(objective))

    @property
    def n(self) -> int:
        return self.objective.n

    def energy(self, x) -> float:
        """Q'(x)."""
        return self.objective.energy(x) + self.a_prime * linear_penalty(self.constraint, x)

    @cached_property
    def cost_table(self) -> np.ndarray:
        """Q_obj of every configuration index."""
        return self.objective.energies()

    @cached_property
    def energy_table(self) -> np.ndarray:
        """Q' of every configuration index."""
        n = self.n
        a = self.constraint.coefficients(n).astype(np.float64)
        pen = np.empty(1 << n)
        chunk = 1 << min(n, _CHUNK_BITS)
        for start in range(0, 1 << n, chunk):
            pen[start:start + chunk] = _penalty_from_lhs(self.constraint, all_bits(n, start, start + chunk) @ a)
        return self.cost_table + self.a_prime * pen

    @cached_property
    def feasible(self) -> np.ndarray:
        return feasible_mask(self.constraint, self.n)


def _tol(value) -> float:
    return 1e-9 * (1.0 + np.abs(value))


def greedy_repair(rm: RepairModel, x, trace: bool = False):
    """Steepest single-flip descent on Q' from ``x``.

    Ties among the best flips go to the lowest variable index, and a flip is
    taken only if it lowers Q' by more than a relative 1e-9. Returns the local
    minimum, plus the list of flipped indices when ``trace`` is set.
    """
    n = rm.n
    bits = as_bits(np.asarray(x, dtype=np.int64), n).copy()
    lin = np.zeros(n)
    for i, v in rm.objective.linear.items():
        lin[i] = v
    adj = rm.objective.neighbors()
    a = rm.constraint.coefficients(n)
    lhs = int(bits @ a)
    current = rm.energy(bits)
    flips = []
    for _ in range(1 << n):
        base_pen = _penalty_from_lhs(rm.constraint, lhs)
        candidates = np.empty(n)
        for i in range(n):
            sign = 1 - 2 * bits[i]
            field = lin[i] + sum(v * bits[j] for j, v in adj[i])
            new_pen = _penalty_from_lhs(rm.constraint, lhs + sign * a[i])
            candidates[i] = current + sign * field + rm.a_prime * (new_pen - base_pen)
        best_value = candidates.min()
        if not best_value < current - _tol(current):
            return (bits, flips) if trace else bits
        best = int(np.flatnonzero(candidates <= best_value + _tol(best_value))[0])
        lhs += (1 - 2 * bits[best]) * int(a[best])
        bits[best] ^= 1
        current = candidates[best]
        flips.append(best)
    raise RepairError("repair exceeded 2^n flips")


def repair_table(rm: RepairModel) -> np.ndarray:
    """Repair image index for every configuration index, computed in bulk.

    Applies the same descent rule as :func:`greedy_repair` to all
    configurations at once, using the precomputed Q' table.
    """
    n = rm.n
    dim = 1 << n
    table = rm.energy_table
    step = np.arange(dim)
    chunk = 1 << min(n, _CHUNK_BITS)
    flips = (1 << np.arange(n))[None, :]
    for start in range(0, dim, chunk):
        idx = np.arange(start, min(start + chunk, dim))
        cand = table[idx[:, None] ^ flips]
        best_value = cand.min(axis=1)
        best = np.argmax(cand <= (best_value + _tol(best_value))[:, None], axis=1)
        current = table[idx]
        move = best_value < current - _tol(current)
        step[idx[move]] = idx[move] ^ (1 << best[move])
    # every move strictly lowers Q', so following the moves reaches a fixed point
    image = step
    for _ in range(n + dim.bit_length() + 1):
        nxt = image[image]
        if np.array_equal(nxt, image):
            return image
        image = nxt
    raise RepairError("repair table did not converge")


def transform_distribution(d: Distribution, rm: RepairModel, top_k: int | None = None,
                           image: np.ndarray | None = None) -> Distribution:
    """Push the mass of every configuration onto its repair image.

    For shot distributions ``top_k`` keeps only the ``top_k`` repaired shots
    of lowest objective cost and renormalizes over them. Exact distributions
    ignore ``top_k``.
    """
    if d.n != rm.n:
        raise ValueError(f"dimension mismatch: distribution n={d.n}, model n={rm.n}")
    image = repair_table(rm) if image is None else image
    dim = 1 << rm.n
    if top_k is None or d.shots is None or top_k >= d.shots:
        return Distribution(np.bincount(image, weights=d.probs, minlength=dim), shots=d.shots)
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    counts = np.bincount(image, weights=d.counts, minlength=dim).astype(np.int64)
    occupied = np.flatnonzero(counts)
    order = occupied[np.lexsort((occupied, rm.cost_table[occupied]))]
    kept = np.zeros(dim, dtype=np.int64)
    remaining = top_k
    for idx in order:
        take = min(counts[idx], remaining)
        kept[idx] = take
        remaining -= take
        if remaining == 0:
            break
    return Distribution(kept / top_k, shots=top_k)


def repair_trace_json(rm: RepairModel, x) -> str:
    """Flip sequence of one repair as JSON, for debugging."""
    start = as_bits(np.asarray(x, dtype=np.int64), rm.n)
    end, flips = greedy_repair(rm, start, trace=True)
    return json.dumps({
        "start": start.tolist(),
        "flips": flips,
        "end": end.tolist(),
        "start_index": bits_to_index(start),
        "end_index": bits_to_index(end),
        "q_prime": [rm.energy(start), rm.energy(end)],
    })
