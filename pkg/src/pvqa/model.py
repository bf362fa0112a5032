"""QUBO and Ising Hamiltonians, the QUBO -> Ising transform and energy evaluation.

Configurations are indexed as integers: bit ``i`` of index ``b`` is the binary
variable ``x_i`` and the spin value is ``sigma_i = 2 * x_i - 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Qubo",
    "QuboPair",
    "IsingModel",
    "qubo_to_ising",
    "rescale_ising",
    "eval_qubo",
    "eval_cost",
    "index_to_bits",
    "bits_to_index",
    "all_bits",
    "as_bits",
]

# Chunk size for full-space energy tables; keeps temporaries small for n up to 24.
_CHUNK_BITS = 16


def index_to_bits(index: int, n: int) -> np.ndarray:
    """Binary configuration (x_0, ..., x_{n-1}) encoded by an integer index."""
    return ((int(index) >> np.arange(n)) & 1).astype(np.int8)


def bits_to_index(bits) -> int:
    bits = np.asarray(bits, dtype=np.int64)
    return int(np.dot(bits, 1 << np.arange(bits.shape[0], dtype=np.int64)))


def all_bits(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows of binary configurations for indices ``start .. stop-1``."""
    stop = 1 << n if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.float64)


def as_bits(x, n: int) -> np.ndarray:
    """Validate a binary configuration of length ``n``."""
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected {n} variables, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("configuration entries must be 0 or 1")
    return x.astype(np.int64)


def _canonical_pairs(n: int, pairs: Mapping, label: str) -> dict[tuple[int, int], float]:
    out: dict[tuple[int, int], float] = {}
    for key, value in pairs.items():
        i, j = (int(k) for k in key)
        if i == j:
            raise ValueError(f"{label} key ({i}, {j}) must join two distinct variables")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"{label} key ({i}, {j}) out of range for n={n}")
        pair = (i, j) if i < j else (j, i)
        if pair in out:
            raise ValueError(f"duplicate {label} pair {pair}")
        out[pair] = float(value)
    return dict(sorted(out.items()))


def _canonical_linear(n: int, linear: Mapping, label: str) -> dict[int, float]:
    out: dict[int, float] = {}
    for key, value in linear.items():
        i = int(key)
        if not 0 <= i < n:
            raise ValueError(f"{label} index {i} out of range for n={n}")
        out[i] = float(value)
    return dict(sorted(out.items()))


class _Polynomial:
    """Shared storage and serialization for quadratic polynomials."""

    n: int
    offset: float

    def _linear_terms(self) -> dict[int, float]:
        raise NotImplementedError

    def _quadratic_terms(self) -> dict[tuple[int, int], float]:
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "linear": [[i, v] for i, v in sorted(self._linear_terms().items())],
            "quadratic": [[i, j, v] for (i, j), v in sorted(self._quadratic_terms().items())],
            "offset": self.offset,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @cached_property
    def _arrays(self):
        lin = np.zeros(self.n)
        for i, v in self._linear_terms().items():
            lin[i] = v
        quad = self._quadratic_terms()
        rows = np.array([k[0] for k in quad], dtype=np.int64)
        cols = np.array([k[1] for k in quad], dtype=np.int64)
        vals = np.array(list(quad.values()), dtype=np.float64)
        return lin, rows, cols, vals

    def _table(self, values: np.ndarray) -> np.ndarray:
        """Energies for every configuration given per-variable ``values(x)``."""
        lin, rows, cols, vals = self._arrays
        n = self.n
        out = np.empty(1 << n)
        chunk = 1 << min(n, _CHUNK_BITS)
        for start in range(0, 1 << n, chunk):
            v = values(all_bits(n, start, start + chunk))
            e = v @ lin + self.offset
            if vals.size:
                e += (v[:, rows] * v[:, cols]) @ vals
            out[start:start + chunk] = e
        return out


@dataclass(frozen=True, eq=True)
class Qubo(_Polynomial):
    """Quadratic binary polynomial sum q_ij x_i x_j + sum q_ii x_i + Q_0."""

    n: int
    linear: Mapping[int, float] = field(default_factory=dict)
    quadratic: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        object.__setattr__(self, "linear", _canonical_linear(self.n, self.linear, "linear"))
        object.__setattr__(self, "quadratic", _canonical_pairs(self.n, self.quadratic, "quadratic"))
        object.__setattr__(self, "offset", float(self.offset))

    def _linear_terms(self):
        return self.linear

    def _quadratic_terms(self):
        return self.quadratic

    def __hash__(self):
        return hash((self.n, tuple(self.linear.items()), tuple(self.quadratic.items()), self.offset))

    def __add__(self, other: "Qubo") -> "Qubo":
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} != {other.n}")
        linear = dict(self.linear)
        for i, v in other.linear.items():
            linear[i] = linear.get(i, 0.0) + v
        quad = dict(self.quadratic)
        for k, v in other.quadratic.items():
            quad[k] = quad.get(k, 0.0) + v
        return Qubo(self.n, linear, quad, self.offset + other.offset)

    def scaled(self, factor: float) -> "Qubo":
        return Qubo(
            self.n,
            {i: factor * v for i, v in self.linear.items()},
            {k: factor * v for k, v in self.quadratic.items()},
            factor * self.offset,
        )

    def energy(self, x) -> float:
        return eval_qubo(self, x)

    def energies(self) -> np.ndarray:
        """Energy of every configuration, indexed by configuration integer."""
        return self._table(lambda bits: bits)

    def neighbors(self) -> list[list[tuple[int, float]]]:
        """Adjacency list of quadratic couplings per variable."""
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for (i, j), v in self.quadratic.items():
            adj[i].append((j, v))
            adj[j].append((i, v))
        return adj

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Qubo":
        return cls(
            int(data["n"]),
            {int(i): v for i, v in data.get("linear", [])},
            {(int(i), int(j)): v for i, j, v in data.get("quadratic", [])},
            data.get("offset", 0.0),
        )

    @classmethod
    def from_json(cls, text: str) -> "Qubo":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class QuboPair:
    """Objective and (unweighted) constraint QUBOs with the penalty coefficient A."""

    objective: Qubo
    constraint: Qubo
    penalty_coefficient: float

    def __post_init__(self):
        if self.objective.n != self.constraint.n:
            raise ValueError(
                f"objective has {self.objective.n} variables, constraint has {self.constraint.n}"
            )
        if not self.penalty_coefficient > 0:
            raise ValueError("penalty_coefficient must be positive")

    @property
    def n(self) -> int:
        return self.objective.n

    def full(self) -> Qubo:
        """Objective plus A times the constraint."""
        return self.objective + self.constraint.scaled(self.penalty_coefficient)

    def constraint_energy(self, x) -> float:
        return self.penalty_coefficient * eval_qubo(self.constraint, x)


@dataclass(frozen=True, eq=True)
class IsingModel(_Polynomial):
    """Ising Hamiltonian sum J_ij s_i s_j + sum h_i s_i + H_0 over s_i in {-1, +1}."""

    n: int
    couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)
    fields: Mapping[int, float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "couplings", _canonical_pairs(self.n, self.couplings, "coupling"))
        object.__setattr__(self, "fields", _canonical_linear(self.n, self.fields, "field"))
        object.__setattr__(self, "offset", float(self.offset))

    def _linear_terms(self):
        return self.fields

    def _quadratic_terms(self):
        return self.couplings

    def __hash__(self):
        return hash((self.n, tuple(self.couplings.items()), tuple(self.fields.items()), self.offset))

    def energy(self, spins) -> float:
        s = np.asarray(spins, dtype=np.float64)
        if s.shape != (self.n,):
            raise ValueError(f"dimension mismatch: expected {self.n} spins, got shape {s.shape}")
        e = self.offset
        for i, h in self.fields.items():
            e += h * s[i]
        for (i, j), jij in self.couplings.items():
            e += jij * s[i] * s[j]
        return float(e)

    def energies(self) -> np.ndarray:
        """Diagonal of the Hamiltonian: energy per configuration index."""
        return self._table(lambda bits: 2.0 * bits - 1.0)

    @cached_property
    def diagonal(self) -> np.ndarray:
        diag = self.energies()
        diag.setflags(write=False)
        return diag

    def max_magnitude(self) -> float:
        mags = [abs(v) for v in self.couplings.values()] + [abs(v) for v in self.fields.values()]
        return max(mags, default=0.0)

    def has_fields(self) -> bool:
        return any(v != 0.0 for v in self.fields.values())

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "IsingModel":
        return cls(
            int(data["n"]),
            {(int(i), int(j)): v for i, j, v in data.get("quadratic", [])},
            {int(i): v for i, v in data.get("linear", [])},
            data.get("offset", 0.0),
        )

    @classmethod
    def from_json(cls, text: str) -> "IsingModel":
        return cls.from_json_dict(json.loads(text))


def qubo_to_ising(q: Qubo) -> IsingModel:
    """Substitute x_i = (s_i + 1) / 2 and collect terms."""
    fields = {i: 0.0 for i in range(q.n)}
    couplings: dict[tuple[int, int], float] = {}
    offset = q.offset
    for i, v in q.linear.items():
        fields[i] += v / 2.0
        offset += v / 2.0
    for (i, j), v in q.quadratic.items():
        couplings[(i, j)] = v / 4.0
        fields[i] += v / 4.0
        fields[j] += v / 4.0
        offset += v / 4.0
    fields = {i: v for i, v in fields.items() if v != 0.0}
    return IsingModel(q.n, couplings, fields, offset)


def rescale_ising(m: IsingModel) -> tuple[IsingModel, float]:
    """Divide all coefficients so the largest |J_ij| or |h_i| equals one."""
    scale = m.max_magnitude()
    if scale == 0.0:
        raise ValueError("degenerate model: all couplings and fields are zero")
    if scale == 1.0:
        return m, 1.0
    scaled = IsingModel(
        m.n,
        {k: v / scale for k, v in m.couplings.items()},
        {i: v / scale for i, v in m.fields.items()},
        m.offset / scale,
    )
    return scaled, scale


def eval_qubo(q: Qubo, x) -> float:
    bits = as_bits(x, q.n)
    e = q.offset
    for i, v in q.linear.items():
        e += v * bits[i]
    for (i, j), v in q.quadratic.items():
        e += v * bits[i] * bits[j]
    return float(e)


def eval_cost(pair: QuboPair, x) -> tuple[float, float]:
    """Objective cost and objective-plus-weighted-constraint cost of ``x``."""
    c = eval_qubo(pair.objective, x)
    return c, c + pair.constraint_energy(x)


def qubo_from_terms(n: int, terms: Iterable[tuple[tuple[int, ...], float]], offset: float = 0.0) -> Qubo:
    """Accumulate (indices, coefficient) terms, folding x_i x_i into x_i."""
    linear: dict[int, float] = {}
    quad: dict[tuple[int, int], float] = {}
    for idx, v in terms:
        if len(idx) == 1 or idx[0] == idx[1]:
            linear[idx[0]] = linear.get(idx[0], 0.0) + v
        else:
            i, j = sorted(idx)
            quad[(i, j)] = quad.get((i, j), 0.0) + v
    return Qubo(n, linear, quad, offset)
