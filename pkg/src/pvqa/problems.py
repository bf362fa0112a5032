"""Graph partitioning and quadratic knapsack instances and their QUBO encodings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .model import Qubo, QuboPair, all_bits, as_bits, index_to_bits

__all__ = [
    "GppInstance",
    "QkpInstance",
    "KHot",
    "Inequality",
    "ConstraintSpec",
    "ConstraintConditionError",
    "gen_gpp",
    "gpp_qubo",
    "gen_qkp_base",
    "derive_qkp",
    "qkp_qubo",
    "build_pair",
    "constraint_of",
    "is_feasible",
    "feasible_mask",
    "brute_force_optima",
    "parse_qkp_benchmark",
    "format_qkp_benchmark",
    "instance_to_json",
    "instance_from_json",
    "load_instance",
    "save_instance",
    "qkp_ensemble",
]

MAX_BRUTE_FORCE_N = 24


class ConstraintConditionError(ValueError):
    """A side condition required for guaranteed repair does not hold."""


@dataclass(frozen=True)
class GppInstance:
    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    seed: int | None = None

    def __post_init__(self):
        if self.n_nodes % 2:
            raise ValueError("nodes must be even")
        canon = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range")
            pair = (min(i, j), max(i, j))
            if pair in canon:
                raise ValueError(f"duplicate edge {pair}")
            canon.add(pair)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def n(self) -> int:
        return self.n_nodes

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def cut_size(self, x) -> int:
        x = as_bits(x, self.n_nodes)
        return sum(int(x[i] != x[j]) for i, j in self.edges)


@dataclass(frozen=True)
class QkpInstance:
    """Quadratic knapsack: profits p_ij (i <= j), integer weights and capacity."""

    n_items: int
    profits: Mapping[tuple[int, int], float]
    weights: tuple[int, ...]
    capacity: int
    name: str = ""

    def __post_init__(self):
        weights = tuple(int(w) for w in self.weights)
        if len(weights) != self.n_items:
            raise ValueError(f"expected {self.n_items} weights, got {len(weights)}")
        if any(w < 1 for w in weights):
            raise ValueError("weights must be positive integers")
        if int(self.capacity) < 1:
            raise ValueError("capacity must be a positive integer")
        profits = {}
        for (i, j), p in self.profits.items():
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            if not (0 <= i and j < self.n_items):
                raise ValueError(f"profit key ({i}, {j}) out of range")
            if p < 0:
                raise ValueError("profits must be nonnegative")
            if p != 0:
                profits[(i, j)] = float(p)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "capacity", int(self.capacity))
        object.__setattr__(self, "profits", dict(sorted(profits.items())))

    def __hash__(self):
        return hash((self.n_items, tuple(self.profits.items()), self.weights, self.capacity))

    @property
    def n(self) -> int:
        return self.n_items

    def profit_matrix(self) -> np.ndarray:
        mat = np.zeros((self.n_items, self.n_items))
        for (i, j), p in self.profits.items():
            mat[i, j] = p
        return mat

    def profit(self, x) -> float:
        x = as_bits(x, self.n_items)
        return float(sum(p for (i, j), p in self.profits.items() if x[i] and x[j]))


Instance = Union[GppInstance, QkpInstance]


@dataclass(frozen=True)
class KHot:
    """Exactly ``k`` of the variables in ``subset`` are one."""

    k: int
    subset: tuple[int, ...]

    def coefficients(self, n: int) -> np.ndarray:
        a = np.zeros(n, dtype=np.int64)
        a[list(self.subset)] = 1
        return a

    def bounds(self) -> tuple[int, int]:
        return self.k, self.k

    def violations(self) -> list[str]:
        if not 0 <= self.k <= len(self.subset):
            return [f"k-hot condition violated: k={self.k} not within [0, |V'|={len(self.subset)}]"]
        return []


@dataclass(frozen=True)
class Inequality:
    """b_min <= sum_i a_i x_i <= b_max with integer data."""

    a: tuple[int, ...]
    b_min: int
    b_max: int

    def coefficients(self, n: int) -> np.ndarray:
        a = np.asarray(self.a, dtype=np.int64)
        if a.shape[0] != n:
            raise ValueError(f"dimension mismatch: constraint has {a.shape[0]} coefficients, config has {n}")
        return a

    def bounds(self) -> tuple[int, int]:
        return self.b_min, self.b_max

    def violations(self) -> list[str]:
        out = []
        a = np.asarray(self.a, dtype=np.int64)
        max_abs = int(np.abs(a).max(initial=0))
        if self.b_max - self.b_min < max_abs - 1:
            out.append(
                f"condition 2 violated: b_max - b_min = {self.b_max - self.b_min} "
                f"< max|a_i| - 1 = {max_abs - 1}"
            )
            return out
        # With condition 2, single-variable moves from the minimum to the maximum
        # reachable sum step by at most max|a_i| and cannot jump over [b_min, b_max].
        lo = int(a[a < 0].sum())
        hi = int(a[a > 0].sum())
        if self.b_max < lo or self.b_min > hi:
            out.append("condition 3 violated: no feasible solution exists")
        return out


ConstraintSpec = Union[KHot, Inequality]


def gen_gpp(n_nodes: int, density: float = 0.5, seed: int | None = None) -> GppInstance:
    """Random graph with each possible edge present independently with ``density``."""
    if n_nodes % 2:
        raise ValueError("nodes must be even")
    if n_nodes < 4:
        raise ValueError("nodes must be at least 4")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(n_nodes, k=1)
    keep = rng.random(rows.shape[0]) < density
    edges = tuple(zip(rows[keep].tolist(), cols[keep].tolist()))
    return GppInstance(n_nodes, edges, seed)


def gpp_qubo(g: GppInstance, A: float) -> QuboPair:
    """Cut-count objective and squared balance penalty."""
    n = g.n_nodes
    deg = g.degrees
    objective = Qubo(n, {i: float(deg[i]) for i in range(n) if deg[i]}, {e: -2.0 for e in g.edges})
    # (sum x - n/2)^2 with x_i^2 = x_i
    constraint = Qubo(
        n,
        {i: 1.0 - n for i in range(n)},
        {(i, j): 2.0 for i in range(n) for j in range(i + 1, n)},
        n * n / 4.0,
    )
    return QuboPair(objective, constraint, A)


def gen_qkp_base(n_items: int = 100, density: float = 1.0, seed: int | None = None) -> QkpInstance:
    """Synthetic instance in the style of the standard QKP benchmark generator.

    Profits are nonzero with probability ``density`` and uniform on 1..100,
    weights uniform on 1..50, capacity uniform on 50..sum(weights).
    """
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(n_items)
    values = rng.integers(1, 101, size=rows.shape[0])
    keep = rng.random(rows.shape[0]) < density
    profits = {(int(i), int(j)): int(v) for i, j, v in zip(rows[keep], cols[keep], values[keep])}
    weights = tuple(int(w) for w in rng.integers(1, 51, size=n_items))
    capacity = int(rng.integers(50, max(sum(weights), 50) + 1))
    name = f"synthetic_{n_items}_{int(density * 100)}_{seed}"
    return QkpInstance(n_items, profits, weights, capacity, name)


def derive_qkp(base: QkpInstance, n: int) -> QkpInstance:
    """First ``n`` items of a 100-item instance with capacity floor(n C / 100)."""
    if base.n_items != 100:
        raise ValueError(f"base instance must have 100 items, has {base.n_items}")
    if n > 100:
        raise ValueError(f"cannot derive {n} items from a 100-item instance")
    if n < 2:
        raise ValueError("n must be at least 2")
    profits = {(i, j): p for (i, j), p in base.profits.items() if j < n}
    name = f"{base.name}_n{n}" if base.name else ""
    return QkpInstance(n, profits, base.weights[:n], n * base.capacity // 100, name)


def qkp_qubo(q: QkpInstance, A: float) -> QuboPair:
    """Negated profit objective and the squared normalized-weight penalty."""
    n = q.n_items
    lin = {i: -p for (i, j), p in q.profits.items() if i == j}
    quad = {(i, j): -p for (i, j), p in q.profits.items() if i != j}
    objective = Qubo(n, lin, quad)
    w = np.asarray(q.weights, dtype=np.float64) / q.capacity
    constraint = Qubo(
        n,
        {i: w[i] ** 2 for i in range(n)},
        {(i, j): 2.0 * w[i] * w[j] for i in range(n) for j in range(i + 1, n)},
    )
    return QuboPair(objective, constraint, A)


def build_pair(instance: Instance, A: float) -> QuboPair:
    if isinstance(instance, GppInstance):
        return gpp_qubo(instance, A)
    if isinstance(instance, QkpInstance):
        return qkp_qubo(instance, A)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def constraint_of(instance: Instance, check: bool = True) -> ConstraintSpec:
    """Constraint of an instance; with ``check``, raises if a repair side condition fails."""
    if isinstance(instance, GppInstance):
        spec: ConstraintSpec = KHot(instance.n_nodes // 2, tuple(range(instance.n_nodes)))
    elif isinstance(instance, QkpInstance):
        spec = Inequality(instance.weights, 0, instance.capacity)
    else:
        raise TypeError(f"unsupported instance type {type(instance).__name__}")
    problems = spec.violations() if check else []
    if problems:
        raise ConstraintConditionError("; ".join(problems))
    return spec


def constraint_lhs(c: ConstraintSpec, x) -> int:
    if isinstance(c, KHot):
        return int(sum(int(x[i]) for i in c.subset))
    return int(np.dot(c.coefficients(len(x)), x))


def is_feasible(c: ConstraintSpec, x) -> bool:
    x = np.asarray(x, dtype=np.int64)
    if isinstance(c, Inequality):
        x = as_bits(x, len(c.a))
    lo, hi = c.bounds()
    return lo <= constraint_lhs(c, x) <= hi


def feasible_mask(c: ConstraintSpec, n: int) -> np.ndarray:
    """Feasibility of every configuration index."""
    a = c.coefficients(n).astype(np.float64)
    lo, hi = c.bounds()
    out = np.empty(1 << n, dtype=bool)
    chunk = 1 << min(n, 16)
    for start in range(0, 1 << n, chunk):
        lhs = all_bits(n, start, start + chunk) @ a
        out[start:start + chunk] = (lhs >= lo) & (lhs <= hi)
    return out


def brute_force_optima(instance: Instance, pair: QuboPair, rtol: float = 1e-9):
    """Exact minimizers of the objective over the feasible set.

    Returns ``(S, c_opt)`` where ``S`` is a frozenset of bit tuples containing
    every tied optimum.
    """
    n = pair.n
    if n > MAX_BRUTE_FORCE_N:
        raise ValueError(f"n={n} too large for enumeration (max {MAX_BRUTE_FORCE_N})")
    c = constraint_of(instance, check=False)
    feasible = feasible_mask(c, n)
    if not feasible.any():
        raise ValueError("empty feasible set")
    cost = pair.objective.energies()
    c_opt = float(cost[feasible].min())
    tol = rtol * max(1.0, abs(c_opt))
    idx = np.flatnonzero(feasible & (cost <= c_opt + tol))
    S = frozenset(tuple(int(b) for b in index_to_bits(i, n)) for i in idx)
    return S, c_opt


def optimum_indices(S, n: int) -> np.ndarray:
    return np.array(sorted(int(np.dot(s, 1 << np.arange(n))) for s in S), dtype=np.int64)


def qkp_ensemble(n_items: int, count: int, seed: int = 0, density: float = 1.0) -> list[QkpInstance]:
    """``count`` derived instances from seeded 100-item bases.

    Seeds whose derived capacity breaks the repair side conditions are skipped,
    so the result is deterministic for a given ``seed``.
    """
    out = []
    s = seed
    while len(out) < count:
        inst = derive_qkp(gen_qkp_base(100, density, s), n_items)
        try:
            constraint_of(inst)
        except ConstraintConditionError:
            pass
        else:
            out.append(inst)
        s += 1
    return out


class BenchmarkParseError(ValueError):
    pass


def format_qkp_benchmark(q: QkpInstance) -> str:
    """Render in the layout of the classic ``100_100_i`` QKP files."""
    n = q.n_items
    mat = q.profit_matrix()

    def num(v):
        return str(int(v)) if float(v).is_integer() else repr(float(v))

    lines = [q.name or "qkp", str(n), " ".join(num(mat[i, i]) for i in range(n))]
    for i in range(n - 1):
        lines.append(" ".join(num(mat[i, j]) for j in range(i + 1, n)))
    lines += ["", "0", str(q.capacity), " ".join(str(w) for w in q.weights), ""]
    return "\n".join(lines)


def parse_qkp_benchmark(text: str) -> QkpInstance:
    """Parse the classic QKP benchmark layout.

    Layout: name line, item count, linear profits, n-1 rows of the strict upper
    triangle, blank line, constraint type (0), capacity, weights.
    """
    raw = text.splitlines()
    # (line number, content) for nonblank lines
    lines = [(k + 1, ln.strip()) for k, ln in enumerate(raw) if ln.strip()]
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 0
            raise BenchmarkParseError(f"line {last + 1}: unexpected end of file, expected {what}")
        item = lines[pos]
        pos += 1
        return item

    def numbers(item, count, what):
        lineno, content = item
        try:
            vals = [float(tok) for tok in content.split()]
        except ValueError as exc:
            raise BenchmarkParseError(f"line {lineno}: malformed {what}: {exc}") from None
        if len(vals) != count:
            raise BenchmarkParseError(
                f"line {lineno}: {what} has {len(vals)} values, expected {count}"
            )
        return vals

    name = take("instance name")[1]
    lineno, content = take("item count")
    try:
        n = int(content)
    except ValueError:
        raise BenchmarkParseError(f"line {lineno}: malformed item count {content!r}") from None
    if n < 1:
        raise BenchmarkParseError(f"line {lineno}: item count must be positive")
    profits: dict[tuple[int, int], float] = {}
    for i, v in enumerate(numbers(take("linear profits"), n, "linear profit row")):
        profits[(i, i)] = v
    for i in range(n - 1):
        row = numbers(take(f"profit row {i + 1}"), n - 1 - i, f"profit row {i + 1}")
        for off, v in enumerate(row):
            profits[(i, i + 1 + off)] = v
    ctype = numbers(take("constraint type"), 1, "constraint type")[0]
    if ctype != 0:
        raise BenchmarkParseError(f"line {lines[pos - 1][0]}: unsupported constraint type {ctype}")
    item = take("capacity")
    cap = numbers(item, 1, "capacity")[0]
    weights_item = take("weights")
    weights = numbers(weights_item, n, "weight row")
    if pos != len(lines):
        raise BenchmarkParseError(f"line {lines[pos][0]}: trailing content")
    if not cap.is_integer() or any(not w.is_integer() for w in weights):
        raise BenchmarkParseError(f"line {weights_item[0]}: weights and capacity must be integers")
    try:
        return QkpInstance(n, profits, tuple(int(w) for w in weights), int(cap), name)
    except ValueError as exc:
        raise BenchmarkParseError(str(exc)) from None


def instance_to_json(instance: Instance) -> dict:
    if isinstance(instance, GppInstance):
        return {
            "kind": "gpp",
            "n_nodes": instance.n_nodes,
            "edges": [list(e) for e in instance.edges],
            "seed": instance.seed,
        }
    return {
        "kind": "qkp",
        "name": instance.name,
        "n_items": instance.n_items,
        "profits": [[i, j, p] for (i, j), p in instance.profits.items()],
        "weights": list(instance.weights),
        "capacity": instance.capacity,
    }


def instance_from_json(data: Mapping) -> Instance:
    kind = data.get("kind")
    if kind == "gpp":
        return GppInstance(int(data["n_nodes"]), tuple(tuple(e) for e in data["edges"]), data.get("seed"))
    if kind == "qkp":
        return QkpInstance(
            int(data["n_items"]),
            {(int(i), int(j)): p for i, j, p in data["profits"]},
            tuple(data["weights"]),
            int(data["capacity"]),
            data.get("name", ""),
        )
    raise ValueError(f"unknown instance kind {kind!r}")


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_json(instance), indent=1) + "\n")


def load_instance(path) -> Instance:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return instance_from_json(json.loads(text))
    return parse_qkp_benchmark(text)
