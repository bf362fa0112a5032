"""Variational and fixed-path annealing variants, their metrics and ensembles.

Four variants are supported. ``pVQA`` optimizes the path against the repaired
cost, and ``VQA`` optimizes it against the penalized cost. ``pQA`` and ``QA``
run the fixed linear path from s=0 to s=1, with and without repair.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .dynamics import Distribution, evolve, expectation_and_gradient, measure_distribution, sample_shots
from .model import QuboPair, index_to_bits, qubo_to_ising, rescale_ising
from .optimize import (
    ObjectiveFn,
    continuous_gradient_descent,
    grid_search,
    powell_minimize,
)
from .postprocess import RepairModel, repair_table, transform_distribution
from .problems import (
    GppInstance,
    Instance,
    brute_force_optima,
    build_pair,
    constraint_of,
    optimum_indices,
)
from .schedules import (
    AnnealerPiecewise,
    Continuous,
    Linear,
    Qaoa,
    Schedule,
    clamp_project,
    schedule_to_dict,
)

__all__ = [
    "VARIANTS",
    "FAMILIES",
    "OPTIMIZERS",
    "VariantSpec",
    "Problem",
    "ExperimentReport",
    "NoAdmissiblePenalty",
    "prepare",
    "run_variant",
    "metrics",
    "residual_energy",
    "tune_penalty",
    "default_penalty_grid",
    "ensemble_run",
    "summarize",
    "write_reports_jsonl",
    "write_reports_csv",
    "write_summary_csv",
    "SUMMARY_COLUMNS",
]

VARIANTS = ("pVQA", "VQA", "pQA", "QA")
FAMILIES = ("linear", "piecewise", "continuous", "qaoa")
OPTIMIZERS = ("powell", "grid", "gradient", "none")
FEASIBLE_RATE_FLOOR = 0.1


@dataclass(frozen=True)
class VariantSpec:
    """One algorithm configuration.

    ``optimizer`` and ``max_iter`` default by family: Powell with 10 sweeps
    (10 p for QAOA), and projected gradient descent for continuous paths.
    ``initial`` overrides the starting parameters. ``shots`` switches from
    exact distributions to sampled ones, with ``top_k`` filtering of
    repaired shots.
    """

    variant: str = "pVQA"
    family: str = "linear"
    T: float = 1.0
    optimizer: Optional[str] = None
    M: int = 100
    p: int = 1
    max_iter: Optional[int] = None
    resolution: float = 0.1
    initial: Optional[tuple] = None
    shots: Optional[int] = None
    top_k: Optional[int] = None
    seed: int = 0
    dt: Optional[float] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown schedule family {self.family!r}; expected one of {FAMILIES}")
        if self.optimizer is not None and self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; expected one of {OPTIMIZERS}")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.variant in ("pQA", "QA"):
            if self.optimizer not in (None, "none"):
                raise ValueError(f"{self.variant} runs a fixed path and takes no optimizer")
            if self.family != "linear":
                raise ValueError(f"{self.variant} uses the linear path from 0 to 1")
            object.__setattr__(self, "optimizer", "none")
            object.__setattr__(self, "initial", (0.0, 1.0))
        elif self.optimizer is None:
            object.__setattr__(self, "optimizer", "gradient" if self.family == "continuous" else "powell")
        if self.initial is not None:
            object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be at least 1")

    @property
    def post_processed(self) -> bool:
        return self.variant in ("pVQA", "pQA")

    @property
    def iteration_limit(self) -> int:
        if self.max_iter is not None:
            return self.max_iter
        if self.optimizer == "gradient":
            return 100
        return 10 * self.p if self.family == "qaoa" else 10

    @property
    def label(self) -> str:
        extra = f"p={self.p}" if self.family == "qaoa" else (f"M={self.M}" if self.family == "continuous" else "")
        return f"{self.family}({extra})" if extra else self.family

    def initial_schedule(self) -> Schedule:
        if self.family == "linear":
            sch: Schedule = Linear(0.5, 0.5, self.T)
        elif self.family == "piecewise":
            sch = AnnealerPiecewise(0.5, 0.5, self.T)
        elif self.family == "continuous":
            sch = Continuous.constant(0.5, self.M, self.T)
        else:
            sch = Qaoa.zeros(self.p, self.T)
        if self.initial is not None:
            if len(self.initial) != len(sch.params):
                raise ValueError(f"initial has {len(self.initial)} values, schedule needs {len(sch.params)}")
            sch = sch.with_params(self.initial)
        return sch

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "VariantSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown variant fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Problem:
    """An instance encoded at a penalty coefficient, with its repair model and optima."""

    instance: Instance
    pair: QuboPair
    repair: RepairModel
    optima: frozenset
    c_opt: float
    instance_id: str = ""


def instance_id(instance: Instance) -> str:
    if isinstance(instance, GppInstance):
        return f"gpp_n{instance.n_nodes}_seed{instance.seed}"
    return instance.name or f"qkp_n{instance.n_items}"


def prepare(instance: Instance, A: float, instance_id_: Optional[str] = None) -> Problem:
    pair = build_pair(instance, A)
    rm = RepairModel.with_default(pair.objective, constraint_of(instance))
    S, c_opt = brute_force_optima(instance, pair)
    return Problem(instance, pair, rm, S, c_opt, instance_id_ or instance_id(instance))


@dataclass
class ExperimentReport:
    instance_id: str
    variant: str
    schedule: dict
    params: list
    A: float
    p_fs: float
    c_ave: Optional[float]
    p_suc: float
    residual: Optional[float]
    raw_p_fs: float
    energy: float
    evaluations: int
    iterations: int
    wall_time: float
    T: float = 0.0
    label: str = ""
    raw_distribution: Optional[Distribution] = field(default=None, repr=False)
    distribution: Optional[Distribution] = field(default=None, repr=False)
    trace: Optional[list] = field(default=None, repr=False)

    _EXCLUDED = ("raw_distribution", "distribution", "trace")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in self._EXCLUDED}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def residual_energy(c_ave: float, c_opt: float) -> float:
    return float(c_ave) - float(c_opt)


def _mask(pred, n: int) -> np.ndarray:
    if isinstance(pred, np.ndarray) and pred.dtype == bool:
        return pred
    return np.array([bool(pred(index_to_bits(j, n))) for j in range(1 << n)])


def metrics(d: Distribution, pair: QuboPair, feasible, S, post_processed: bool):
    """(p_FS, c_ave, p_suc) of a distribution.

    ``feasible`` is a boolean mask over configuration indices or a predicate
    on bit arrays; ``S`` holds the optimal configurations as bit tuples or
    indices. Without post-processing the average runs over feasible outcomes
    only and is ``None`` when none carry mass.
    """
    n = pair.n
    if d.n != n:
        raise ValueError(f"dimension mismatch: distribution n={d.n}, problem n={n}")
    S = list(S)
    if not S:
        raise ValueError("optimum set must be nonempty")
    idx = np.array(S, dtype=np.int64) if np.isscalar(S[0]) else optimum_indices(S, n)
    cost = pair.objective.energies()
    p = d.probs
    p_suc = float(p[idx].sum())
    if post_processed:
        return 1.0, float(p @ cost), p_suc
    mask = _mask(feasible, n)
    p_fs = float(p[mask].sum())
    c_ave = float(p[mask] @ cost[mask]) / p_fs if p_fs > 0 else None
    return p_fs, c_ave, p_suc


class _Evaluator:
    """Shared state for the objective evaluations of one run."""

    def __init__(self, spec: VariantSpec, problem: Problem):
        self.spec = spec
        self.problem = problem
        ising, self.scale = rescale_ising(qubo_to_ising(problem.pair.full()))
        self.model = ising
        self.cost = problem.repair.cost_table
        self.image = repair_table(problem.repair) if spec.post_processed else None
        if spec.post_processed:
            self.weights = self.cost[self.image]
        else:
            self.weights = problem.pair.full().energies()
        self.rng = np.random.default_rng(spec.seed)

    def raw(self, sch: Schedule) -> Distribution:
        d = measure_distribution(evolve(self.model, sch, self.spec.dt))
        if self.spec.shots is not None:
            d = sample_shots(d, self.spec.shots, self.rng)
        return d

    def final(self, raw: Distribution) -> Distribution:
        if not self.spec.post_processed:
            return raw
        return transform_distribution(raw, self.problem.repair, self.spec.top_k, self.image)

    def energy(self, sch: Schedule) -> float:
        raw = self.raw(sch)
        if self.spec.shots is None:
            return float(raw.probs @ self.weights)
        d = self.final(raw)
        costs = self.cost if self.spec.post_processed else self.weights
        return float(d.probs @ costs)

    def value_and_grad(self, sch: Continuous):
        return expectation_and_gradient(self.model, sch, self.weights, self.spec.dt)


def run_variant(spec: VariantSpec, problem: Problem, *, record_trace: bool = False) -> ExperimentReport:
    """Optimize the path if the variant calls for it and report the final metrics."""
    start = time.perf_counter()
    ev = _Evaluator(spec, problem)
    template = spec.initial_schedule()

    def project(x):
        return clamp_project(template.with_params(x)).params

    def func(x):
        return ev.energy(template.with_params(x))

    grad = None
    if spec.family == "continuous" and spec.shots is None:
        grad = lambda x: ev.value_and_grad(template.with_params(x))  # noqa: E731

    f = ObjectiveFn(func, template.bounds(), project, grad, record=record_trace)
    x0 = template.params
    if spec.optimizer == "powell":
        result = powell_minimize(f, x0, spec.iteration_limit)
    elif spec.optimizer == "grid":
        result = grid_search(f, spec.resolution)
    elif spec.optimizer == "gradient":
        if spec.family != "continuous":
            raise ValueError("gradient descent applies to continuous schedules")
        result = continuous_gradient_descent(f, spec.M, spec.iteration_limit)
    else:
        result = None
    params = f.projected(x0) if result is None else result.best_params
    best = template.with_params(params)
    raw = ev.raw(best)
    final = ev.final(raw)
    energy = float(final.probs @ (ev.cost if spec.post_processed else ev.weights))
    feasible = problem.repair.feasible
    p_fs, c_ave, p_suc = metrics(final, problem.pair, feasible, problem.optima, spec.post_processed)
    raw_p_fs = float(raw.probs[feasible].sum())
    return ExperimentReport(
        instance_id=problem.instance_id,
        variant=spec.variant,
        schedule=schedule_to_dict(best),
        params=[float(v) for v in params],
        A=float(problem.pair.penalty_coefficient),
        p_fs=p_fs,
        c_ave=c_ave,
        p_suc=p_suc,
        residual=None if c_ave is None else residual_energy(c_ave, problem.c_opt),
        raw_p_fs=raw_p_fs,
        energy=energy,
        evaluations=f.evaluations if result is not None else 1,
        iterations=0 if result is None else result.iterations,
        wall_time=time.perf_counter() - start,
        T=spec.T,
        label=spec.label,
        raw_distribution=raw,
        distribution=final,
        trace=None if result is None else result.trace,
    )


class NoAdmissiblePenalty(ValueError):
    pass


def default_penalty_grid(instance: Instance) -> tuple[float, float, float]:
    """(A_min, step, A_max): unit steps for graphs, steps of 200 for knapsacks."""
    if isinstance(instance, GppInstance):
        return 1.0, 1.0, 10.0
    return 200.0, 200.0, 4000.0


def _grid_values(A_grid) -> np.ndarray:
    lo, step, hi = (float(v) for v in A_grid)
    if not step > 0 or hi < lo:
        raise ValueError("penalty grid needs step > 0 and A_max >= A_min")
    return np.round(lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1), 10)


def tune_penalty(spec: VariantSpec, instance: Instance, A_grid=None, *,
                 floor: float = FEASIBLE_RATE_FLOOR) -> tuple[float, ExperimentReport]:
    """Smallest-average-cost penalty among those keeping the raw feasible rate above ``floor``.

    The rate is that of the distribution before repair, for every variant.
    Ties go to the smallest A.
    """
    values = _grid_values(A_grid or default_penalty_grid(instance))
    best_A, best_report = None, None
    for A in values:
        report = run_variant(spec, prepare(instance, float(A)))
        if report.raw_p_fs < floor or report.c_ave is None:
            continue
        if best_report is None or report.c_ave < best_report.c_ave:
            best_A, best_report = float(A), report
    if best_report is None:
        raise NoAdmissiblePenalty("no admissible penalty: every grid value leaves the feasible rate below "
                                  f"{floor}")
    return best_A, best_report


def _run_one(spec: VariantSpec, instance: Instance, A: float) -> ExperimentReport:
    return run_variant(spec, prepare(instance, A))


def ensemble_run(specs: Sequence[VariantSpec], instances: Sequence[Instance], penalties,
                 jobs: int = 1, keep_distributions: bool = True):
    """Run every spec on every instance.

    ``penalties`` is one A for all instances or one per instance. Returns the
    reports, grouped per spec in input order, and the summary rows.
    """
    if not instances:
        raise ValueError("ensemble needs at least one instance")
    if np.isscalar(penalties):
        penalties = [float(penalties)] * len(instances)
    if len(penalties) != len(instances):
        raise ValueError("need one penalty per instance")
    tasks = [(s, inst, A) for s in specs for inst, A in zip(instances, penalties)]
    if jobs == 1:
        flat = [_run_one(*t) for t in tasks]
    else:
        flat = Parallel(n_jobs=jobs)(delayed(_run_one)(*t) for t in tasks)
    if not keep_distributions:
        for r in flat:
            r.raw_distribution = r.distribution = None
    grouped = [flat[k * len(instances):(k + 1) * len(instances)] for k in range(len(specs))]
    rows = [summarize(spec, reports) for spec, reports in zip(specs, grouped)]
    return grouped, rows


SUMMARY_COLUMNS = (
    "variant", "T", "schedule", "A", "p_FS", "c_ave", "p_suc", "residual",
    "p_FS_std", "c_ave_std", "p_suc_std", "residual_std", "instances",
)


def _mean_std(values: Iterable[Optional[float]]):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    arr = np.asarray(vals, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def summarize(spec: VariantSpec, reports: Sequence[ExperimentReport]) -> dict:
    """Mean and population standard deviation of each metric over instances."""
    row = {"variant": spec.variant, "T": spec.T, "schedule": spec.label,
           "A": float(np.mean([r.A for r in reports])), "instances": len(reports)}
    for key, attr in (("p_FS", "p_fs"), ("c_ave", "c_ave"), ("p_suc", "p_suc"), ("residual", "residual")):
        mean, std = _mean_std(getattr(r, attr) for r in reports)
        row[key], row[f"{key}_std"] = mean, std
    return {k: row[k] for k in SUMMARY_COLUMNS}


def write_reports_jsonl(reports: Iterable[ExperimentReport], path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


REPORT_COLUMNS = ("instance_id", "variant", "label", "T", "A", "p_fs", "c_ave", "p_suc", "residual",
                  "raw_p_fs", "energy", "evaluations", "iterations", "wall_time", "params")


def write_reports_csv(reports: Iterable[ExperimentReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            d = r.to_dict()
            d["params"] = " ".join(repr(v) for v in r.params)
            writer.writerow(["" if d[c] is None else d[c] for c in REPORT_COLUMNS])


def write_summary_csv(rows: Iterable[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow(["" if row[c] is None else row[c] for c in SUMMARY_COLUMNS])
