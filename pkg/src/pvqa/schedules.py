"""Annealing paths s(t) on [0, T].

Four families are supported: piecewise-constant ``Continuous``, two-parameter
``Linear``, bang-bang ``Qaoa`` and the annealer-style ``AnnealerPiecewise``
path with free values at 0.1 T and 0.9 T.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

__all__ = [
    "Continuous",
    "Linear",
    "Qaoa",
    "AnnealerPiecewise",
    "Schedule",
    "eval_s",
    "validate",
    "clamp_project",
    "schedule_to_dict",
    "schedule_from_dict",
]

_T_TOL = 1e-12


class _Base:
    T: float

    @property
    def params(self) -> np.ndarray:
        raise NotImplementedError

    def with_params(self, params) -> "Schedule":
        raise NotImplementedError

    def bounds(self) -> list[tuple[float, float]]:
        return [(0.0, 1.0)] * len(self.params)

    def breakpoints(self) -> np.ndarray:
        """Times in (0, end) where s(t) may be discontinuous or kinked."""
        return np.empty(0)

    @property
    def end_time(self) -> float:
        """Time at which evolution stops; identity afterwards."""
        return self.T

    def values(self, t, side: str = "right") -> np.ndarray:
        """Vectorized s(t); ``side='left'`` gives left limits at jumps."""
        raise NotImplementedError

    def __call__(self, t):
        return eval_s(self, t)


@dataclass(frozen=True)
class Linear(_Base):
    s1: float
    s2: float
    T: float = 1.0

    @property
    def params(self):
        return np.array([self.s1, self.s2], dtype=np.float64)

    def with_params(self, params):
        s1, s2 = (float(v) for v in params)
        return replace(self, s1=s1, s2=s2)

    def values(self, t, side="right"):
        t = np.asarray(t, dtype=np.float64)
        return self.s1 + (self.s2 - self.s1) * t / self.T


@dataclass(frozen=True)
class AnnealerPiecewise(_Base):
    """Anchors s=0 at t=0, s1 at 0.1T, s2 at 0.9T and s=1 at T."""

    s1: float
    s2: float
    T: float = 1.0

    @property
    def params(self):
        return np.array([self.s1, self.s2], dtype=np.float64)

    def with_params(self, params):
        s1, s2 = (float(v) for v in params)
        return replace(self, s1=s1, s2=s2)

    def anchors(self):
        return (
            np.array([0.0, 0.1 * self.T, 0.9 * self.T, self.T]),
            np.array([0.0, self.s1, self.s2, 1.0]),
        )

    def breakpoints(self):
        return np.array([0.1 * self.T, 0.9 * self.T])

    def values(self, t, side="right"):
        ts, ss = self.anchors()
        return np.interp(np.asarray(t, dtype=np.float64), ts, ss)


@dataclass(frozen=True)
class Continuous(_Base):
    """Piecewise-constant path on ``len(values)`` equal sub-intervals."""

    values_: tuple[float, ...]
    T: float = 1.0

    def __post_init__(self):
        vals = tuple(float(v) for v in np.ravel(self.values_))
        if not vals:
            raise ValueError("continuous schedule needs at least one value")
        object.__setattr__(self, "values_", vals)

    @classmethod
    def constant(cls, value: float, M: int = 100, T: float = 1.0) -> "Continuous":
        return cls((value,) * M, T)

    @property
    def M(self) -> int:
        return len(self.values_)

    @property
    def params(self):
        return np.array(self.values_, dtype=np.float64)

    def with_params(self, params):
        return replace(self, values_=tuple(float(v) for v in params))

    def breakpoints(self):
        return np.arange(1, self.M) * (self.T / self.M)

    def values(self, t, side="right"):
        t = np.asarray(t, dtype=np.float64)
        x = t * self.M / self.T
        if side == "left":
            k = np.ceil(x - 1e-9) - 1
        else:
            k = np.floor(x + 1e-9)
        k = np.clip(k, 0, self.M - 1).astype(np.int64)
        return np.asarray(self.values_)[k]


@dataclass(frozen=True)
class Qaoa(_Base):
    """Bang-bang path: s=1 on [b_{2l-2}, b_{2l-1}), s=0 on [b_{2l-1}, b_{2l}).

    ``breakpoints_`` holds b_1 .. b_{2p} in time units (b_0 = 0). The state is
    not evolved on [b_{2p}, T].
    """

    breakpoints_: tuple[float, ...]
    T: float = 1.0

    def __post_init__(self):
        bps = tuple(float(v) for v in np.ravel(self.breakpoints_))
        if len(bps) == 0 or len(bps) % 2:
            raise ValueError("QAOA schedule needs 2p breakpoints with p >= 1")
        object.__setattr__(self, "breakpoints_", bps)

    @classmethod
    def zeros(cls, p: int, T: float = 1.0) -> "Qaoa":
        return cls((0.0,) * (2 * p), T)

    @property
    def p(self) -> int:
        return len(self.breakpoints_) // 2

    @property
    def params(self):
        return np.array(self.breakpoints_, dtype=np.float64)

    def with_params(self, params):
        return replace(self, breakpoints_=tuple(float(v) for v in params))

    def bounds(self):
        return [(0.0, self.T)] * (2 * self.p)

    def breakpoints(self):
        return np.array(self.breakpoints_)

    @property
    def end_time(self):
        return min(self.breakpoints_[-1], self.T)

    def durations(self) -> list[tuple[float, float]]:
        """(Ising time, mixer time) per layer."""
        b = (0.0,) + self.breakpoints_
        return [(b[2 * l + 1] - b[2 * l], b[2 * l + 2] - b[2 * l + 1]) for l in range(self.p)]

    def values(self, t, side="right"):
        t = np.asarray(t, dtype=np.float64)
        b = np.concatenate([[0.0], self.breakpoints_])
        k = np.searchsorted(b, t, side="right" if side == "right" else "left") - 1
        on = (k % 2 == 0) & (k < 2 * self.p) & (k >= 0)
        return on.astype(np.float64)


Schedule = Union[Continuous, Linear, Qaoa, AnnealerPiecewise]


def eval_s(sch: Schedule, t):
    """s(t) for t in [0, T]; scalar in, scalar out."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < -_T_TOL * max(1.0, sch.T)) or np.any(arr > sch.T * (1 + _T_TOL)):
        raise ValueError(f"time {t} outside [0, {sch.T}]")
    out = sch.values(np.clip(arr, 0.0, sch.T))
    return float(out) if np.ndim(out) == 0 else out


def validate(sch: Schedule) -> list[str]:
    """Every violated invariant; an empty list means the schedule is valid."""
    problems = []
    if not sch.T > 0:
        problems.append(f"T must be positive, got {sch.T}")
    if isinstance(sch, Qaoa):
        b = sch.breakpoints_
        if b[0] < 0:
            problems.append(f"s_1 < 0 ({b[0]})")
        for i in range(1, len(b)):
            if b[i] < b[i - 1]:
                problems.append(f"s_{i + 1} < s_{i}")
        if b[-1] > sch.T:
            problems.append(f"s_{len(b)} > T ({b[-1]} > {sch.T})")
    else:
        vals = sch.params
        bad = np.flatnonzero((vals < 0.0) | (vals > 1.0))
        for i in bad:
            problems.append(f"s out of [0,1]: parameter {i} = {vals[i]}")
    return problems


def clamp_project(sch: Schedule) -> Schedule:
    """Nearest valid schedule: clip to [0, 1], or sort and clip to [0, T] for QAOA."""
    if isinstance(sch, Qaoa):
        return sch.with_params(np.clip(np.sort(sch.params), 0.0, sch.T))
    return sch.with_params(np.clip(sch.params, 0.0, 1.0))


_KINDS = {
    "linear": Linear,
    "piecewise": AnnealerPiecewise,
    "continuous": Continuous,
    "qaoa": Qaoa,
}


def schedule_to_dict(sch: Schedule) -> dict:
    if isinstance(sch, Linear):
        return {"kind": "linear", "s1": sch.s1, "s2": sch.s2, "T": sch.T}
    if isinstance(sch, AnnealerPiecewise):
        return {"kind": "piecewise", "s1": sch.s1, "s2": sch.s2, "T": sch.T}
    if isinstance(sch, Continuous):
        return {"kind": "continuous", "values": list(sch.values_), "T": sch.T}
    return {"kind": "qaoa", "breakpoints": list(sch.breakpoints_), "p": sch.p, "T": sch.T}


def schedule_from_dict(data: dict) -> Schedule:
    kind = data.get("kind")
    if kind not in _KINDS:
        raise ValueError(f"unknown schedule kind {kind!r}")
    T = float(data.get("T", 1.0))
    if kind in ("linear", "piecewise"):
        return _KINDS[kind](float(data["s1"]), float(data["s2"]), T)
    if kind == "continuous":
        return Continuous(tuple(data["values"]), T)
    return Qaoa(tuple(data["breakpoints"]), T)
