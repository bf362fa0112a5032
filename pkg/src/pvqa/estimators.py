"""scikit-learn style wrappers around the harness and the repair map."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .harness import Problem, VariantSpec, prepare, run_variant
from .model import all_bits
from .postprocess import RepairModel, default_a_prime, repair_table
from .problems import GppInstance, QkpInstance, build_pair, constraint_of

__all__ = ["check_bitstrings", "VariationalAnnealer", "GreedyRepair"]


def check_bitstrings(X, n: int | None = None) -> np.ndarray:
    """Validate configurations as a 2-D int array of zeros and ones.

    A single 1-D configuration becomes one row.
    """
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array of configurations, got shape {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise ValueError(f"dimension mismatch: configurations have {arr.shape[1]} bits, expected {n}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("configurations must contain only 0 and 1")
    return arr.astype(np.int64)


def _as_problem(X, penalty: float) -> Problem:
    if isinstance(X, Problem):
        return X
    if isinstance(X, (GppInstance, QkpInstance)):
        return prepare(X, penalty)
    raise TypeError(f"expected an instance or a prepared problem, got {type(X).__name__}")


class VariationalAnnealer(BaseEstimator):
    """Optimize an annealing path for one problem instance.

    Parameters
    ----------
    variant : {"pVQA", "VQA", "pQA", "QA"}
    family : {"linear", "piecewise", "continuous", "qaoa"}
    T : float
        Annealing time.
    penalty : float
        Constraint coefficient A used when ``fit`` receives a bare instance.

    Attributes
    ----------
    report_ : ExperimentReport
    schedule_ : dict
        Optimized path.
    probabilities_ : ndarray of shape (2**n,)
        Final distribution, after repair for the p-variants.
    """

    def __init__(self, variant="pVQA", family="linear", T=1.0, optimizer=None, M=100, p=1,
                 max_iter=None, resolution=0.1, penalty=1.0, shots=None, top_k=None,
                 seed=0, dt=None):
        self.variant = variant
        self.family = family
        self.T = T
        self.optimizer = optimizer
        self.M = M
        self.p = p
        self.max_iter = max_iter
        self.resolution = resolution
        self.penalty = penalty
        self.shots = shots
        self.top_k = top_k
        self.seed = seed
        self.dt = dt

    def _spec(self) -> VariantSpec:
        return VariantSpec(self.variant, self.family, float(self.T), self.optimizer, self.M, self.p,
                           self.max_iter, self.resolution, None, self.shots, self.top_k, self.seed,
                           self.dt)

    def fit(self, X, y=None):
        """Run the variant on instance or prepared problem ``X``."""
        self.problem_ = _as_problem(X, self.penalty)
        self.report_ = run_variant(self._spec(), self.problem_)
        self.schedule_ = self.report_.schedule
        self.probabilities_ = self.report_.distribution.probs
        self.n_bits_ = self.problem_.pair.n
        return self

    def predict_proba(self, X=None):
        check_is_fitted(self, "probabilities_")
        if X is None:
            return self.probabilities_
        idx = check_bitstrings(X, self.n_bits_) @ (1 << np.arange(self.n_bits_))
        return self.probabilities_[idx]

    def predict(self, X=None):
        """Most probable configuration; lowest index on ties."""
        check_is_fitted(self, "probabilities_")
        best = int(np.argmax(self.probabilities_))
        return all_bits(self.n_bits_, best, best + 1)[0].astype(np.int64)

    def sample(self, n_samples=100, random_state=None):
        check_is_fitted(self, "probabilities_")
        rng = np.random.default_rng(random_state)
        idx = rng.choice(self.probabilities_.shape[0], size=n_samples, p=self.probabilities_)
        return ((idx[:, None] >> np.arange(self.n_bits_)) & 1).astype(np.int64)

    def score(self, X=None, y=None):
        """Success probability of the fitted distribution."""
        check_is_fitted(self, "report_")
        return self.report_.p_suc


class GreedyRepair(TransformerMixin, BaseEstimator):
    """Map configurations onto feasible ones by steepest single-flip descent.

    Parameters
    ----------
    instance : GppInstance or QkpInstance
    a_prime : float, optional
        Repair penalty weight; defaults to just above the flip bound.
    """

    def __init__(self, instance=None, a_prime=None):
        self.instance = instance
        self.a_prime = a_prime

    def fit(self, X=None, y=None):
        if self.instance is None:
            raise ValueError("GreedyRepair needs an instance")
        objective = build_pair(self.instance, 1.0).objective
        a_prime = default_a_prime(objective) if self.a_prime is None else float(self.a_prime)
        self.model_ = RepairModel(objective, constraint_of(self.instance), a_prime)
        self.image_ = repair_table(self.model_)
        self.n_features_in_ = objective.n
        if X is not None:
            check_bitstrings(X, self.n_features_in_)
        return self

    def transform(self, X):
        check_is_fitted(self, "image_")
        bits = check_bitstrings(X, self.n_features_in_)
        idx = self.image_[bits @ (1 << np.arange(self.n_features_in_))]
        return ((idx[:, None] >> np.arange(self.n_features_in_)) & 1).astype(np.int64)
