"""Variational quantum annealing with feasibility-guaranteeing post-processing.

State-vector simulation of transverse-field annealing on QUBO-encoded
constrained problems, with optimized annealing paths and a greedy repair map
onto the feasible set.
"""

from .dynamics import Distribution, evolve, evolve_qaoa_exact, evolve_rk4, measure_distribution, sample_shots
from .estimators import GreedyRepair, VariationalAnnealer
from .harness import ExperimentReport, VariantSpec, ensemble_run, metrics, prepare, run_variant, tune_penalty
from .model import IsingModel, Qubo, QuboPair, qubo_to_ising, rescale_ising
from .postprocess import RepairModel, greedy_repair, repair_table, transform_distribution
from .problems import GppInstance, Inequality, KHot, QkpInstance, build_pair, gen_gpp, gen_qkp_base
from .schedules import AnnealerPiecewise, Continuous, Linear, Qaoa

__version__ = "0.1.0"

__all__ = [
    "AnnealerPiecewise",
    "Continuous",
    "Distribution",
    "ExperimentReport",
    "GppInstance",
    "GreedyRepair",
    "Inequality",
    "IsingModel",
    "KHot",
    "Linear",
    "Qaoa",
    "QkpInstance",
    "Qubo",
    "QuboPair",
    "RepairModel",
    "VariantSpec",
    "VariationalAnnealer",
    "build_pair",
    "ensemble_run",
    "evolve",
    "evolve_qaoa_exact",
    "evolve_rk4",
    "gen_gpp",
    "gen_qkp_base",
    "greedy_repair",
    "measure_distribution",
    "metrics",
    "prepare",
    "qubo_to_ising",
    "repair_table",
    "rescale_ising",
    "run_variant",
    "sample_shots",
    "transform_distribution",
    "tune_penalty",
]
