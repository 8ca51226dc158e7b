"""Continuous-time optimal transport of probability mass over nonlinear
control-affine dynamics, computed on a box-partition graph.

Pipeline: build a :class:`~boxot.geometry.Grid`, pick a system from
:mod:`boxot.fields`, discretize its generators with :mod:`boxot.generator`,
assemble the graph and verify feasibility with :mod:`boxot.graph`, then
solve the convex transport program (:mod:`boxot.transport`) and extract
feedback laws for particles (:mod:`boxot.feedback`).
"""

__version__ = "0.1.0"

from .feedback import (FeedbackField, ParticleEnsemble, extract_feedback,
                       seed_particles, simulate_particles)
from .fields import ControlAffineSystem, DoubleGyreParams, make_scenario
from .generator import (RateSet, build_control_rates, build_drift_rates,
                        build_rates, cfl_bound)
from .geometry import Face, Grid, build_grid, face_quadrature
from .graph import (HypothesisError, TransportGraph, build_graph,
                    check_strong_connectivity, validate_problem_hypotheses)
from .oracle import (GrushinGeodesic, dense_small_ot, grushin_shoot,
                     translation_wasserstein)
from .solver import Solution, SolverOptions
from .timegrid import TimeGrid
from .transport import TransportProblem, assemble, cost_sweep, solve

__all__ = [
    "__version__",
    "Grid", "Face", "build_grid", "face_quadrature",
    "ControlAffineSystem", "DoubleGyreParams", "make_scenario",
    "RateSet", "build_rates", "build_control_rates", "build_drift_rates",
    "cfl_bound",
    "TransportGraph", "build_graph", "check_strong_connectivity",
    "validate_problem_hypotheses", "HypothesisError",
    "TimeGrid", "TransportProblem", "assemble", "solve", "cost_sweep",
    "Solution", "SolverOptions",
    "FeedbackField", "extract_feedback", "ParticleEnsemble",
    "seed_particles", "simulate_particles",
    "GrushinGeodesic", "grushin_shoot", "dense_small_ot",
    "translation_wasserstein",
]
