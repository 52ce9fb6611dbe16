from .conditions import compare_S0_vs_weak_pareto, run_checks
from .distortion import (
    DistortionModel,
    LayeredExponentialModel,
    RdEnvelope,
    TabulatedModel,
    distortion_vector,
    inverse_rate,
    rd_envelope,
)
from .pareto import ParetoFront, PointCloud, enumerate_grid, filter_front
from .report_generator import ReportGenerator
from .scalarize import S0Set, scalarize_continuous, scalarize_discrete, sweep_S0
from .storage import ArtifactStore

__all__ = [
    "ArtifactStore",
    "DistortionModel",
    "LayeredExponentialModel",
    "ParetoFront",
    "PointCloud",
    "RdEnvelope",
    "ReportGenerator",
    "S0Set",
    "TabulatedModel",
    "compare_S0_vs_weak_pareto",
    "distortion_vector",
    "enumerate_grid",
    "filter_front",
    "inverse_rate",
    "rd_envelope",
    "run_checks",
    "scalarize_continuous",
    "scalarize_discrete",
    "sweep_S0",
]
