from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.domain.errors import DimensionMismatch, GridTooLarge, NoConvergence, NotConvexModel
from app.domain.graph import LayerDag
from app.domain.schemas import (
    BitAllocation,
    DistortionVector,
    Minimizer,
    ScalarizationResult,
    WeightVector,
)
from app.domain.validators import dedupe_rows
from app.infra import get_logger, get_settings
from app.services.distortion import DistortionModel, LayeredExponentialModel
from app.services.pareto import CloudLike, ParetoFront, PointCloud, as_cloud, lattice_points

logger = get_logger(__name__)

DISCRETE_TIE_TOL = 1e-12
CONTINUOUS_TOL = 1e-9
DEDUPE_TOL = 1e-9

_ARMIJO = 1e-4
_MIN_STEP = 1e-18
# Consecutive iterations whose decrease is within rounding of the objective
_STALL_ROUNDS = 25
_STALL_DECREASE = 64 * np.finfo(float).eps
_BLOCK_CELLS = 4_000_000


@dataclass(frozen=True)
class S0Set:
    """Scalarization solutions over a simplex weight lattice."""

    entries: Tuple[ScalarizationResult, ...]
    distinct_distortions: Tuple[DistortionVector, ...]
    resolution: int

    def matrix(self) -> np.ndarray:
        return np.array([d.values for d in self.distinct_distortions], dtype=float)

    def __len__(self) -> int:
        return len(self.entries)


def as_weight(weight: Union[WeightVector, Sequence[float]]) -> WeightVector:
    if isinstance(weight, WeightVector):
        return weight
    return WeightVector(weights=tuple(float(w) for w in weight))


def weight_lattice(dimension: int, resolution: int, cap: Optional[int] = None) -> np.ndarray:
    """All weights with components k/M summing to 1, ascending lexicographic."""
    if resolution < 1:
        raise ValueError(f"weight resolution must be >= 1, got {resolution}")
    cap = cap or get_settings().weight_lattice_cap
    estimate = math.comb(resolution + dimension - 1, dimension - 1)
    if estimate > cap:
        raise GridTooLarge(estimate, cap, what="weight lattice")
    head = lattice_points(resolution, dimension - 1)
    counts = np.column_stack([head, resolution - head.sum(axis=1)])
    return counts / float(resolution)


def _minimizers(cloud: PointCloud, indices: np.ndarray) -> List[Minimizer]:
    return [
        Minimizer(alloc=alloc, distortion=dist)
        for alloc, dist in (cloud.pair(int(index)) for index in indices)
    ]


def scalarize_discrete(
    weight: Union[WeightVector, Sequence[float]],
    cloud: CloudLike,
    tie_tol: float = DISCRETE_TIE_TOL,
) -> ScalarizationResult:
    """Exact argmin of w . g over a finite cloud; ties listed in cloud order."""
    weight = as_weight(weight)
    cloud = as_cloud(cloud)
    if len(weight) != cloud.dimension:
        raise DimensionMismatch(
            f"weight has {len(weight)} components, distortions have {cloud.dimension}"
        )
    objectives = cloud.distortions @ np.asarray(weight.weights)
    best = float(objectives.min())
    ties = np.flatnonzero(objectives <= best + tie_tol)
    return ScalarizationResult(
        weight=weight, minimizers=_minimizers(cloud, ties), objective=best
    )


def project_to_budget(vector: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {b >= 0, sum(b) <= budget}."""
    clipped = np.maximum(vector, 0.0)
    if clipped.sum() <= budget:
        return clipped
    ordered = np.sort(vector)[::-1]
    shifted = np.cumsum(ordered) - budget
    ranks = np.arange(1, vector.shape[0] + 1)
    active = ordered - shifted / ranks > 0
    rho = ranks[active][-1]
    theta = shifted[active][-1] / rho
    return np.maximum(vector - theta, 0.0)


def scalarize_continuous(
    weight: Union[WeightVector, Sequence[float]],
    model: DistortionModel,
    dag: LayerDag,
    budget: float,
    tol: float = CONTINUOUS_TOL,
    max_iterations: Optional[int] = None,
) -> ScalarizationResult:
    """Projected gradient descent with Armijo backtracking over the feasible allocations."""
    if not isinstance(model, LayeredExponentialModel):
        raise NotConvexModel(f"{model.kind.value} models have no convexity guarantee")
    weight = as_weight(weight)
    if len(weight) != dag.node_count or model.dimension != dag.node_count:
        raise DimensionMismatch(
            f"weight has {len(weight)} components, DAG has {dag.node_count} nodes"
        )
    max_iterations = max_iterations or get_settings().pgd_max_iterations
    w = np.asarray(weight.weights)

    def objective(bits: np.ndarray) -> float:
        return float(model.evaluate(bits)[0] @ w)

    bits = np.full(dag.node_count, budget / dag.node_count)
    value = objective(bits)
    step = 1.0
    residual = math.inf
    iterations = 0
    stalled = False
    flat_rounds = 0
    threshold = tol * max(1.0, budget)
    while iterations < max_iterations:
        gradient = model.gradient(w, bits)
        residual = float(np.max(np.abs(bits - project_to_budget(bits - gradient, budget))))
        if residual <= threshold:
            break
        if flat_rounds >= _STALL_ROUNDS:
            stalled = True
            break
        iterations += 1
        while True:
            candidate = project_to_budget(bits - step * gradient, budget)
            candidate_value = objective(candidate)
            if candidate_value <= value + _ARMIJO * float(gradient @ (candidate - bits)):
                break
            step *= 0.5
            if step < _MIN_STEP:
                stalled = True
                break
        if stalled:
            break
        if value - candidate_value <= _STALL_DECREASE * max(1.0, abs(value)):
            flat_rounds += 1
        else:
            flat_rounds = 0
        bits, value = candidate, candidate_value
        step *= 2.0
    else:
        raise NoConvergence(f"no convergence after {max_iterations} iterations", residual)

    bits = _clean(bits, budget)
    value = objective(bits)
    _certify(objective, bits, value, budget, tol, residual)
    if stalled:
        logger.info(
            "Stopped at the rounding floor, residual %.3e for w=%s", residual, weight.weights
        )
    logger.debug("PGD for w=%s: %d iterations, residual %.3e", weight.weights, iterations, residual)

    distortion = DistortionVector(values=tuple(float(d) for d in model.evaluate(bits)[0]))
    alloc = BitAllocation(bits=tuple(float(b) for b in bits), budget=budget)
    return ScalarizationResult(
        weight=weight,
        minimizers=[Minimizer(alloc=alloc, distortion=distortion)],
        objective=value,
        residual=residual,
        iterations=iterations,
    )


def _clean(bits: np.ndarray, budget: float) -> np.ndarray:
    bits = np.where(bits < 1e-15, 0.0, bits)
    total = bits.sum()
    if total > budget:
        bits = bits * (budget / total)
    return bits


def _certify(
    objective: Callable[[np.ndarray], float],
    bits: np.ndarray,
    value: float,
    budget: float,
    tol: float,
    residual: float,
) -> None:
    # Pairwise transfers of delta bits between nodes, and from the unused budget
    delta = budget * 1e-3
    n = bits.shape[0]
    slack = budget - bits.sum()
    for source in range(-1, n):
        if source >= 0 and bits[source] < delta:
            continue
        if source < 0 and slack < delta:
            continue
        for target in range(n):
            if target == source:
                continue
            neighbour = bits.copy()
            neighbour[target] += delta
            if source >= 0:
                neighbour[source] -= delta
            if objective(neighbour) < value - tol:
                raise NoConvergence(
                    f"moving {delta:g} bits to node {target} improves the objective", residual
                )


def sweep_S0(
    source: Union[DistortionModel, ParetoFront, CloudLike],
    weight_resolution: int,
    *,
    dag: Optional[LayerDag] = None,
    budget: Optional[float] = None,
    tie_tol: float = DISCRETE_TIE_TOL,
    tol: float = CONTINUOUS_TOL,
) -> S0Set:
    """Scalarize at every lattice weight and collect the distinct minimizing distortions.

    A ParetoFront source is swept over its weakly Pareto points only; every minimizer of a
    nonzero nonnegative weight is weakly Pareto, so the minimizer sets are unchanged.
    """
    if isinstance(source, DistortionModel):
        if dag is None or budget is None:
            raise ValueError("continuous sweeps need the DAG and the budget")
        weights = weight_lattice(dag.node_count, weight_resolution)
        entries = tuple(
            scalarize_continuous(w, source, dag, budget, tol=tol) for w in weights
        )
    else:
        cloud = source.weak_cloud() if isinstance(source, ParetoFront) else as_cloud(source)
        weights = weight_lattice(cloud.dimension, weight_resolution)
        entries = tuple(_sweep_cloud(cloud, weights, tie_tol))

    rows = np.array(
        [m.distortion.values for entry in entries for m in entry.minimizers], dtype=float
    )
    distinct = dedupe_rows(rows, DEDUPE_TOL)
    logger.info(
        "Swept %d weights (M=%d): %d distinct distortions",
        len(entries),
        weight_resolution,
        distinct.shape[0],
    )
    return S0Set(
        entries=entries,
        distinct_distortions=tuple(
            DistortionVector(values=tuple(float(v) for v in row)) for row in distinct
        ),
        resolution=weight_resolution,
    )


def _sweep_cloud(
    cloud: PointCloud, weights: np.ndarray, tie_tol: float
) -> List[ScalarizationResult]:
    results: List[ScalarizationResult] = []
    chunk = max(1, _BLOCK_CELLS // max(len(cloud), 1))
    for start in range(0, weights.shape[0], chunk):
        block = weights[start : start + chunk]
        objectives = block @ cloud.distortions.T
        best = objectives.min(axis=1)
        for row, w in enumerate(block):
            ties = np.flatnonzero(objectives[row] <= best[row] + tie_tol)
            results.append(
                ScalarizationResult(
                    weight=WeightVector(weights=tuple(float(v) for v in w)),
                    minimizers=_minimizers(cloud, ties),
                    objective=float(best[row]),
                )
            )
    return results


__all__ = [
    "CONTINUOUS_TOL",
    "DISCRETE_TIE_TOL",
    "S0Set",
    "as_weight",
    "project_to_budget",
    "scalarize_continuous",
    "scalarize_discrete",
    "sweep_S0",
    "weight_lattice",
]
