"""Orthant partial order, Pareto / weakly-Pareto labelling and exhaustive grid enumeration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.domain.errors import DimensionMismatch, EmptyInput, GridTooLarge, InvalidGrid
from app.domain.graph import LayerDag
from app.domain.schemas import BUDGET_SLACK, BitAllocation, DistortionVector, LabeledPoint
from app.domain.taxonomy import LABEL_CODES, LABELS_BY_CODE, MIRRORED_ORDER, Order, PointLabel
from app.domain.validators import as_matrix, as_vector, dedupe_rows
from app.infra import get_logger, get_settings
from app.services.distortion import DistortionModel, TabulatedModel

logger = get_logger(__name__)

PARETO = LABEL_CODES[PointLabel.PARETO]
WEAK_ONLY = LABEL_CODES[PointLabel.WEAK_ONLY]
DOMINATED = LABEL_CODES[PointLabel.DOMINATED]

# Upper bound on boolean cells per broadcast block
_BLOCK_CELLS = 4_000_000
# Grid counts within this many units of an integer snap to it
_GRID_SLACK = 1e-9


@dataclass(frozen=True)
class PointCloud:
    """Allocations and their distortion images as aligned (n, N) arrays."""

    allocations: np.ndarray
    distortions: np.ndarray
    budget: float
    step: Optional[float] = None

    def __post_init__(self) -> None:
        if self.allocations.shape[0] != self.distortions.shape[0]:
            raise DimensionMismatch(
                f"{self.allocations.shape[0]} allocations but "
                f"{self.distortions.shape[0]} distortions"
            )
        if self.distortions.shape[0] == 0:
            raise EmptyInput("point cloud is empty")
        self.allocations.setflags(write=False)
        self.distortions.setflags(write=False)

    @classmethod
    def from_distortions(cls, distortions: Iterable[Any], budget: float = 1.0) -> "PointCloud":
        """Cloud without allocation provenance (zero allocations)."""
        matrix = np.array(as_matrix(distortions, what="distortion vectors"), dtype=float)
        return cls(np.zeros_like(matrix), matrix, budget)

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[Tuple[Any, Any]],
        budget: Optional[float] = None,
        step: Optional[float] = None,
    ) -> "PointCloud":
        pairs = list(pairs)
        if not pairs:
            raise EmptyInput("no (allocation, distortion) pairs given")
        allocations = as_matrix([alloc for alloc, _ in pairs], what="allocations")
        distortions = as_matrix([dist for _, dist in pairs], what="distortion vectors")
        if budget is None:
            first = pairs[0][0]
            budget = first.budget if isinstance(first, BitAllocation) else None
        if budget is None:
            budget = max(float(allocations.sum(axis=1).max()), 1.0)
        return cls(allocations, distortions, float(budget), step)

    def __len__(self) -> int:
        return self.distortions.shape[0]

    def __iter__(self) -> Iterator[Tuple[BitAllocation, DistortionVector]]:
        for index in range(len(self)):
            yield self.pair(index)

    @property
    def dimension(self) -> int:
        return self.distortions.shape[1]

    def allocation(self, index: int) -> BitAllocation:
        return BitAllocation(
            bits=tuple(float(b) for b in self.allocations[index]), budget=self.budget
        )

    def distortion(self, index: int) -> DistortionVector:
        return DistortionVector(values=tuple(float(d) for d in self.distortions[index]))

    def pair(self, index: int) -> Tuple[BitAllocation, DistortionVector]:
        return self.allocation(index), self.distortion(index)

    def subset(self, indices: np.ndarray) -> "PointCloud":
        return PointCloud(
            self.allocations[indices].copy(),
            self.distortions[indices].copy(),
            self.budget,
            self.step,
        )


CloudLike = Union[PointCloud, Iterable[Tuple[Any, Any]]]


def as_cloud(points: CloudLike, budget: Optional[float] = None) -> PointCloud:
    if isinstance(points, PointCloud):
        return points
    if isinstance(points, ParetoFront):
        return points.cloud
    return PointCloud.from_pairs(points, budget=budget)


@dataclass(frozen=True)
class ParetoFront:
    """A cloud with one label code per point (see LABEL_CODES)."""

    cloud: PointCloud
    labels: np.ndarray
    eps: float = 0.0

    def __post_init__(self) -> None:
        if self.labels.shape != (len(self.cloud),):
            raise DimensionMismatch(
                f"{self.labels.shape[0]} labels for a cloud of {len(self.cloud)} points"
            )
        self.labels.setflags(write=False)

    @classmethod
    def from_labels(
        cls, cloud: CloudLike, labels: Sequence[Union[PointLabel, str, int]], eps: float = 0.0
    ) -> "ParetoFront":
        """Front with caller-supplied labels, e.g. to exercise the checkers on a bad labelling."""
        codes = []
        for label in labels:
            if isinstance(label, (int, np.integer)):
                codes.append(int(label))
            else:
                codes.append(LABEL_CODES[PointLabel(label)])
        return cls(as_cloud(cloud), np.asarray(codes, dtype=np.int8), eps)

    def __len__(self) -> int:
        return len(self.cloud)

    @property
    def budget(self) -> float:
        return self.cloud.budget

    @property
    def grid_step(self) -> Optional[float]:
        return self.cloud.step

    @property
    def dimension(self) -> int:
        return self.cloud.dimension

    @property
    def pareto_mask(self) -> np.ndarray:
        return self.labels == PARETO

    @property
    def weak_mask(self) -> np.ndarray:
        return self.labels != DOMINATED

    @property
    def weak_indices(self) -> np.ndarray:
        return np.flatnonzero(self.weak_mask)

    @property
    def weak_distortions(self) -> np.ndarray:
        return self.cloud.distortions[self.weak_mask]

    @property
    def pareto_distortions(self) -> np.ndarray:
        return self.cloud.distortions[self.pareto_mask]

    def distinct_weak_distortions(self, tol: float = 1e-9) -> np.ndarray:
        return dedupe_rows(self.weak_distortions, tol)

    def label(self, index: int) -> PointLabel:
        return LABELS_BY_CODE[int(self.labels[index])]

    @cached_property
    def points(self) -> List[LabeledPoint]:
        return [
            LabeledPoint(alloc=alloc, distortion=dist, label=self.label(index))
            for index, (alloc, dist) in enumerate(self.cloud)
        ]

    def counts(self) -> Dict[str, int]:
        return {
            label.value: int(np.count_nonzero(self.labels == code))
            for label, code in LABEL_CODES.items()
        }

    def weak_cloud(self) -> PointCloud:
        return self.cloud.subset(self.weak_indices)


def compare(x: Any, y: Any) -> Order:
    """Finest orthant relation of x to y."""
    a, b = as_vector(x), as_vector(y)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare vectors of length {a.shape[0]} and {b.shape[0]}")
    if np.array_equal(a, b):
        return Order.EQUAL
    if np.all(a <= b):
        return Order.LL if np.all(a < b) else Order.LT
    if np.all(a >= b):
        return Order.GG if np.all(a > b) else Order.GT
    return Order.INCOMPARABLE


_IMPLIED: Dict[Order, frozenset] = {
    Order.EQUAL: frozenset({Order.EQUAL}),
    Order.LEQ: frozenset({Order.EQUAL, Order.LT, Order.LL}),
    Order.LT: frozenset({Order.LT, Order.LL}),
    Order.LL: frozenset({Order.LL}),
    Order.INCOMPARABLE: frozenset({Order.INCOMPARABLE}),
}
_IMPLIED.update(
    {
        MIRRORED_ORDER[order]: frozenset(MIRRORED_ORDER[o] for o in implied)
        for order, implied in list(_IMPLIED.items())
    }
)


def relation_holds(x: Any, y: Any, order: Order) -> bool:
    return compare(x, y) in _IMPLIED[Order(order)]


def filter_front(
    points: CloudLike, eps: float = 0.0, budget: Optional[float] = None
) -> ParetoFront:
    """Label every point pareto, weak_only or dominated.

    With eps > 0 the comparisons use slack: q <= p means q_j <= p_j + eps and a strict
    component means q_j < p_j - eps.
    """
    cloud = as_cloud(points, budget)
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    labels = dominance_labels(cloud.distortions, eps)
    front = ParetoFront(cloud, labels, eps)
    logger.debug("Labelled %d points: %s", len(cloud), front.counts())
    return front


def dominance_labels(distortions: np.ndarray, eps: float = 0.0) -> np.ndarray:
    distortions = np.asarray(distortions, dtype=float)
    if eps == 0.0:
        return _labels_via_pareto_set(distortions)
    return _labels_with_slack(distortions, eps)


def pareto_set(distortions: np.ndarray) -> np.ndarray:
    """Rows of the strict Pareto set (duplicates kept), in lexicographic order."""
    order = np.lexsort(distortions.T[::-1])
    ordered = distortions[order]
    kept = np.empty_like(ordered)
    count = 0
    # In lexicographic order every dominator of a row precedes it
    for row in ordered:
        if count:
            front = kept[:count]
            if np.any(np.all(front <= row, axis=1) & np.any(front < row, axis=1)):
                continue
        kept[count] = row
        count += 1
    return kept[:count]


def _labels_via_pareto_set(distortions: np.ndarray) -> np.ndarray:
    # Any point below p lies above some Pareto point, so checking against the Pareto set suffices
    front = pareto_set(distortions)
    n, dim = distortions.shape
    labels = np.empty(n, dtype=np.int8)
    chunk = max(1, _BLOCK_CELLS // max(front.shape[0] * dim, 1))
    for start in range(0, n, chunk):
        block = distortions[start : start + chunk, None, :]
        less = front[None, :, :] < block
        leq = front[None, :, :] <= block
        strict = np.any(np.all(leq, axis=2) & np.any(less, axis=2), axis=1)
        total = np.any(np.all(less, axis=2), axis=1)
        labels[start : start + chunk] = np.where(
            total, DOMINATED, np.where(strict, WEAK_ONLY, PARETO)
        )
    return labels


def _labels_with_slack(distortions: np.ndarray, eps: float) -> np.ndarray:
    n, dim = distortions.shape
    order = np.argsort(distortions[:, 0], kind="stable")
    ordered = distortions[order]
    ends = np.searchsorted(ordered[:, 0], ordered[:, 0] + eps, side="right")
    sorted_labels = np.empty(n, dtype=np.int8)
    chunk = max(1, _BLOCK_CELLS // max(n * dim, 1))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        candidates = ordered[: ends[start:stop].max()][None, :, :]
        block = ordered[start:stop, None, :]
        leq = np.all(candidates <= block + eps, axis=2)
        less = candidates < block - eps
        strict = np.any(leq & np.any(less, axis=2), axis=1)
        total = np.any(np.all(less, axis=2), axis=1)
        sorted_labels[start:stop] = np.where(
            total, DOMINATED, np.where(strict, WEAK_ONLY, PARETO)
        )
    labels = np.empty(n, dtype=np.int8)
    labels[order] = sorted_labels
    return labels


@lru_cache(maxsize=16)
def lattice_points(total: int, dimension: int) -> np.ndarray:
    """Nonnegative integer vectors summing to at most total, in lexicographic order."""
    points = np.zeros((1, 0), dtype=np.int64)
    remaining = np.array([total], dtype=np.int64)
    for _ in range(dimension):
        counts = remaining + 1
        parents = np.repeat(np.arange(points.shape[0]), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        values = np.arange(parents.shape[0], dtype=np.int64) - starts
        points = np.column_stack([points[parents], values])
        remaining = remaining[parents] - values
    points.setflags(write=False)
    return points


def lattice_size(total: int, dimension: int) -> int:
    return math.comb(total + dimension, dimension)


def grid_units(budget: float, step: float) -> int:
    if step <= 0 or not math.isfinite(step):
        raise InvalidGrid(f"grid step must be > 0, got {step}")
    if budget <= 0 or not math.isfinite(budget):
        raise InvalidGrid(f"budget must be > 0, got {budget}")
    return int(math.floor(budget / step + _GRID_SLACK))


def enumerate_grid(
    model: DistortionModel,
    dag: LayerDag,
    budget: float,
    step: float,
    cap: Optional[int] = None,
) -> PointCloud:
    """Every feasible allocation on the step lattice, lexicographic, with its distortion.

    Tabulated models enumerate their own declared rows that fit the budget.
    """
    if model.dimension != dag.node_count:
        raise DimensionMismatch("model and DAG disagree on the number of nodes")
    units = grid_units(budget, step)
    cap = cap or get_settings().grid_point_cap

    if isinstance(model, TabulatedModel):
        rows = model.allocations.sum(axis=1) <= budget * (1.0 + BUDGET_SLACK)
        allocations = model.allocations[rows]
        if allocations.shape[0] == 0:
            raise EmptyInput(f"no table row fits budget {budget}")
        order = np.lexsort(allocations.T[::-1])
        allocations = allocations[order]
        distortions = model.distortions[rows][order]
        logger.info("Enumerated %d tabulated allocations", allocations.shape[0])
        return PointCloud(allocations.copy(), distortions.copy(), float(budget), model.step)

    estimate = lattice_size(units, dag.node_count)
    if estimate > cap:
        raise GridTooLarge(estimate, cap)
    counts = lattice_points(units, dag.node_count)
    allocations = counts * float(step)
    distortions = model.evaluate_units(counts, float(step))
    logger.info(
        "Enumerated %d grid allocations (N=%d, budget=%g, step=%g)",
        allocations.shape[0],
        dag.node_count,
        budget,
        step,
    )
    return PointCloud(allocations, distortions, float(budget), float(step))


def ideal_point(points: CloudLike) -> DistortionVector:
    """Componentwise minimum distortion over the cloud."""
    cloud = as_cloud(points)
    return DistortionVector(values=tuple(float(v) for v in cloud.distortions.min(axis=0)))


def optimum_allocations(points: CloudLike, tol: float = 0.0) -> List[BitAllocation]:
    """Allocations that attain the ideal point in every resolution at once (often none)."""
    cloud = as_cloud(points)
    ideal = cloud.distortions.min(axis=0)
    hits = np.flatnonzero(np.all(cloud.distortions <= ideal + tol, axis=1))
    return [cloud.allocation(int(index)) for index in hits]


def incomparable_pairs(
    front: ParetoFront, limit: Optional[int] = None
) -> List[Tuple[LabeledPoint, LabeledPoint]]:
    """Pairs of Pareto points with distinct distortions, hence ordered by neither."""
    indices = np.flatnonzero(front.pareto_mask)
    firsts: List[int] = []
    seen: List[np.ndarray] = []
    for index in indices:
        row = front.cloud.distortions[index]
        if any(np.array_equal(row, other) for other in seen):
            continue
        seen.append(row)
        firsts.append(int(index))
    pairs: List[Tuple[LabeledPoint, LabeledPoint]] = []
    for a_pos, a in enumerate(firsts):
        for b in firsts[a_pos + 1 :]:
            if limit is not None and len(pairs) >= limit:
                return pairs
            pairs.append((front.points[a], front.points[b]))
    return pairs


__all__ = [
    "CloudLike",
    "ParetoFront",
    "PointCloud",
    "as_cloud",
    "compare",
    "dominance_labels",
    "enumerate_grid",
    "filter_front",
    "grid_units",
    "ideal_point",
    "incomparable_pairs",
    "lattice_points",
    "lattice_size",
    "optimum_allocations",
    "pareto_set",
    "relation_holds",
]
