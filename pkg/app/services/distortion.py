from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.domain.errors import (
    DimensionMismatch,
    EmptySlice,
    InfeasibleAllocation,
    ModelError,
    NotMonotone,
    OffGrid,
    OutOfRange,
)
from app.domain.graph import LayerDag
from app.domain.schemas import BUDGET_SLACK, BitAllocation, DistortionVector
from app.domain.taxonomy import ModelKind
from app.infra import get_logger, get_settings

logger = get_logger(__name__)

DEFAULT_BISECTION_TOL = 1e-9
# Rates within this many grid steps of a bucket centre map to that bucket
_BUCKET_SLACK = 1e-6


def membership_matrix(dag: LayerDag) -> np.ndarray:
    """(N, N) 0/1 matrix with row i marking the members of resolution subgraph i."""
    matrix = np.zeros((dag.node_count, dag.node_count))
    for sub in dag.subgraphs:
        matrix[sub.resolution, list(sub.members)] = 1.0
    return matrix


def subgraph_rates(dag: LayerDag, allocations: np.ndarray) -> np.ndarray:
    """Total bits each allocation spends on every resolution subgraph, shape (n, N)."""
    return np.atleast_2d(allocations) @ membership_matrix(dag).T


class DistortionModel(ABC):
    """Per-resolution distortion functions g_i over the bits of a LayerDag."""

    kind: ModelKind

    def __init__(self, dag: LayerDag) -> None:
        self.dag = dag

    @property
    def dimension(self) -> int:
        return self.dag.node_count

    @abstractmethod
    def evaluate(self, allocations: np.ndarray) -> np.ndarray:
        """Distortion rows for an (n, N) array of allocations."""

    def evaluate_units(self, units: np.ndarray, step: float) -> np.ndarray:
        """Distortion rows for integer grid counts; the allocations are units * step."""
        return self.evaluate(np.asarray(units, dtype=float) * step)

    @abstractmethod
    def envelope(self, i: int, budget: float, step: Optional[float] = None) -> "RdEnvelope":
        """Lower R-D envelope D_i(r) of resolution i on [0, budget]."""


class LayeredExponentialModel(DistortionModel):
    """g_i(b) = c_i * exp(-sum_j gamma_ij * b_j) over the members j of resolution subgraph i."""

    kind = ModelKind.LAYERED_EXPONENTIAL

    def __init__(self, dag: LayerDag, bases: np.ndarray, gains: np.ndarray) -> None:
        super().__init__(dag)
        bases = np.asarray(bases, dtype=float)
        gains = np.asarray(gains, dtype=float)
        n = dag.node_count
        if bases.shape != (n,) or gains.shape != (n, n):
            raise DimensionMismatch(
                f"expected bases of shape ({n},) and gains ({n}, {n}), "
                f"got {bases.shape} and {gains.shape}"
            )
        if np.any(bases <= 0) or not np.all(np.isfinite(bases)):
            raise ModelError(f"bases must be finite and > 0, got {bases.tolist()}")
        if np.any(gains < 0) or not np.all(np.isfinite(gains)):
            raise ModelError("gains must be finite and >= 0")
        outside = gains * (1.0 - membership_matrix(dag))
        if np.any(outside != 0):
            i, j = (int(v) for v in np.argwhere(outside != 0)[0])
            raise ModelError(f"resolution {i} has a gain on node {j} outside its subgraph")
        for i in range(n):
            if gains[i].max() <= 0:
                raise ModelError(f"resolution {i} needs at least one positive gain")
        self.bases = bases
        self.gains = gains
        self.bases.setflags(write=False)
        self.gains.setflags(write=False)

    @classmethod
    def from_parameters(
        cls,
        dag: LayerDag,
        bases: Optional[Sequence[float]] = None,
        gains: Optional[Sequence[Optional[Mapping[int, float]]]] = None,
    ) -> "LayeredExponentialModel":
        """Build from per-resolution base c_i and sparse gain maps; missing gains default to 1."""
        n = dag.node_count
        base_array = np.ones(n) if bases is None else np.asarray(bases, dtype=float)
        matrix = np.zeros((n, n))
        for i in range(n):
            members = dag.members(i)
            gain_map = gains[i] if gains is not None and i < len(gains) else None
            matrix[i, list(members)] = 1.0
            if not gain_map:
                continue
            for node, gain in gain_map.items():
                node = int(node)
                if node not in members:
                    raise ModelError(
                        f"resolution {i} has a gain on node {node} outside its subgraph "
                        f"{list(members)}"
                    )
                matrix[i, node] = float(gain)
        return cls(dag, base_array, matrix)

    @property
    def max_gains(self) -> np.ndarray:
        return self.gains.max(axis=1)

    def evaluate(self, allocations: np.ndarray) -> np.ndarray:
        allocations = np.atleast_2d(np.asarray(allocations, dtype=float))
        return self.bases * np.exp(-(allocations @ self.gains.T))

    def evaluate_units(self, units: np.ndarray, step: float) -> np.ndarray:
        # Equal integer exponent sums map to bit-identical distortions
        units = np.atleast_2d(np.asarray(units, dtype=float))
        return self.bases * np.exp(-((units @ self.gains.T) * step))

    def gradient(self, weights: np.ndarray, allocation: np.ndarray) -> np.ndarray:
        """Gradient of sum_i w_i g_i(b) with respect to b."""
        values = self.evaluate(allocation)[0]
        return -(self.gains.T @ (weights * values))

    def envelope(self, i: int, budget: float, step: Optional[float] = None) -> "RdEnvelope":
        i = self.dag.check_node(i)
        step = step or budget / 100.0
        count = max(int(math.floor(budget / step + _BUCKET_SLACK)), 1)
        rates = np.linspace(0.0, count * step, count + 1)
        base, gain = float(self.bases[i]), float(self.max_gains[i])
        return RdEnvelope(
            resolution=i,
            budget=float(budget),
            step=float(step),
            rates=rates,
            values=base * np.exp(-gain * rates),
            base=base,
            gain=gain,
        )


class TabulatedModel(DistortionModel):
    """Explicit map from declared allocation grid points to distortion vectors; no extrapolation."""

    kind = ModelKind.TABULATED

    def __init__(
        self,
        dag: LayerDag,
        allocations: np.ndarray,
        distortions: np.ndarray,
        step: Optional[float] = None,
    ) -> None:
        super().__init__(dag)
        allocations = np.atleast_2d(np.asarray(allocations, dtype=float))
        distortions = np.atleast_2d(np.asarray(distortions, dtype=float))
        n = dag.node_count
        if allocations.shape[1] != n or distortions.shape != allocations.shape:
            raise DimensionMismatch(
                f"table needs {n} bit and {n} distortion columns per row, "
                f"got {allocations.shape} and {distortions.shape}"
            )
        if np.any(allocations < 0):
            raise ModelError("tabulated allocations must be nonnegative")
        if np.any(distortions < 0) or not np.all(np.isfinite(distortions)):
            raise ModelError("tabulated distortions must be finite and >= 0")
        self.step = float(step) if step else infer_step(allocations)
        self.allocations = allocations
        self.distortions = distortions
        self._index: Dict[Tuple[int, ...], int] = {}
        for row, key in enumerate(self._keys(allocations)):
            if key in self._index:
                raise ModelError(f"duplicate table row for allocation {allocations[row].tolist()}")
            self._index[key] = row

    def _keys(self, allocations: np.ndarray) -> List[Tuple[int, ...]]:
        units = allocations / self.step
        rounded = np.rint(units)
        if np.any(np.abs(units - rounded) > _BUCKET_SLACK):
            bad = allocations[np.any(np.abs(units - rounded) > _BUCKET_SLACK, axis=1)][0]
            raise OffGrid(f"allocation {bad.tolist()} is not on the grid of step {self.step}")
        return [tuple(int(u) for u in row) for row in rounded]

    def evaluate(self, allocations: np.ndarray) -> np.ndarray:
        allocations = np.atleast_2d(np.asarray(allocations, dtype=float))
        rows = []
        for key, allocation in zip(self._keys(allocations), allocations):
            row = self._index.get(key)
            if row is None:
                raise OffGrid(f"allocation {allocation.tolist()} is not a declared table row")
            rows.append(row)
        return self.distortions[rows]

    def envelope(self, i: int, budget: float, step: Optional[float] = None) -> "RdEnvelope":
        i = self.dag.check_node(i)
        step = step or self.step
        rates = subgraph_rates(self.dag, self.allocations)[:, i]
        feasible = self.allocations.sum(axis=1) <= budget * (1.0 + BUDGET_SLACK)
        buckets: Dict[int, float] = {}
        for rate, value in zip(rates[feasible], self.distortions[feasible, i]):
            bucket = int(np.rint(rate / step))
            buckets[bucket] = min(value, buckets.get(bucket, math.inf))
        if not buckets:
            raise EmptySlice(f"no table row fits budget {budget} for resolution {i}")
        keys = sorted(buckets)
        return RdEnvelope(
            resolution=i,
            budget=float(budget),
            step=float(step),
            rates=np.array([k * step for k in keys]),
            values=np.array([buckets[k] for k in keys]),
        )


def infer_step(allocations: np.ndarray) -> float:
    """Smallest positive gap between distinct coordinate values of a declared grid."""
    values = np.unique(np.round(np.asarray(allocations, dtype=float), 12))
    gaps = np.diff(values)
    gaps = gaps[gaps > 1e-12]
    return float(gaps.min()) if gaps.size else 1.0


@dataclass(frozen=True)
class RdEnvelope:
    """Sampled lower R-D envelope of one resolution, with a closed form when the model has one."""

    resolution: int
    budget: float
    step: float
    rates: np.ndarray
    values: np.ndarray
    base: Optional[float] = None
    gain: Optional[float] = None

    @property
    def analytic(self) -> bool:
        return self.base is not None

    @property
    def domain(self) -> Tuple[float, float]:
        if self.analytic:
            return 0.0, self.budget
        return float(self.rates[0]), float(self.rates[-1])

    def value(self, r: float) -> float:
        """D_i(r); tabulated envelopes answer only at sampled rate buckets."""
        if self.analytic:
            self._check_domain(r)
            return self.base * math.exp(-self.gain * r)
        bucket = np.rint(self.rates / self.step) == np.rint(r / self.step)
        if abs(r / self.step - np.rint(r / self.step)) > _BUCKET_SLACK or not bucket.any():
            raise EmptySlice(f"no grid allocation of resolution {self.resolution} at rate {r}")
        return float(self.values[bucket][0])

    def continuous_value(self, r: float) -> float:
        """Continuous extension: closed form, or piecewise-linear between sampled buckets."""
        if self.analytic:
            return self.value(r)
        self._check_domain(r)
        return float(np.interp(r, self.rates, self.values))

    def values_at(self, rates: np.ndarray) -> np.ndarray:
        """Vectorised continuous_value."""
        rates = np.asarray(rates, dtype=float)
        lo, hi = self.domain
        slack = _BUCKET_SLACK * max(self.step, 1.0)
        if rates.size and (rates.min() < lo - slack or rates.max() > hi + slack):
            raise OutOfRange(f"rates span [{rates.min()}, {rates.max()}], domain is [{lo}, {hi}]")
        if self.analytic:
            return self.base * np.exp(-self.gain * rates)
        return np.interp(rates, self.rates, self.values)

    def samples(self) -> List[Tuple[float, float]]:
        return [(float(r), float(d)) for r, d in zip(self.rates, self.values)]

    def _check_domain(self, r: float) -> None:
        lo, hi = self.domain
        slack = _BUCKET_SLACK * max(self.step, 1.0)
        if not lo - slack <= r <= hi + slack:
            raise OutOfRange(f"rate {r} outside envelope domain [{lo}, {hi}]")


def distortion_vector(
    model: DistortionModel, dag: LayerDag, alloc: BitAllocation
) -> DistortionVector:
    bits = np.asarray(alloc.bits, dtype=float)
    if bits.shape[0] != dag.node_count or model.dimension != dag.node_count:
        raise DimensionMismatch(
            f"allocation has {bits.shape[0]} entries, DAG has {dag.node_count} nodes"
        )
    negative = np.flatnonzero(bits < 0)
    if negative.size:
        index = int(negative[0])
        raise InfeasibleAllocation(f"bit entry {index} is negative ({bits[index]})")
    if not alloc.is_feasible:
        raise InfeasibleAllocation(f"allocation total {alloc.total} exceeds budget {alloc.budget}")
    values = model.evaluate(bits[None, :])[0]
    return DistortionVector(values=tuple(float(v) for v in values))


def rd_envelope(
    model: DistortionModel, dag: LayerDag, i: int, budget: float, step: Optional[float] = None
) -> RdEnvelope:
    if model.dimension != dag.node_count:
        raise DimensionMismatch("model and DAG disagree on the number of nodes")
    envelope = model.envelope(i, budget, step)
    logger.debug(
        "Envelope of resolution %d: %d samples on [%.4g, %.4g]",
        envelope.resolution,
        envelope.rates.size,
        *envelope.domain,
    )
    return envelope


def inverse_rate(
    envelope: RdEnvelope,
    d: float,
    tol: float = DEFAULT_BISECTION_TOL,
    max_iterations: Optional[int] = None,
) -> float:
    """Rate r with |D(r) - d| <= tol, by bisection on a strictly decreasing envelope."""
    if envelope.values.size >= 2 and not np.all(np.diff(envelope.values) < 0):
        raise NotMonotone(
            f"envelope of resolution {envelope.resolution} is not strictly decreasing"
        )
    max_iterations = max_iterations or get_settings().bisection_max_iterations

    lo, hi = envelope.domain
    d_top = envelope.continuous_value(lo)
    d_bottom = envelope.continuous_value(hi)
    if d == d_top:
        return lo
    if d == d_bottom:
        return hi
    if d > d_top + tol or d < d_bottom - tol:
        raise OutOfRange(f"distortion {d} outside envelope image [{d_bottom}, {d_top}]")
    if d >= d_top:
        return lo
    if d <= d_bottom:
        return hi

    mid = 0.5 * (lo + hi)
    for _ in range(max_iterations):
        mid = 0.5 * (lo + hi)
        value = envelope.continuous_value(mid)
        if abs(value - d) <= tol:
            return mid
        if value > d:
            lo = mid
        else:
            hi = mid
    logger.warning("Bisection hit %d iterations for d=%g", max_iterations, d)
    return mid


__all__ = [
    "DEFAULT_BISECTION_TOL",
    "DistortionModel",
    "LayeredExponentialModel",
    "RdEnvelope",
    "TabulatedModel",
    "distortion_vector",
    "infer_step",
    "inverse_rate",
    "membership_matrix",
    "rd_envelope",
    "subgraph_rates",
]
