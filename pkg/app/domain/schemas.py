from __future__ import annotations

import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, field_validator, model_validator

from app.domain.taxonomy import CheckName, PointLabel

# Relative slack when comparing an allocation total against its budget
BUDGET_SLACK = 1e-12


class BitAllocation(BaseModel):
    """Per-layer bit vector b together with the budget it is drawn against."""

    model_config = ConfigDict(frozen=True)

    bits: Tuple[float, ...]
    budget: PositiveFloat

    @property
    def total(self) -> float:
        return math.fsum(self.bits)

    @property
    def is_feasible(self) -> bool:
        return all(b >= 0.0 for b in self.bits) and self.total <= self.budget * (
            1.0 + BUDGET_SLACK
        )

    def __len__(self) -> int:
        return len(self.bits)


class DistortionVector(BaseModel):
    """Per-resolution distortion image g(b) of an allocation."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[float, ...]

    @field_validator("values")
    @classmethod
    def _finite_nonnegative(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        for index, value in enumerate(values):
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"component {index} must be finite and >= 0, got {value}")
        return values

    def __len__(self) -> int:
        return len(self.values)


class WeightVector(BaseModel):
    """Normalized nonnegative weights of the weighted-sum scalarization."""

    model_config = ConfigDict(frozen=True)

    weights: Tuple[float, ...]

    @field_validator("weights")
    @classmethod
    def _normalized(cls, weights: Tuple[float, ...]) -> Tuple[float, ...]:
        if not weights:
            raise ValueError("weight vector must not be empty")
        if any(w < 0.0 or not math.isfinite(w) for w in weights):
            raise ValueError(f"weights must be finite and >= 0, got {weights}")
        if abs(math.fsum(weights) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {math.fsum(weights)}")
        return weights

    @classmethod
    def normalized(cls, raw: Sequence[float]) -> "WeightVector":
        total = math.fsum(raw)
        if total <= 0.0 or any(w < 0.0 for w in raw):
            raise ValueError(f"cannot normalize weights {tuple(raw)}")
        return cls(weights=tuple(w / total for w in raw))

    def __len__(self) -> int:
        return len(self.weights)


class LabeledPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    alloc: BitAllocation
    distortion: DistortionVector
    label: PointLabel

    @property
    def is_weak(self) -> bool:
        return self.label is not PointLabel.DOMINATED


class Minimizer(BaseModel):
    model_config = ConfigDict(frozen=True)

    alloc: BitAllocation
    distortion: DistortionVector


class ScalarizationResult(BaseModel):
    weight: WeightVector
    minimizers: List[Minimizer]
    objective: float
    residual: Optional[float] = None
    iterations: Optional[int] = None


class ConditionReport(BaseModel):
    """Outcome of one hypothesis or conclusion check, with counterexamples."""

    check_name: CheckName
    passed: bool
    witnesses: List[Dict[str, Any]] = Field(default_factory=list)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    notes: Optional[str] = None

    @model_validator(mode="after")
    def _passed_iff_no_witnesses(self) -> "ConditionReport":
        if self.passed == bool(self.witnesses):
            raise ValueError("passed must be true exactly when there are no witnesses")
        return self

    @classmethod
    def from_witnesses(
        cls,
        check_name: CheckName,
        witnesses: List[Dict[str, Any]],
        tolerances: Dict[str, float],
        notes: Optional[str] = None,
    ) -> "ConditionReport":
        return cls(
            check_name=check_name,
            passed=not witnesses,
            witnesses=witnesses,
            tolerances=tolerances,
            notes=notes,
        )


class CoverageReport(BaseModel):
    """How many weakly Pareto distortions the scalarization sweep recovered."""

    weak_pareto_count: int = Field(ge=0)
    covered_count: int = Field(ge=0)
    missed: List[Tuple[float, ...]] = Field(default_factory=list)
    match_tolerance: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _counts_add_up(self) -> "CoverageReport":
        if self.covered_count + len(self.missed) != self.weak_pareto_count:
            raise ValueError("covered_count + len(missed) must equal weak_pareto_count")
        return self

    @property
    def full(self) -> bool:
        return not self.missed


__all__ = [
    "BUDGET_SLACK",
    "BitAllocation",
    "ConditionReport",
    "CoverageReport",
    "DistortionVector",
    "LabeledPoint",
    "Minimizer",
    "ScalarizationResult",
    "WeightVector",
]
