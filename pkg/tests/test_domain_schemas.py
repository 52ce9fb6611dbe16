import pytest
from pydantic import ValidationError

from app.domain.schemas import (
    BitAllocation,
    ConditionReport,
    CoverageReport,
    DistortionVector,
    LabeledPoint,
    WeightVector,
)
from app.domain.taxonomy import CheckName, PointLabel


def test_allocation_feasibility_uses_relative_slack() -> None:
    assert BitAllocation(bits=(0.1, 0.2, 0.7), budget=1.0).is_feasible
    assert BitAllocation(bits=(0.5, 0.5 + 1e-13), budget=1.0).is_feasible
    assert not BitAllocation(bits=(0.5, 0.6), budget=1.0).is_feasible
    assert not BitAllocation(bits=(-0.1, 0.5), budget=1.0).is_feasible


def test_allocation_rejects_nonpositive_budget() -> None:
    with pytest.raises(ValidationError):
        BitAllocation(bits=(0.0,), budget=0.0)


def test_distortion_vector_rejects_negative_and_nan() -> None:
    assert len(DistortionVector(values=(0.0, 1.5))) == 2
    with pytest.raises(ValidationError):
        DistortionVector(values=(1.0, -0.5))
    with pytest.raises(ValidationError):
        DistortionVector(values=(float("nan"),))


def test_weight_vector_normalization() -> None:
    weight = WeightVector.normalized([1, 1, 2])
    assert weight.weights == (0.25, 0.25, 0.5)
    with pytest.raises(ValueError):
        WeightVector.normalized([0, 0])
    with pytest.raises(ValidationError):
        WeightVector(weights=(0.5, 0.6))


def test_labeled_point_weakness() -> None:
    alloc = BitAllocation(bits=(1.0,), budget=1.0)
    distortion = DistortionVector(values=(0.3,))
    assert LabeledPoint(alloc=alloc, distortion=distortion, label=PointLabel.WEAK_ONLY).is_weak
    dominated = LabeledPoint(alloc=alloc, distortion=distortion, label=PointLabel.DOMINATED)
    assert not dominated.is_weak


def test_condition_report_passes_exactly_without_witnesses() -> None:
    report = ConditionReport.from_witnesses(CheckName.ENVELOPE, [], {"tol": 1e-9})
    assert report.passed
    failing = ConditionReport.from_witnesses(CheckName.ENVELOPE, [{"kind": "not_convex"}], {})
    assert not failing.passed
    with pytest.raises(ValidationError):
        ConditionReport(check_name=CheckName.LEMMA1, passed=True, witnesses=[{"i": 0}])


def test_coverage_counts_must_add_up() -> None:
    report = CoverageReport(
        weak_pareto_count=3, covered_count=2, missed=[(3.5, 3.5)], match_tolerance=1.0
    )
    assert not report.full
    with pytest.raises(ValidationError):
        CoverageReport(weak_pareto_count=3, covered_count=3, missed=[(1.0,)], match_tolerance=0)
