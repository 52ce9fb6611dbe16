"""Condition checkers and the S0 coverage comparison."""

from __future__ import annotations

import math

import numpy as np
import pytest

from app.domain.errors import EmptyFront, TooFewSamples
from app.domain.graph import build_dag
from app.domain.taxonomy import CheckName
from app.services.conditions import (
    check_bounding_box,
    check_envelope,
    check_envelope_dominance,
    check_front_continuity,
    check_inverse_concavity,
    check_lemma1,
    check_minkowski_convexity,
    compare_S0_vs_weak_pareto,
    probe_pairs,
    run_checks,
)
from app.services.distortion import TabulatedModel, rd_envelope
from app.services.pareto import DOMINATED, PARETO, ParetoFront, PointCloud, filter_front
from app.services.scalarize import sweep_S0


def test_envelope_convex_and_decreasing() -> None:
    report = check_envelope([(0, 1.0), (1, 0.5), (2, 0.3)])
    assert report.passed
    assert report.check_name is CheckName.ENVELOPE


def test_envelope_not_convex() -> None:
    report = check_envelope([(0, 1.0), (1, 0.9), (2, 0.2)])
    assert not report.passed
    assert report.witnesses[0]["kind"] == "not_convex"
    assert report.witnesses[0]["second_difference"] == pytest.approx(-0.6)


def test_envelope_not_decreasing() -> None:
    report = check_envelope([(0, 1.0), (1, 1.0), (2, 1.0)])
    assert {w["kind"] for w in report.witnesses} == {"not_decreasing"}
    assert len(report.witnesses) == 2


def test_envelope_needs_three_distinct_samples() -> None:
    with pytest.raises(TooFewSamples):
        check_envelope([(0, 1.0), (1, 0.5)])
    with pytest.raises(TooFewSamples):
        check_envelope([(0, 1.0), (0, 0.8), (1, 0.5)])


def test_exponential_envelopes_pass(diamond_model, diamond_dag, diamond_cloud) -> None:
    envelopes = [rd_envelope(diamond_model, diamond_dag, i, 1.0, 0.1) for i in range(3)]
    for envelope in envelopes:
        assert check_envelope(envelope).passed
        assert check_inverse_concavity(envelope).passed
    assert check_envelope_dominance(diamond_cloud, envelopes, diamond_dag).passed


def test_inverse_map_curvature_flags_concave_envelopes(nonconvex_cloud) -> None:
    dag = build_dag(2, [(0, 1)])
    model = TabulatedModel(dag, nonconvex_cloud.allocations, nonconvex_cloud.distortions)
    envelope = rd_envelope(model, dag, 0, 1.0)
    report = check_inverse_concavity(envelope, pairs=[(1.0, 5.0)])
    assert not report.passed
    assert report.witnesses[0]["kind"] == "midpoint_above_chord"


def test_probe_pairs_are_deterministic(diamond_model, diamond_dag) -> None:
    envelope = rd_envelope(diamond_model, diamond_dag, 0, 1.0)
    first, second = probe_pairs(envelope), probe_pairs(envelope)
    assert np.array_equal(first, second)
    assert first.min() >= math.exp(-1.0) and first.max() <= 1.0


def test_front_continuity(diamond_cloud) -> None:
    front = filter_front(diamond_cloud)
    assert check_front_continuity(front, 0.4).passed
    report = check_front_continuity(front, 1e-4)
    assert not report.passed
    assert "longest gap" in report.notes


def test_front_continuity_needs_weak_points(nonconvex_cloud) -> None:
    front = ParetoFront.from_labels(nonconvex_cloud, ["dominated"] * 3)
    with pytest.raises(EmptyFront):
        check_front_continuity(front, 1.0)


def test_bounding_box_on_convex_front(diamond_cloud) -> None:
    report = check_bounding_box(filter_front(diamond_cloud))
    assert report.passed, report.witnesses[:3]


def test_bounding_box_single_violation() -> None:
    """A point between two others in curve order but outside their box."""
    cloud = PointCloud.from_distortions([(1, 5), (0.5, 3), (5, 1)])
    front = ParetoFront.from_labels(cloud, ["pareto"] * 3)
    report = check_bounding_box(front)
    assert len(report.witnesses) == 1
    witness = report.witnesses[0]
    assert witness["a"] == [0.5, 3.0]
    assert witness["c"] == [1.0, 5.0]
    assert witness["b"] == [5.0, 1.0]


def test_minkowski_convexity(diamond_cloud, nonconvex_cloud) -> None:
    assert check_minkowski_convexity(diamond_cloud).passed
    report = check_minkowski_convexity(nonconvex_cloud)
    assert [w["point"] for w in report.witnesses] == [[3.5, 3.5]]
    assert report.witnesses[0]["margin"] == pytest.approx(0.5)


def test_minkowski_accepts_plain_vectors() -> None:
    report = check_minkowski_convexity([(1, 5), (3.5, 3.5), (5, 1)])
    assert not report.passed
    assert check_minkowski_convexity([(1, 5), (2.5, 2.5), (5, 1)]).passed


def test_coverage_full_on_convex(diamond_cloud) -> None:
    front = filter_front(diamond_cloud)
    report = compare_S0_vs_weak_pareto(sweep_S0(front, 64), front, 0.2)
    assert report.full
    assert report.covered_count == report.weak_pareto_count


def test_coverage_misses_unsupported_point(nonconvex_cloud) -> None:
    front = filter_front(nonconvex_cloud)
    report = compare_S0_vs_weak_pareto(sweep_S0(front, 64), front, 1.0)
    assert (report.covered_count, report.weak_pareto_count) == (2, 3)
    assert report.missed == [(3.5, 3.5)]


def test_weak_set_covers_cloud_on_true_labels(diamond_cloud) -> None:
    assert check_lemma1(filter_front(diamond_cloud)).passed
    assert check_lemma1(filter_front(diamond_cloud), require_saturation=True).passed


def test_weak_set_check_allows_unsaturated_optimum() -> None:
    """A table whose best point spends no bits is labelled correctly and passes."""
    cloud = PointCloud(
        allocations=np.array([[0.0, 0.0], [0.5, 0.5]]),
        distortions=np.array([[1.0, 1.0], [2.0, 2.0]]),
        budget=1.0,
        step=0.5,
    )
    front = filter_front(cloud)
    assert front.labels.tolist() == [PARETO, DOMINATED]
    assert check_lemma1(front).passed
    strict = check_lemma1(front, require_saturation=True)
    assert [w["kind"] for w in strict.witnesses] == ["not_above_saturated_point"]


def test_weak_set_check_catches_bad_labels() -> None:
    cloud = PointCloud(
        allocations=np.array([[0.5, 0.5], [0.0, 0.5]]),
        distortions=np.array([[1.0, 1.0], [2.0, 2.0]]),
        budget=1.0,
        step=0.5,
    )
    front = ParetoFront.from_labels(cloud, ["dominated", "pareto"])
    kinds = {w["kind"] for w in check_lemma1(front).witnesses}
    assert kinds == {"not_weakly_pareto", "not_above_weak_set"}


def test_run_checks_order(diamond_model, diamond_dag, diamond_cloud) -> None:
    envelopes = [rd_envelope(diamond_model, diamond_dag, i, 1.0, 0.1) for i in range(3)]
    reports = run_checks(filter_front(diamond_cloud), envelopes, diamond_dag, gap_threshold=0.4)
    names = [r.check_name for r in reports]
    assert names == [CheckName.ENVELOPE] * 3 + [CheckName.ENVELOPE_DOMINANCE] + [
        CheckName.INVERSE_CONCAVITY
    ] * 3 + [
        CheckName.FRONT_CONTINUITY,
        CheckName.BOUNDING_BOX,
        CheckName.MINKOWSKI_CONVEXITY,
        CheckName.LEMMA1,
    ]
    assert all(r.passed for r in reports), [r.check_name for r in reports if not r.passed]
