"""Weighted-sum scalarization and the S0 sweep."""

from __future__ import annotations

import math

import numpy as np
import pytest

from app.domain.errors import DimensionMismatch, GridTooLarge, NoConvergence, NotConvexModel
from app.domain.graph import build_dag
from app.domain.schemas import WeightVector
from app.services.distortion import TabulatedModel
from app.services.pareto import DOMINATED, enumerate_grid, filter_front
from app.services.scalarize import (
    project_to_budget,
    scalarize_continuous,
    scalarize_discrete,
    sweep_S0,
    weight_lattice,
)


def test_weight_lattice_is_ordered_and_normalized() -> None:
    weights = weight_lattice(2, 4)
    assert weights.tolist() == [
        [0.0, 1.0],
        [0.25, 0.75],
        [0.5, 0.5],
        [0.75, 0.25],
        [1.0, 0.0],
    ]
    assert weight_lattice(3, 3).shape == (10, 3)
    assert np.allclose(weight_lattice(4, 5).sum(axis=1), 1.0)


def test_weight_lattice_cap() -> None:
    with pytest.raises(GridTooLarge, match="weight lattice"):
        weight_lattice(3, 100, cap=10)


def test_weight_vector_validation() -> None:
    with pytest.raises(ValueError):
        WeightVector(weights=(0.5, 0.6))
    with pytest.raises(ValueError):
        WeightVector(weights=(1.5, -0.5))
    assert WeightVector.normalized([1, 3]).weights == (0.25, 0.75)


def test_discrete_scalarization_on_nonconvex(nonconvex_cloud) -> None:
    result = scalarize_discrete((0.5, 0.5), nonconvex_cloud)
    assert result.objective == 3.0
    assert [m.distortion.values for m in result.minimizers] == [(1.0, 5.0), (5.0, 1.0)]
    assert scalarize_discrete((1.0, 0.0), nonconvex_cloud).minimizers[0].alloc.bits == (1.0, 0.0)


def test_discrete_dimension_mismatch(nonconvex_cloud) -> None:
    with pytest.raises(DimensionMismatch):
        scalarize_discrete((0.2, 0.3, 0.5), nonconvex_cloud)


def test_middle_point_never_selected(nonconvex_cloud) -> None:
    """(3.5, 3.5) has w.g >= 3.5 > min(w.(1,5), w.(5,1)) for every weight."""
    s0 = sweep_S0(nonconvex_cloud, 1024)
    assert len(s0) == 1025
    found = {d.values for d in s0.distinct_distortions}
    assert found == {(1.0, 5.0), (5.0, 1.0)}


def test_sweep_minimizers_are_weakly_pareto(diamond_cloud) -> None:
    front = filter_front(diamond_cloud)
    s0 = sweep_S0(diamond_cloud, 16)
    rows = {tuple(row) for row in diamond_cloud.distortions[front.labels == DOMINATED]}
    for entry in s0.entries:
        for minimizer in entry.minimizers:
            assert minimizer.distortion.values not in rows


def test_front_sweep_matches_cloud_sweep(diamond_cloud) -> None:
    front = filter_front(diamond_cloud)
    by_front = sweep_S0(front, 8).matrix()
    by_cloud = sweep_S0(diamond_cloud, 8).matrix()
    assert sorted(map(tuple, by_front)) == sorted(map(tuple, by_cloud))


@pytest.mark.parametrize("weight", ((0.2, 0.3, 0.5), (0.0, 0.5, 0.5), (0.25, 0.25, 0.5)))
def test_scaled_weights_keep_the_minimizers(diamond_cloud, weight) -> None:
    base = {m.alloc.bits for m in scalarize_discrete(weight, diamond_cloud).minimizers}
    for scale in (0.1, 3.0, 7.0):
        scaled = WeightVector.normalized([scale * w for w in weight])
        found = {m.alloc.bits for m in scalarize_discrete(scaled, diamond_cloud).minimizers}
        assert found == base


def test_vertex_weights_reach_component_minimum(diamond_cloud) -> None:
    for i in range(3):
        weight = tuple(1.0 if j == i else 0.0 for j in range(3))
        result = scalarize_discrete(weight, diamond_cloud)
        best = diamond_cloud.distortions[:, i].min()
        assert all(m.distortion.values[i] == best for m in result.minimizers)


def test_discrete_examples_on_coarse_diamond(diamond_model, diamond_dag) -> None:
    cloud = enumerate_grid(diamond_model, diamond_dag, 1.0, 0.5)
    single = scalarize_discrete((0.0, 1.0, 0.0), cloud)
    assert [m.alloc.bits for m in single.minimizers] == [(0.0, 1.0, 0.0)]
    assert single.objective == pytest.approx(math.exp(-2.0))
    tied = scalarize_discrete((0.0, 0.5, 0.5), cloud)
    assert [m.alloc.bits for m in tied.minimizers] == [(0.0, 0.5, 0.5), (1.0, 0.0, 0.0)]
    assert tied.objective == pytest.approx(math.exp(-1.0))
    even = scalarize_discrete((1 / 3, 1 / 3, 1 / 3), cloud)
    assert [m.alloc.bits for m in even.minimizers] == [(1.0, 0.0, 0.0)]
    assert even.objective == pytest.approx(math.exp(-1.0))


def test_fine_grid_sweep_never_selects_dominated_points(diamond_model, diamond_dag) -> None:
    cloud = enumerate_grid(diamond_model, diamond_dag, 1.0, 0.02)
    front = filter_front(cloud)
    dominated = {tuple(row) for row in cloud.distortions[front.labels == DOMINATED]}
    s0 = sweep_S0(cloud, 16)
    for entry in s0.entries:
        for minimizer in entry.minimizers:
            assert minimizer.distortion.values not in dominated


def test_project_to_budget() -> None:
    assert project_to_budget(np.array([0.2, -0.1, 0.3]), 1.0).tolist() == [0.2, 0.0, 0.3]
    projected = project_to_budget(np.array([1.0, 1.0, 0.0]), 1.0)
    assert projected.tolist() == pytest.approx([0.5, 0.5, 0.0])
    projected = project_to_budget(np.array([2.0, 0.5, -1.0]), 1.0)
    assert projected.sum() == pytest.approx(1.0)
    assert projected.tolist() == pytest.approx([1.0, 0.0, 0.0])


def test_continuous_vertex_solution(diamond_model, diamond_dag) -> None:
    """All weight on resolution 2 puts every bit on node 2 (gain 2 beats gain 1)."""
    result = scalarize_continuous((0.0, 0.0, 1.0), diamond_model, diamond_dag, 1.0)
    assert result.minimizers[0].alloc.bits == pytest.approx((0.0, 0.0, 1.0), abs=1e-6)
    assert result.objective == pytest.approx(math.exp(-2.0), abs=1e-9)
    assert result.residual is not None and result.residual <= 1e-9


def test_continuous_interior_solution(diamond_model, diamond_dag) -> None:
    """Equal weight on resolutions 1 and 2 splits the budget symmetrically."""
    result = scalarize_continuous((0.0, 0.5, 0.5), diamond_model, diamond_dag, 1.0)
    bits = result.minimizers[0].alloc.bits
    assert bits[1] == pytest.approx(bits[2], abs=1e-6)
    assert sum(bits) == pytest.approx(1.0, abs=1e-9)
    # Along the budget face the objective is e^-1 * cosh(b1 - b2)
    assert result.objective == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_continuous_flat_minimizer_segment(diamond_model, diamond_dag) -> None:
    """On the budget face the objective depends only on b1 - b2, so minimizers form a segment."""
    result = scalarize_continuous((0.0, 1 / 3, 2 / 3), diamond_model, diamond_dag, 1.0)
    bits = result.minimizers[0].alloc.bits
    assert sum(bits) == pytest.approx(1.0, abs=1e-9)
    assert bits[1] - bits[2] == pytest.approx(-math.log(2.0) / 2.0, abs=1e-4)
    assert result.objective == pytest.approx(2.0 * math.sqrt(2.0) / (3.0 * math.e), abs=1e-9)


def test_continuous_iteration_cap(diamond_model, diamond_dag) -> None:
    with pytest.raises(NoConvergence, match="no convergence after 1 iterations"):
        scalarize_continuous(
            (0.0, 0.5, 0.5), diamond_model, diamond_dag, 1.0, tol=0.0, max_iterations=1
        )


def test_continuous_refuses_tabulated_models() -> None:
    dag = build_dag(2, [(0, 1)])
    model = TabulatedModel(dag, np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]))
    with pytest.raises(NotConvexModel):
        scalarize_continuous((0.5, 0.5), model, dag, 1.0)


def test_continuous_sweep(diamond_model, diamond_dag) -> None:
    s0 = sweep_S0(diamond_model, 2, dag=diamond_dag, budget=1.0)
    assert len(s0) == 6
    for entry in s0.entries:
        assert entry.residual is not None
        assert sum(entry.minimizers[0].alloc.bits) <= 1.0 + 1e-9
    with pytest.raises(ValueError):
        sweep_S0(diamond_model, 2)
