"""Shared DAGs, models and clouds."""

from __future__ import annotations

import numpy as np
import pytest

from app.domain.graph import LayerDag, build_dag
from app.services.distortion import LayeredExponentialModel
from app.services.pareto import PointCloud, enumerate_grid


@pytest.fixture
def diamond_dag() -> LayerDag:
    return build_dag(3, [(0, 1), (0, 2)])


@pytest.fixture
def diamond_model(diamond_dag: LayerDag) -> LayeredExponentialModel:
    return LayeredExponentialModel.from_parameters(
        diamond_dag,
        bases=[1.0, 1.0, 1.0],
        gains=[{0: 1.0}, {0: 1.0, 1: 2.0}, {0: 1.0, 2: 2.0}],
    )


@pytest.fixture
def diamond_cloud(diamond_model: LayeredExponentialModel, diamond_dag: LayerDag) -> PointCloud:
    return enumerate_grid(diamond_model, diamond_dag, 1.0, 0.1)


@pytest.fixture
def chain_dag() -> LayerDag:
    return build_dag(3, [(0, 1), (1, 2)])


@pytest.fixture
def nonconvex_cloud() -> PointCloud:
    return PointCloud(
        allocations=np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]]),
        distortions=np.array([[1.0, 5.0], [3.5, 3.5], [5.0, 1.0]]),
        budget=1.0,
        step=0.5,
    )
