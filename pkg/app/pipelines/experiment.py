from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from app.adapters.fixtures import load_fixture
from app.adapters.table_source import TabulatedCsvSource
from app.domain.experiment import ExperimentConfig, parse_config
from app.domain.graph import LayerDag
from app.domain.schemas import ConditionReport, CoverageReport, ScalarizationResult, WeightVector
from app.domain.taxonomy import ModelKind
from app.infra import get_logger, get_settings
from app.infra.telemetry import timed_span
from app.services.conditions import compare_S0_vs_weak_pareto, run_checks
from app.services.distortion import (
    DistortionModel,
    LayeredExponentialModel,
    RdEnvelope,
    rd_envelope,
)
from app.services.pareto import ParetoFront, PointCloud, enumerate_grid, filter_front
from app.services.scalarize import S0Set, scalarize_continuous, scalarize_discrete, sweep_S0


def build_model(config: ExperimentConfig, dag: LayerDag) -> DistortionModel:
    spec = config.model
    if spec.kind is ModelKind.TABULATED:
        return TabulatedCsvSource(spec.table).load_model(dag, spec.table_step)
    return LayeredExponentialModel.from_parameters(dag, spec.bases, spec.gains)


class ExperimentPipeline:
    """One config's DAG, model and memoised cloud, front, sweeps and checks."""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.logger = get_logger(__name__)
        self.dag = config.build_dag()
        self.model = build_model(config, self.dag)
        self._cloud: Optional[PointCloud] = None
        self._front: Optional[ParetoFront] = None
        self._envelopes: Optional[List[RdEnvelope]] = None
        self._sweeps: Dict[int, S0Set] = {}
        self._checks: Optional[List[ConditionReport]] = None

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> "ExperimentPipeline":
        return cls(parse_config(path))

    @classmethod
    def from_fixture(cls, name: str) -> "ExperimentPipeline":
        return cls(load_fixture(name))

    def cloud(self) -> PointCloud:
        if self._cloud is None:
            with timed_span("enumerate", step=self.config.grid_step) as span:
                self._cloud = enumerate_grid(
                    self.model, self.dag, self.config.budget, self.config.grid_step
                )
                span.details["points"] = len(self._cloud)
        return self._cloud

    def front(self) -> ParetoFront:
        if self._front is None:
            cloud = self.cloud()
            with timed_span("filter_front", points=len(cloud)) as span:
                self._front = filter_front(cloud, eps=self.config.tolerances.pareto_eps)
                span.details["weak"] = int(self._front.weak_mask.sum())
            self.logger.info("Front of %s: %s", self.config.name, self._front.counts())
        return self._front

    def envelopes(self) -> List[RdEnvelope]:
        if self._envelopes is None:
            self._envelopes = [
                rd_envelope(self.model, self.dag, i, self.config.budget, self.config.grid_step)
                for i in range(self.dag.node_count)
            ]
        return self._envelopes

    def sweep(self, resolution: Optional[int] = None) -> S0Set:
        resolution = resolution or self.config.weight_resolution
        if resolution not in self._sweeps:
            front = self.front()
            with timed_span("sweep", resolution=resolution) as span:
                s0 = sweep_S0(front, resolution, tie_tol=self.config.tolerances.tie)
                span.details["distinct"] = len(s0.distinct_distortions)
            self._sweeps[resolution] = s0
        return self._sweeps[resolution]

    def continuous_sweep(self, resolution: Optional[int] = None) -> S0Set:
        resolution = resolution or self.config.weight_resolution
        with timed_span("continuous_sweep", resolution=resolution):
            return sweep_S0(self.model, resolution, dag=self.dag, budget=self.config.budget)

    def scalarize(
        self, weights: Union[WeightVector, Sequence[float]], continuous: bool = False
    ) -> ScalarizationResult:
        if continuous:
            return scalarize_continuous(weights, self.model, self.dag, self.config.budget)
        return scalarize_discrete(weights, self.cloud(), tie_tol=self.config.tolerances.tie)

    def checks(self) -> List[ConditionReport]:
        if self._checks is None:
            tolerances = self.config.tolerances
            with timed_span("checks"):
                self._checks = run_checks(
                    self.front(),
                    self.envelopes(),
                    self.dag,
                    envelope_tol=tolerances.envelope,
                    gap_threshold=self.config.gap_threshold,
                    support_tol=tolerances.support,
                    lemma_tol=tolerances.lemma,
                    require_saturation=isinstance(self.model, LayeredExponentialModel),
                )
        return self._checks

    def coverage(self, resolution: Optional[int] = None) -> CoverageReport:
        return compare_S0_vs_weak_pareto(
            self.sweep(resolution), self.front(), self.config.match_tolerance
        )

    def summary(self) -> Dict[str, Any]:
        """Config summary plus the process limits the run was made under."""
        settings = get_settings()
        return {
            **self.config.summary(),
            "environment": settings.environment,
            "limits": {**settings.cap_payload(), **settings.solver_limits},
        }


__all__ = ["ExperimentPipeline", "build_model"]
