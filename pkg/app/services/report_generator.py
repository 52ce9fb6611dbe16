from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from app.domain.graph import LayerDag
from app.domain.schemas import ConditionReport, CoverageReport, ScalarizationResult
from app.domain.taxonomy import LABELS_BY_CODE, OutputFormat
from app.infra import get_logger
from app.services.pareto import ParetoFront, PointCloud
from app.services.scalarize import S0Set
from app.services.storage import ArtifactStore


def psnr(distortion: float, peak: float) -> float:
    """10 log10(peak^2 / d); display only."""
    if distortion <= 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / distortion)


def _number(value: float) -> str:
    return repr(float(value))


def _json_number(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


class ReportGenerator:
    """Write clouds, fronts, sweeps and check reports as CSV, JSON and plot data."""

    def __init__(
        self,
        store: ArtifactStore,
        formats: Sequence[OutputFormat] = (OutputFormat.CSV, OutputFormat.JSON),
        peak: Optional[float] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.store = store
        self.formats = set(formats)
        self.peak = peak
        self.metadata = dict(metadata or {})
        self.logger = get_logger(__name__)

    @property
    def paths(self) -> List[Path]:
        return list(self.store.written)

    def _wants(self, fmt: OutputFormat) -> bool:
        return fmt in self.formats

    def _distortion_header(self, n: int) -> List[str]:
        header = [f"g_{i}" for i in range(n)]
        if self.peak is not None:
            header += [f"psnr_{i}" for i in range(n)]
        return header

    def _distortion_cells(self, values: Iterable[float]) -> List[str]:
        values = [float(v) for v in values]
        cells = [_number(v) for v in values]
        if self.peak is not None:
            cells += [_number(psnr(v, self.peak)) for v in values]
        return cells

    def _distortion_record(self, values: Iterable[float]) -> Dict[str, Any]:
        values = [float(v) for v in values]
        record: Dict[str, Any] = {"distortion": values}
        if self.peak is not None:
            record["psnr"] = [_json_number(psnr(v, self.peak)) for v in values]
        return record

    def _envelope(self, kind: str, body: Dict[str, Any]) -> Dict[str, Any]:
        payload = {"kind": kind, "metadata": self.metadata}
        if self.peak is not None:
            payload["metadata"] = {**self.metadata, "psnr_peak": self.peak}
        payload.update(body)
        return payload

    def dag_report(self, dag: LayerDag) -> List[Path]:
        return [self.store.write_json("dag.json", self._envelope("dag", dag.describe()))]

    def cloud(self, cloud: PointCloud) -> List[Path]:
        n = cloud.dimension
        written: List[Path] = []
        if self._wants(OutputFormat.CSV):
            header = [f"b_{i}" for i in range(cloud.allocations.shape[1])]
            rows = (
                [_number(b) for b in bits] + self._distortion_cells(values)
                for bits, values in zip(cloud.allocations, cloud.distortions)
            )
            header += self._distortion_header(n)
            written.append(self.store.write_rows("cloud.csv", header, rows))
        if self._wants(OutputFormat.JSON):
            records = [
                {"alloc": [float(b) for b in bits], **self._distortion_record(values)}
                for bits, values in zip(cloud.allocations, cloud.distortions)
            ]
            body = {"budget": cloud.budget, "grid_step": cloud.step, "points": records}
            written.append(self.store.write_json("cloud.json", self._envelope("cloud", body)))
        return written

    def front(self, front: ParetoFront, extras: Optional[Dict[str, Any]] = None) -> List[Path]:
        cloud = front.cloud
        n = cloud.dimension
        labels = [LABELS_BY_CODE[int(code)].value for code in front.labels]
        written: List[Path] = []
        if self._wants(OutputFormat.CSV):
            header = [f"b_{i}" for i in range(cloud.allocations.shape[1])]
            header += self._distortion_header(n) + ["label"]
            rows = (
                [_number(b) for b in bits] + self._distortion_cells(values) + [label]
                for bits, values, label in zip(cloud.allocations, cloud.distortions, labels)
            )
            written.append(self.store.write_rows("front.csv", header, rows))
        if self._wants(OutputFormat.JSON):
            records = [
                {
                    "alloc": [float(b) for b in bits],
                    **self._distortion_record(values),
                    "label": label,
                }
                for bits, values, label in zip(cloud.allocations, cloud.distortions, labels)
            ]
            body = {
                "budget": front.budget,
                "grid_step": front.grid_step,
                "eps": front.eps,
                "counts": front.counts(),
                "points": records,
                **(extras or {}),
            }
            written.append(self.store.write_json("front.json", self._envelope("front", body)))
        if self._wants(OutputFormat.PLOTDATA):
            weak = front.distinct_weak_distortions()
            order = np.lexsort(weak.T[::-1])
            written.append(
                self.store.write_rows(
                    "plot_front.csv",
                    self._distortion_header(n),
                    (self._distortion_cells(row) for row in weak[order]),
                )
            )
        return written

    def scalarization(self, result: ScalarizationResult, name: str = "scalarize") -> List[Path]:
        n = len(result.weight)
        written: List[Path] = []
        if self._wants(OutputFormat.CSV):
            written.append(
                self.store.write_rows(
                    f"{name}.csv", self._sweep_header(n, result), self._sweep_rows([result])
                )
            )
        if self._wants(OutputFormat.JSON):
            written.append(
                self.store.write_json(
                    f"{name}.json", self._envelope("scalarization", self._result_record(result))
                )
            )
        return written

    def sweep(self, s0: S0Set, name: str = "sweep") -> List[Path]:
        if not s0.entries:
            return []
        first = s0.entries[0]
        n = len(first.weight)
        written: List[Path] = []
        if self._wants(OutputFormat.CSV):
            written.append(
                self.store.write_rows(
                    f"{name}.csv", self._sweep_header(n, first), self._sweep_rows(s0.entries)
                )
            )
        if self._wants(OutputFormat.JSON):
            body = {
                "weight_resolution": s0.resolution,
                "entries": [self._result_record(entry) for entry in s0.entries],
                "distinct_distortions": [list(d.values) for d in s0.distinct_distortions],
            }
            written.append(self.store.write_json(f"{name}.json", self._envelope("sweep", body)))
        if self._wants(OutputFormat.PLOTDATA):
            written.append(
                self.store.write_rows(
                    "plot_s0.csv",
                    self._distortion_header(n),
                    (self._distortion_cells(d.values) for d in s0.distinct_distortions),
                )
            )
        return written

    def _sweep_header(self, n: int, sample: ScalarizationResult) -> List[str]:
        bits = len(sample.minimizers[0].alloc.bits) if sample.minimizers else n
        return (
            [f"w_{i}" for i in range(n)]
            + ["objective"]
            + [f"b_{i}" for i in range(bits)]
            + self._distortion_header(n)
        )

    def _sweep_rows(self, results: Iterable[ScalarizationResult]) -> Iterable[List[str]]:
        for result in results:
            weights = [_number(w) for w in result.weight.weights]
            for minimizer in result.minimizers:
                yield (
                    weights
                    + [_number(result.objective)]
                    + [_number(b) for b in minimizer.alloc.bits]
                    + self._distortion_cells(minimizer.distortion.values)
                )

    def _result_record(self, result: ScalarizationResult) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "weight": list(result.weight.weights),
            "objective": result.objective,
            "minimizers": [
                {"alloc": list(m.alloc.bits), **self._distortion_record(m.distortion.values)}
                for m in result.minimizers
            ],
        }
        if result.residual is not None:
            record["residual"] = result.residual
            record["iterations"] = result.iterations
        return record

    def checks(self, reports: Sequence[ConditionReport]) -> List[Path]:
        body = {
            "passed": all(report.passed for report in reports),
            "reports": [report.model_dump(mode="json") for report in reports],
        }
        return [self.store.write_json("checks.json", self._envelope("checks", body))]

    def coverage(self, report: CoverageReport) -> List[Path]:
        body = report.model_dump(mode="json")
        body["full"] = report.full
        return [self.store.write_json("coverage.json", self._envelope("coverage", body))]


__all__ = ["ReportGenerator", "psnr"]
