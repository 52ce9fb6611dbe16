from __future__ import annotations

import csv
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from app.domain.errors import ParseError
from app.domain.graph import LayerDag
from app.infra import get_logger
from app.services.distortion import TabulatedModel


class TabulatedCsvSource:
    """Tabulated R-D grid stored as CSV.

    Columns are b_0..b_{N-1} then g_0..g_{N-1}, one row per allocation.
    """

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)
        self.logger = get_logger(__name__)

    @staticmethod
    def columns(node_count: int) -> List[str]:
        return [f"b_{i}" for i in range(node_count)] + [f"g_{i}" for i in range(node_count)]

    def read(self, node_count: int) -> Tuple[np.ndarray, np.ndarray]:
        expected = self.columns(node_count)
        try:
            handle = self.path.open(newline="", encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"{self.path}: cannot read table ({exc.strerror or exc})") from exc
        with handle:
            reader = csv.DictReader(handle)
            header = reader.fieldnames or []
            missing = [name for name in expected if name not in header]
            if missing:
                raise ParseError(f"{self.path}:1: missing columns {missing}")
            rows: List[List[float]] = []
            for row in reader:
                try:
                    rows.append([float(row[name]) for name in expected])
                except (TypeError, ValueError) as exc:
                    raise ParseError(
                        f"{self.path}:{reader.line_num}: non-numeric entry ({exc})"
                    ) from exc
        if not rows:
            raise ParseError(f"{self.path}: table has no rows")
        data = np.array(rows, dtype=float)
        self.logger.debug("Read %d table rows from %s", data.shape[0], self.path)
        return data[:, :node_count], data[:, node_count:]

    def load_model(self, dag: LayerDag, step: Optional[float] = None) -> TabulatedModel:
        allocations, distortions = self.read(dag.node_count)
        return TabulatedModel(dag, allocations, distortions, step)


def write_table(path: Union[str, Path], allocations: np.ndarray, distortions: np.ndarray) -> Path:
    """Write a table in the layout TabulatedCsvSource reads."""
    path = Path(path)
    n = allocations.shape[1]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TabulatedCsvSource.columns(n))
        for bits, values in zip(allocations, distortions):
            writer.writerow([repr(float(v)) for v in (*bits, *values)])
    return path


__all__ = ["TabulatedCsvSource", "write_table"]
