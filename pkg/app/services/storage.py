from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

from app.infra import get_logger


class ArtifactStore:
    """Result files under one directory, each written to a temp file and renamed into place."""

    def __init__(self, directory: Union[str, Path]) -> None:
        self.directory = Path(directory)
        self.written: List[Path] = []
        self.logger = get_logger(__name__)

    def write_text(self, name: str, text: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        target = self.directory / name
        fd, temp_name = tempfile.mkstemp(dir=self.directory, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(temp_name, target)
        except BaseException:
            Path(temp_name).unlink(missing_ok=True)
            raise
        self.written.append(target)
        self.logger.debug("Wrote %s (%d bytes)", target, len(text))
        return target

    def write_json(self, name: str, payload: Any) -> Path:
        return self.write_text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def write_rows(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return self.write_text(name, buffer.getvalue())


__all__ = ["ArtifactStore"]
