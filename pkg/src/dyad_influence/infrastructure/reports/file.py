from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, List, Mapping

import pandas as pd

from dyad_influence.ports.reports import ReportReader, ReportWriter, encode_table

logger = logging.getLogger(__name__)

RUN_LOG_NAME = "run_log.jsonl"


class DirectoryReport(ReportWriter, ReportReader):
    """Report laid out as a directory: ``<name>.csv`` tables, text artifacts and ``run_log.jsonl``."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _path(self, name: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_table(self, name: str, frame: pd.DataFrame) -> None:
        self._path(f"{name}.csv").write_bytes(encode_table(frame))

    def write_text(self, name: str, text: str) -> None:
        self._path(name).write_text(text)

    def log_stage(self, record: Mapping[str, Any]) -> None:
        with open(self._path(RUN_LOG_NAME), "a") as handle:
            handle.write(json.dumps(dict(record), sort_keys=True) + "\n")

    def reset_run_log(self) -> None:
        path = self.root / RUN_LOG_NAME
        if path.exists():
            path.unlink()

    def list_tables(self) -> List[str]:
        if not self.root.exists():
            return []
        return sorted(path.relative_to(self.root).with_suffix("").as_posix() for path in self.root.rglob("*.csv"))

    def read_table(self, name: str) -> pd.DataFrame:
        path = self.root / f"{name}.csv"
        if not path.exists():
            raise FileNotFoundError(f"report table {path} does not exist")
        return pd.read_csv(path, float_precision="round_trip")
