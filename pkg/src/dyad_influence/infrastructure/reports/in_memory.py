from __future__ import annotations

from typing import Any, Dict, List, Mapping

import pandas as pd

from dyad_influence.ports.reports import ReportReader, ReportWriter


class InMemoryReport(ReportWriter, ReportReader):
    def __init__(self) -> None:
        self.tables: Dict[str, pd.DataFrame] = {}
        self.texts: Dict[str, str] = {}
        self.stages: List[Dict[str, Any]] = []

    def write_table(self, name: str, frame: pd.DataFrame) -> None:
        self.tables[name] = frame.copy()

    def write_text(self, name: str, text: str) -> None:
        self.texts[name] = text

    def log_stage(self, record: Mapping[str, Any]) -> None:
        self.stages.append(dict(record))

    def list_tables(self) -> List[str]:
        return sorted(self.tables)

    def read_table(self, name: str) -> pd.DataFrame:
        if name not in self.tables:
            raise FileNotFoundError(f"report table {name} does not exist")
        return self.tables[name].copy()
