from __future__ import annotations

from typing import Any, List, Mapping

import pandas as pd

CSV_FLOAT_FORMAT = "%.17g"


def encode_table(frame: pd.DataFrame) -> bytes:
    """Canonical CSV bytes of a report table; floats keep every significant digit."""
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n").encode()


class ReportWriter:
    """Destination of an analysis report: named tables, text artifacts and a stage log."""

    def write_table(self, name: str, frame: pd.DataFrame) -> None:
        raise NotImplementedError

    def write_text(self, name: str, text: str) -> None:
        raise NotImplementedError

    def log_stage(self, record: Mapping[str, Any]) -> None:
        raise NotImplementedError


class ReportReader:
    """Read side of a finished report, used to re-render plots from its tables."""

    def list_tables(self) -> List[str]:
        raise NotImplementedError

    def read_table(self, name: str) -> pd.DataFrame:
        raise NotImplementedError
