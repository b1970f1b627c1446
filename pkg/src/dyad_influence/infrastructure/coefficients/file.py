from __future__ import annotations

import logging
from importlib import resources
from pathlib import Path
from typing import Optional

import pandas as pd
from pydantic import ValidationError

from dyad_influence.domain.errors import ConfigError
from dyad_influence.domain.forces import SegmentCoefficient, SegmentTable
from dyad_influence.ports.coefficients import SegmentTableSource

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("segment", "sex", "mass_fraction")


class CsvSegmentTableSource(SegmentTableSource):
    """Segment mass fractions from a CSV table (columns segment, sex, mass_fraction).

    Without a path the table bundled with the package is used.
    """

    def __init__(self, path: Optional[str | Path] = None) -> None:
        self.path = Path(path) if path is not None else None

    def _read(self) -> pd.DataFrame:
        if self.path is None:
            with resources.files("dyad_influence.data").joinpath("segment_coefficients.csv").open("r") as handle:
                return pd.read_csv(handle)
        if not self.path.exists():
            raise ConfigError(f"segment coefficient table {self.path} does not exist")
        return pd.read_csv(self.path)

    def load(self) -> SegmentTable:
        frame = self._read()
        missing = [column for column in REQUIRED_COLUMNS if column not in frame.columns]
        if missing:
            raise ConfigError(f"segment coefficient table lacks columns: {', '.join(missing)}")
        try:
            rows = [SegmentCoefficient(**record) for record in frame[list(REQUIRED_COLUMNS)].to_dict("records")]
        except ValidationError as exc:
            raise ConfigError(f"invalid segment coefficient row: {exc}") from exc
        logger.debug("Loaded %d segment coefficients from %s", len(rows), self.path or "package data")
        return SegmentTable(rows=rows)
