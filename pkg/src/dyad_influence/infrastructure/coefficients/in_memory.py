from __future__ import annotations

from dyad_influence.domain.forces import SegmentTable
from dyad_influence.ports.coefficients import SegmentTableSource


class InMemorySegmentTableSource(SegmentTableSource):
    def __init__(self, table: SegmentTable) -> None:
        self._table = table

    def load(self) -> SegmentTable:
        return self._table
