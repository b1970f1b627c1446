from __future__ import annotations

from typing import Protocol

from dyad_influence.domain.forces import SegmentTable


class SegmentTableSource(Protocol):
    """Provides the body-segment mass fractions used to derive hand + forearm masses."""

    def load(self) -> SegmentTable:
        ...
