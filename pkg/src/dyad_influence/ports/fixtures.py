from __future__ import annotations

from typing import List

from dyad_influence.domain.fixtures import Fixture


class FixtureRepository:
    """Versioned fixture manifests."""

    def get(self, fixture_id: str) -> Fixture:
        raise NotImplementedError

    def save(self, fixture: Fixture) -> None:
        raise NotImplementedError

    def list_ids(self) -> List[str]:
        raise NotImplementedError
