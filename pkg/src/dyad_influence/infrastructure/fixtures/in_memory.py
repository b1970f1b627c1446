from __future__ import annotations

from typing import Dict, List

from dyad_influence.domain.errors import FixtureNotFoundError
from dyad_influence.domain.fixtures import Fixture
from dyad_influence.infrastructure.reports.in_memory import InMemoryReport
from dyad_influence.infrastructure.trials.in_memory import InMemoryTrialRepository
from dyad_influence.ports.fixtures import FixtureRepository


class InMemoryFixtureRepository(FixtureRepository):
    def __init__(self) -> None:
        self._storage: Dict[str, Fixture] = {}

    def get(self, fixture_id: str) -> Fixture:
        if fixture_id not in self._storage:
            raise FixtureNotFoundError(f"fixture '{fixture_id}' not found")
        return self._storage[fixture_id]

    def save(self, fixture: Fixture) -> None:
        self._storage[fixture.id] = fixture

    def list_ids(self) -> List[str]:
        return sorted(self._storage)


class InMemoryFixtureWorkspace:
    """Fresh in-memory session and report for every fixture run."""

    def new_session(self) -> InMemoryTrialRepository:
        return InMemoryTrialRepository()

    def new_report(self) -> InMemoryReport:
        return InMemoryReport()
