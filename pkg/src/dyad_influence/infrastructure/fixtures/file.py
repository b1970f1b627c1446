from __future__ import annotations

import json
from pathlib import Path
from typing import List

from pydantic import ValidationError

from dyad_influence.domain.errors import ConfigError, FixtureNotFoundError
from dyad_influence.domain.fixtures import Fixture
from dyad_influence.ports.fixtures import FixtureRepository


class JsonFixtureRepository(FixtureRepository):
    """One ``<fixture_id>.json`` manifest per fixture in a directory."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _path(self, fixture_id: str) -> Path:
        return self.root / f"{fixture_id}.json"

    def get(self, fixture_id: str) -> Fixture:
        path = self._path(fixture_id)
        if not path.exists():
            raise FixtureNotFoundError(f"fixture '{fixture_id}' not found in {self.root}")
        try:
            return Fixture.model_validate_json(path.read_text())
        except ValidationError as exc:
            raise ConfigError(f"invalid fixture manifest {path}: {exc}") from exc

    def save(self, fixture: Fixture) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        payload = fixture.model_dump(mode="json", exclude_defaults=False)
        self._path(fixture.id).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def list_ids(self) -> List[str]:
        if not self.root.exists():
            return []
        return sorted(path.stem for path in self.root.glob("*.json"))
