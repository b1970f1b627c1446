from dyad_influence.infrastructure.fixtures.file import JsonFixtureRepository
from dyad_influence.infrastructure.fixtures.in_memory import InMemoryFixtureRepository, InMemoryFixtureWorkspace

__all__ = ["JsonFixtureRepository", "InMemoryFixtureRepository", "InMemoryFixtureWorkspace"]
