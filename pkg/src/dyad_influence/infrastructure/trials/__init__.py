from dyad_influence.infrastructure.trials.file import CsvTrialRepository
from dyad_influence.infrastructure.trials.in_memory import InMemoryTrialRepository

__all__ = ["CsvTrialRepository", "InMemoryTrialRepository"]
