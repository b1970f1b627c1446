from .application.services import DyadAnalysisService, FixtureService, SimulationService
from .domain.causality import GgcEstimator
from .infrastructure.fixtures.file import JsonFixtureRepository
from .infrastructure.reports.file import DirectoryReport
from .infrastructure.reports.in_memory import InMemoryReport
from .infrastructure.trials.file import CsvTrialRepository
from .infrastructure.trials.in_memory import InMemoryTrialRepository

__all__ = [
    "DyadAnalysisService",
    "FixtureService",
    "SimulationService",
    "GgcEstimator",
    "JsonFixtureRepository",
    "DirectoryReport",
    "InMemoryReport",
    "CsvTrialRepository",
    "InMemoryTrialRepository",
]
