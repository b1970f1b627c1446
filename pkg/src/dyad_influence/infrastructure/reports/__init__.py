from dyad_influence.infrastructure.reports.file import DirectoryReport
from dyad_influence.infrastructure.reports.in_memory import InMemoryReport

__all__ = ["DirectoryReport", "InMemoryReport"]
