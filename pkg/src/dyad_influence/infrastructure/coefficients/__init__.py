from dyad_influence.infrastructure.coefficients.file import CsvSegmentTableSource
from dyad_influence.infrastructure.coefficients.in_memory import InMemorySegmentTableSource

__all__ = ["CsvSegmentTableSource", "InMemorySegmentTableSource"]
