"""Pinned end-to-end scenarios: how to generate the input, what the report must show."""

from __future__ import annotations

import operator
from typing import Callable, Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from dyad_influence.domain.simulation import SimConfig

OPERATORS: Dict[str, Callable[[float, float], bool]] = {
    ">": operator.gt,
    ">=": operator.ge,
    "<": operator.lt,
    "<=": operator.le,
}


class Expectation(BaseModel):
    """A qualitative claim about one report table column, optionally restricted to matching rows."""

    table: str
    column: str
    where: Dict[str, str] = Field(default_factory=dict)
    aggregate: Literal["all", "any", "mean", "min", "max"] = "all"
    op: Literal[">", ">=", "<", "<="]
    value: float

    def describe(self) -> str:
        scope = ",".join(f"{k}={v}" for k, v in sorted(self.where.items()))
        return f"{self.aggregate}({self.table}.{self.column}{'[' + scope + ']' if scope else ''}) {self.op} {self.value:g}"

    def evaluate(self, frame: pd.DataFrame) -> "CheckOutcome":
        rows = frame
        for key, wanted in self.where.items():
            rows = rows[rows[key].astype(str) == wanted]
        if rows.empty or self.column not in rows:
            return CheckOutcome(description=self.describe(), passed=False, observed=None, detail="no matching rows")
        values = rows[self.column].astype(float).to_numpy()
        compare = OPERATORS[self.op]
        if self.aggregate == "all":
            passed = bool(all(compare(v, self.value) for v in values))
            observed = float(values.min() if self.op in (">", ">=") else values.max())
        elif self.aggregate == "any":
            passed = bool(any(compare(v, self.value) for v in values))
            observed = float(values.max() if self.op in (">", ">=") else values.min())
        else:
            observed = float(getattr(np, self.aggregate)(values))
            passed = bool(compare(observed, self.value))
        return CheckOutcome(description=self.describe(), passed=passed, observed=observed)


class CheckOutcome(BaseModel):
    description: str
    passed: bool
    observed: Optional[float] = None
    detail: str = ""


class Fixture(BaseModel):
    """Seeded simulated session plus the pipeline config and the expected outcome."""

    id: str
    description: str = ""
    simulation: SimConfig = Field(default_factory=SimConfig)
    n_dyads: int = Field(default=6, ge=1)
    trials_per_dyad: int = Field(default=9, ge=1)
    swap_roles: bool = False
    pipeline: Dict[str, object] = Field(default_factory=dict)
    expectations: List[Expectation] = Field(default_factory=list)
    digests: Dict[str, str] = Field(default_factory=dict, description="sha256 of each report CSV, by file name")


class FixtureReport(BaseModel):
    fixture_id: str
    checks: List[CheckOutcome] = Field(default_factory=list)
    file_diffs: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks) and not self.file_diffs

    def lines(self) -> List[str]:
        out = [f"fixture {self.fixture_id}: {'PASS' if self.passed else 'FAIL'}"]
        for check in self.checks:
            observed = "n/a" if check.observed is None else f"{check.observed:.6g}"
            out.append(f"  [{'ok' if check.passed else 'FAIL'}] {check.description} (observed {observed}) {check.detail}".rstrip())
        out.extend(f"  [FAIL] {diff}" for diff in self.file_diffs)
        return out
