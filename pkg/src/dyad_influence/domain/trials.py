from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dyad_influence.domain.causality import Direction
from dyad_influence.domain.forces import ForcePair, MassConfig, reconstruct_forces
from dyad_influence.domain.signals import ArrayModel, Channel, FloatArray

EXPECTED_BEATS = 20


class Condition(BaseModel):
    """Task condition of one trial; ``roles`` tags participant A then participant B."""

    model_config = ConfigDict(frozen=True)

    label: str = "default"
    target_distance: float = Field(gt=0)
    metronome_period: float = Field(gt=0)
    roles: Tuple[str, str] = ("A", "B")
    target_width: float = Field(default=0.03, gt=0)
    target_centers: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def validate_centers(self) -> "Condition":
        if self.target_centers is not None and self.target_centers[0] >= self.target_centers[1]:
            raise ValueError("target centers must be given left then right")
        return self

    @property
    def centers(self) -> Tuple[float, float]:
        if self.target_centers is not None:
            return self.target_centers
        half = self.target_distance / 2.0
        return (-half, half)

    def direction_from(self, role: Optional[str]) -> Optional[Direction]:
        """Direction whose source participant carries ``role``; None when neither or both do."""
        if role is None or self.roles[0] == self.roles[1]:
            return None
        if self.roles[0] == role:
            return Direction.A_TO_B
        if self.roles[1] == role:
            return Direction.B_TO_A
        return None


class TrialRecord(ArrayModel):
    dyad_id: str
    trial_id: str
    position: Channel
    S1: Channel
    S2: Channel
    beats: FloatArray
    condition: Condition
    masses: MassConfig

    @model_validator(mode="after")
    def validate_alignment(self) -> "TrialRecord":
        for channel in (self.S1, self.S2):
            if len(channel) != len(self.position) or channel.fs != self.position.fs:
                raise ValueError(f"trial {self.trial_id}: channels must share length and sampling rate")
        if self.beats.ndim != 1:
            raise ValueError("beats must be a list of event times")
        if self.beats.size > 1 and np.any(np.diff(self.beats) <= 0):
            raise ValueError(f"trial {self.trial_id}: beat times must be strictly increasing")
        return self

    @property
    def fs(self) -> float:
        return self.position.fs

    @property
    def has_expected_beats(self) -> bool:
        return self.beats.size == EXPECTED_BEATS

    def forces(self) -> ForcePair:
        return reconstruct_forces(self.S1, self.S2, self.masses)
