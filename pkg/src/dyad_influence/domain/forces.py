"""Three-mass free-body model of the shared slider.

Rightward is positive for position, acceleration and both applied forces.
Friction is neglected.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Dict, Mapping, NamedTuple, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from dyad_influence.domain.errors import ChannelMismatchError, ConfigError, InvalidMassError
from dyad_influence.domain.signals import ArrayModel, Channel

logger = logging.getLogger(__name__)

REQUIRED_SEGMENTS = ("hand", "forearm")


class MassConfig(BaseModel):
    """Slider mass M and the hand+forearm masses of participant 1 and 2 (kg)."""

    model_config = ConfigDict(frozen=True)

    M: float
    m1: float
    m2: float

    @model_validator(mode="after")
    def validate_positive(self) -> "MassConfig":
        for name in ("M", "m1", "m2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"mass {name} must be positive")
        return self

    @property
    def total(self) -> float:
        return self.M + self.m1 + self.m2


class ForcePair(ArrayModel):
    F1: Channel
    F2: Channel
    a: Channel

    @model_validator(mode="after")
    def validate_alignment(self) -> "ForcePair":
        if not (len(self.F1) == len(self.F2) == len(self.a)):
            raise ValueError("force pair channels must share length")
        if not (self.F1.fs == self.F2.fs == self.a.fs):
            raise ValueError("force pair channels must share sampling rate")
        return self


class SensorTriple(NamedTuple):
    S1: Channel
    S2: Channel
    a: Channel


class ForceFrame(str, Enum):
    GLOBAL = "global"
    MOVEMENT = "movement"


def _check_masses(masses: MassConfig) -> None:
    # model_construct() skips the validator
    if masses.M <= 0 or masses.m1 <= 0 or masses.m2 <= 0:
        raise InvalidMassError(f"masses must be positive, got {masses}")


def _check_pair(first: Channel, second: Channel) -> None:
    if len(first) != len(second) or first.fs != second.fs:
        raise ChannelMismatchError(
            f"channels '{first.label}' ({len(first)} @ {first.fs} Hz) and "
            f"'{second.label}' ({len(second)} @ {second.fs} Hz) are not aligned"
        )


def reconstruct_forces(S1: Channel, S2: Channel, masses: MassConfig) -> ForcePair:
    """Applied forces from the two load cells.

    a = (S2 - S1) / M, F2 = m2 a + S2, F1 = m1 a - S1.
    """
    _check_pair(S1, S2)
    _check_masses(masses)
    a = (S2.samples - S1.samples) / masses.M
    return ForcePair(
        F1=S1.derive(masses.m1 * a - S1.samples, label="F1"),
        F2=S2.derive(masses.m2 * a + S2.samples, label="F2"),
        a=S1.derive(a, label="a"),
    )


def invert_forces(F1: Channel, F2: Channel, masses: MassConfig) -> SensorTriple:
    """Sensor readings that ``reconstruct_forces`` maps back onto (F1, F2)."""
    _check_pair(F1, F2)
    _check_masses(masses)
    a = (F1.samples + F2.samples) / masses.total
    return SensorTriple(
        S1=F1.derive(masses.m1 * a - F1.samples, label="S1"),
        S2=F2.derive(F2.samples - masses.m2 * a, label="S2"),
        a=F1.derive(a, label="a"),
    )


def to_movement_frame(forces: ForcePair, position: Channel) -> ForcePair:
    """Re-express forces along the instantaneous movement direction.

    Samples where the slider moves leftward are sign-flipped; stationary samples keep the
    global sign.
    """
    _check_pair(forces.F1, position)
    direction = np.sign(np.gradient(position.samples))
    direction[direction == 0] = 1.0
    return ForcePair(
        F1=forces.F1.derive(forces.F1.samples * direction),
        F2=forces.F2.derive(forces.F2.samples * direction),
        a=forces.a.derive(forces.a.samples * direction),
    )


def segment_mass(body_mass: float, coefficients: Mapping[str, float]) -> float:
    """Hand + forearm mass from body mass and per-segment mass fractions."""
    if body_mass <= 0:
        raise InvalidMassError(f"body mass must be positive, got {body_mass}")
    total_fraction = 0.0
    for segment in REQUIRED_SEGMENTS:
        if segment not in coefficients:
            raise ConfigError(f"missing mass fraction for segment '{segment}'")
        fraction = float(coefficients[segment])
        if not 0.0 < fraction < 1.0:
            raise ConfigError(f"mass fraction for '{segment}' must lie in (0, 1), got {fraction}")
        total_fraction += fraction
    return body_mass * total_fraction


class SegmentCoefficient(BaseModel):
    segment: str
    sex: str
    mass_fraction: float


class SegmentTable(BaseModel):
    """Segment mass fractions keyed by sex, loaded from an editable table."""

    rows: Sequence[SegmentCoefficient]

    def fractions_for(self, sex: str) -> Dict[str, float]:
        key = sex.strip().lower()
        fractions = {row.segment: row.mass_fraction for row in self.rows if row.sex.lower() == key}
        if not fractions:
            raise ConfigError(f"no segment coefficients for sex '{sex}'")
        return fractions

    def segment_mass(self, body_mass: float, sex: str) -> float:
        return segment_mass(body_mass, self.fractions_for(sex))
