"""Synthetic dyadic trials with a known leader-to-follower coupling band."""

from __future__ import annotations

import logging
import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import cumulative_trapezoid
from scipy.signal import detrend

from dyad_influence.domain.causality import Direction
from dyad_influence.domain.errors import ConfigError, RankDeficientError
from dyad_influence.domain.forces import MassConfig, invert_forces
from dyad_influence.domain.preprocessing import butterworth_bandpass_causal
from dyad_influence.domain.signals import ArrayModel, Channel
from dyad_influence.domain.spectral import lag_matrix
from dyad_influence.domain.trials import EXPECTED_BEATS, Condition, TrialRecord

logger = logging.getLogger(__name__)


def _default_masses() -> MassConfig:
    return MassConfig(M=16.5, m1=1.5, m2=1.5)


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    movement_freq: float = Field(default=0.75, gt=0)
    movement_amp: Optional[float] = Field(default=None, ge=0)
    coupling_gain: float = Field(default=0.8, ge=0)
    coupling_band: Tuple[float, float] = (2.15, 7.0)
    coupling_delay: float = Field(default=0.08, ge=0)
    coupling_direction: Optional[Direction] = Direction.A_TO_B
    noise_sd: Tuple[float, float] = (1.0, 1.0)
    role_amp_ratio: float = Field(default=1.0, gt=0)
    phase_jitter_sd: float = Field(default=0.1, ge=0)
    phase_jitter_tau: float = Field(default=2.0, gt=0)
    masses: MassConfig = Field(default_factory=_default_masses)
    target_distance: float = Field(default=0.20, gt=0)
    roles: Tuple[str, str] = ("leader", "follower")
    lead_in: float = Field(default=1.0, ge=0)
    fs: float = Field(default=100.0, gt=0)
    duration: float = Field(default=15.0, gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def validate_ranges(self) -> "SimConfig":
        low, high = self.coupling_band
        if not 0 < low < high:
            raise ValueError(f"coupling band must satisfy 0 < low < high, got {self.coupling_band}")
        if self.fs < 2.0 * high:
            raise ValueError(f"fs = {self.fs} Hz cannot carry a coupling band up to {high} Hz")
        if min(self.noise_sd) < 0:
            raise ValueError("noise standard deviations must be non-negative")
        return self

    @property
    def metronome_period(self) -> float:
        return 0.5 / self.movement_freq

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.fs))

    def rhythm_amplitudes(self) -> Tuple[float, float]:
        """Force amplitude of A and B; by default the pair drives the slider across the targets."""
        if self.movement_amp is not None:
            total = self.movement_amp * (1.0 + self.role_amp_ratio)
        else:
            omega = 2.0 * math.pi * self.movement_freq
            total = self.masses.total * omega**2 * self.target_distance / 2.0
        share = total / (1.0 + self.role_amp_ratio)
        return share * self.role_amp_ratio, share

    def with_roles_swapped(self) -> "SimConfig":
        """Partners exchange roles: the labels, the coupling direction and the amplitude ratio."""
        direction = self.coupling_direction.reverse() if self.coupling_direction is not None else None
        return self.model_copy(
            update={
                "roles": self.roles[::-1],
                "coupling_direction": direction,
                "role_amp_ratio": 1.0 / self.role_amp_ratio,
            }
        )


class GroundTruth(BaseModel):
    model_config = ConfigDict(frozen=True)

    direction: Optional[Direction]
    band: Tuple[float, float]
    gain: float


class SimTrial(ArrayModel):
    record: TrialRecord
    ground_truth: GroundTruth
    seed: int


def _phase_jitter(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    n = config.n_samples
    decay = math.exp(-1.0 / (config.fs * config.phase_jitter_tau))
    innovation = config.phase_jitter_sd * math.sqrt(1.0 - decay**2)
    steps = rng.standard_normal(n)
    jitter = np.empty(n)
    jitter[0] = config.phase_jitter_sd * steps[0]
    for i in range(1, n):
        jitter[i] = decay * jitter[i - 1] + innovation * steps[i]
    return jitter


def _delayed(samples: np.ndarray, shift: int) -> np.ndarray:
    if shift == 0:
        return samples.copy()
    out = np.zeros_like(samples)
    out[shift:] = samples[:-shift]
    return out


def _position(acceleration: np.ndarray, fs: float) -> np.ndarray:
    dt = 1.0 / fs
    velocity = detrend(cumulative_trapezoid(acceleration, dx=dt, initial=0.0), type="linear")
    return detrend(cumulative_trapezoid(velocity, dx=dt, initial=0.0), type="linear")


def _beat_times(config: SimConfig) -> np.ndarray:
    period = config.metronome_period
    last = (config.n_samples - 1) / config.fs
    beats = [config.lead_in + k * period for k in range(EXPECTED_BEATS)]
    return np.array([round(t * config.fs) / config.fs for t in beats if t <= last])


def metronome_phase(config: SimConfig, times: np.ndarray) -> np.ndarray:
    """Rhythm phase whose position extrema fall on the metronome beats."""
    return 2.0 * math.pi * config.movement_freq * (times - config.lead_in) + 0.5 * math.pi


def simulate(config: SimConfig, trial_id: str = "sim", dyad_id: str = "sim") -> SimTrial:
    """One trial: metronome rhythm with each partner's own phase jitter, white noise, and the
    causally band-passed, delayed leader force added to the follower.

    Partners are coupled only through the coupling term, so with zero gain a dyad is
    statistically the same as two participants taken from different dyads.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_samples
    phase = metronome_phase(config, np.arange(n) / config.fs)
    jitter_a = _phase_jitter(config, rng)
    jitter_b = _phase_jitter(config, rng)
    amp_a, amp_b = config.rhythm_amplitudes()
    forces = [
        -amp_a * np.sin(phase + jitter_a) + config.noise_sd[0] * rng.standard_normal(n),
        -amp_b * np.sin(phase + jitter_b) + config.noise_sd[1] * rng.standard_normal(n),
    ]

    direction = config.coupling_direction if config.coupling_gain > 0 else None
    if direction is not None:
        leader, follower = (0, 1) if direction is Direction.A_TO_B else (1, 0)
        source = Channel(samples=_delayed(forces[leader], int(round(config.coupling_delay * config.fs))), fs=config.fs)
        try:
            drive = butterworth_bandpass_causal(source, *config.coupling_band)
        except ValueError as exc:
            raise ConfigError(f"cannot band-pass the coupling: {exc}") from exc
        forces[follower] = forces[follower] + config.coupling_gain * drive.samples

    F1 = Channel(samples=forces[0], fs=config.fs, label="F1")
    F2 = Channel(samples=forces[1], fs=config.fs, label="F2")
    sensors = invert_forces(F1, F2, config.masses)
    record = TrialRecord(
        dyad_id=dyad_id,
        trial_id=trial_id,
        position=Channel(samples=_position(sensors.a.samples, config.fs), fs=config.fs, label="pos"),
        S1=sensors.S1,
        S2=sensors.S2,
        beats=_beat_times(config),
        condition=Condition(
            label="simulated",
            target_distance=config.target_distance,
            metronome_period=config.metronome_period,
            roles=config.roles,
        ),
        masses=config.masses,
    )
    logger.debug("Simulated trial %s/%s with seed %d", dyad_id, trial_id, config.seed)
    return SimTrial(
        record=record,
        ground_truth=GroundTruth(direction=direction, band=config.coupling_band, gain=config.coupling_gain),
        seed=config.seed,
    )


def _residual_variance(target: np.ndarray, regressors: np.ndarray) -> float:
    coefficients, _, rank, _ = np.linalg.lstsq(regressors, target, rcond=None)
    if rank < regressors.shape[1]:
        raise RankDeficientError(f"regressors have rank {rank} < {regressors.shape[1]}")
    residuals = target - regressors @ coefficients
    return float(np.mean(residuals**2))


def time_domain_gc_oracle(x: np.ndarray, y: np.ndarray, p: int) -> Tuple[float, float]:
    """Time-domain Granger causality (x->y, y->x) from nested least-squares regressions of order ``p``."""
    series = np.column_stack([x, y]).astype(float)
    series = series - series.mean(axis=0)
    targets, regressors = lag_matrix(series, p)
    own_x = regressors[:, 0::2]
    own_y = regressors[:, 1::2]
    gc_xy = math.log(_residual_variance(targets[:, 1], own_y) / _residual_variance(targets[:, 1], regressors))
    gc_yx = math.log(_residual_variance(targets[:, 0], own_x) / _residual_variance(targets[:, 0], regressors))
    return gc_xy, gc_yx
