"""Task performance indices and force summaries."""

from __future__ import annotations

import logging
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dyad_influence.domain.errors import NoDataError
from dyad_influence.domain.forces import ForcePair
from dyad_influence.domain.preprocessing import default_prominence, detect_extrema, extrema_periods, merge_histograms
from dyad_influence.domain.signals import Channel, PeriodHistogram
from dyad_influence.domain.trials import TrialRecord

logger = logging.getLogger(__name__)

REVERSAL_PROMINENCE_FRACTION = 0.1
EXCLUSION_SD_FACTOR = 2.0
MIN_DYADS_FOR_EXCLUSION = 3


class Reversal(NamedTuple):
    time: float
    position: float


class PerformanceSummary(BaseModel):
    """Errors of one dyad: PE in % of the normalizer, SE in % of the metronome period."""

    model_config = ConfigDict(frozen=True)

    dyad_id: str
    condition: str
    PE_mean: float
    PE_sd: float = Field(ge=0)
    SE_mean: float
    SE_sd: float = Field(ge=0)
    excluded: bool = False


class DyadErrors(BaseModel):
    """Raw per-reversal and per-period errors (both in %) pooled over a dyad's trials."""

    model_config = ConfigDict(frozen=True)

    dyad_id: str
    condition: str = "all"
    position_errors: Tuple[float, ...]
    synchronization_errors: Tuple[float, ...]

    def summary(self, excluded: bool = False) -> PerformanceSummary:
        pe_mean, pe_sd = _mean_sd(np.asarray(self.position_errors))
        se_mean, se_sd = _mean_sd(np.asarray(self.synchronization_errors))
        return PerformanceSummary(
            dyad_id=self.dyad_id,
            condition=self.condition,
            PE_mean=pe_mean,
            PE_sd=pe_sd,
            SE_mean=se_mean,
            SE_sd=se_sd,
            excluded=excluded,
        )


class ExclusionResult(NamedTuple):
    retained: List[DyadErrors]
    excluded: List[DyadErrors]
    log: List[str]


class ForceSummary(NamedTuple):
    mean_abs_F1: float
    mean_abs_F2: float
    histogram_F1: PeriodHistogram
    histogram_F2: PeriodHistogram


def _mean_sd(values: np.ndarray) -> Tuple[float, float]:
    if values.size == 0:
        raise NoDataError("no error samples")
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), sd


def reversal_points(position: Channel, prominence: Optional[float] = None) -> List[Reversal]:
    """Turning points of the movement; ``prominence`` defaults to 10% of the position range."""
    if prominence is None:
        prominence = default_prominence(position, REVERSAL_PROMINENCE_FRACTION)
    extrema = detect_extrema(position.samples, prominence)
    times = position.times()
    return [Reversal(float(times[i]), float(position.samples[i])) for i in extrema.indices]


def position_errors(reversals: Sequence[Reversal], target_centers: Tuple[float, float], normalizer: float) -> np.ndarray:
    if not reversals:
        raise NoDataError("no reversal points to score")
    centers = np.asarray(target_centers, dtype=float)
    positions = np.array([r.position for r in reversals])
    distance = np.abs(positions[:, None] - centers[None, :]).min(axis=1)
    return 100.0 * distance / normalizer


def position_error(
    reversals: Sequence[Reversal], target_centers: Tuple[float, float], normalizer: float
) -> Tuple[float, float]:
    return _mean_sd(position_errors(reversals, target_centers, normalizer))


def synchronization_errors(
    reversal_times: Sequence[float], metronome_period: float, first_beat: Optional[float] = None
) -> np.ndarray:
    times = np.asarray(reversal_times, dtype=float)
    if first_beat is not None:
        times = times[times >= first_beat]
    if times.size < 2:
        raise NoDataError(f"synchronization error needs 2 reversals, got {times.size}")
    return 100.0 * (np.diff(times) - metronome_period) / metronome_period


def synchronization_error(
    reversal_times: Sequence[float], metronome_period: float, first_beat: Optional[float] = None
) -> Tuple[float, float]:
    """Successive movement periods against the metronome period; reversals before ``first_beat`` are ignored."""
    return _mean_sd(synchronization_errors(reversal_times, metronome_period, first_beat))


def trial_errors(trial: TrialRecord, normalizer: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """PE and SE samples of one trial; ``normalizer`` defaults to the inter-target distance."""
    reversals = reversal_points(trial.position)
    scale = trial.condition.target_distance if normalizer is None else normalizer
    pe = position_errors(reversals, trial.condition.centers, scale)
    first_beat = float(trial.beats[0]) if trial.beats.size else None
    se = synchronization_errors([r.time for r in reversals], trial.condition.metronome_period, first_beat)
    return pe, se


def dyad_errors(
    trials: Sequence[TrialRecord], condition: str = "all", use_target_width: bool = False
) -> DyadErrors:
    """Errors pooled over trials; PE is normalised by the target width instead of the distance on request."""
    if not trials:
        raise NoDataError("no trials for dyad")
    pe: List[np.ndarray] = []
    se: List[np.ndarray] = []
    for trial in trials:
        normalizer = trial.condition.target_width if use_target_width else None
        trial_pe, trial_se = trial_errors(trial, normalizer)
        pe.append(trial_pe)
        se.append(trial_se)
    return DyadErrors(
        dyad_id=trials[0].dyad_id,
        condition=condition,
        position_errors=tuple(np.concatenate(pe).tolist()),
        synchronization_errors=tuple(np.concatenate(se).tolist()),
    )


def _exclusion_round(dyads: Sequence[DyadErrors]) -> Dict[str, str]:
    reasons: Dict[str, str] = {}
    for attribute, name in (("position_errors", "PE"), ("synchronization_errors", "SE")):
        pooled = np.concatenate([np.asarray(getattr(d, attribute)) for d in dyads])
        limit = EXCLUSION_SD_FACTOR * float(np.std(pooled, ddof=1))
        for dyad in dyads:
            _, sd = _mean_sd(np.asarray(getattr(dyad, attribute)))
            if sd >= limit and dyad.dyad_id not in reasons:
                reasons[dyad.dyad_id] = f"{name} sd {sd:.3f} >= {EXCLUSION_SD_FACTOR:g} x sample sd ({limit:.3f})"
    return reasons


def exclusion_filter(dyads: Sequence[DyadErrors]) -> ExclusionResult:
    """Drop dyads whose error sd reaches twice the sd of all pooled errors.

    The rule is re-applied to the survivors until nothing changes, so filtering the
    retained set again excludes no one.
    """
    if len(dyads) < MIN_DYADS_FOR_EXCLUSION:
        logger.warning("Exclusion rule skipped: %d dyads (needs %d)", len(dyads), MIN_DYADS_FOR_EXCLUSION)
        return ExclusionResult(list(dyads), [], [])
    retained = list(dyads)
    excluded: List[DyadErrors] = []
    log: List[str] = []
    while len(retained) >= MIN_DYADS_FOR_EXCLUSION:
        reasons = _exclusion_round(retained)
        if not reasons:
            break
        for dyad in retained:
            if dyad.dyad_id in reasons:
                message = f"dyad {dyad.dyad_id} excluded: {reasons[dyad.dyad_id]}"
                logger.info(message)
                log.append(message)
                excluded.append(dyad)
        retained = [dyad for dyad in retained if dyad.dyad_id not in reasons]
    return ExclusionResult(retained, excluded, log)


def force_summaries(forces: Sequence[ForcePair], min_prominence: Optional[float] = None) -> ForceSummary:
    """Mean |F| per participant over all trials plus merged extrema-frequency histograms."""
    if not forces:
        raise NoDataError("no force recordings")
    f1 = np.concatenate([pair.F1.samples for pair in forces])
    f2 = np.concatenate([pair.F2.samples for pair in forces])
    return ForceSummary(
        mean_abs_F1=float(np.mean(np.abs(f1))),
        mean_abs_F2=float(np.mean(np.abs(f2))),
        histogram_F1=merge_histograms([extrema_periods(pair.F1, min_prominence) for pair in forces]),
        histogram_F2=merge_histograms([extrema_periods(pair.F2, min_prominence) for pair in forces]),
    )
