"""Permutation null distribution built from non-partner pairings."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import Field, model_validator

from dyad_influence.domain.causality import GgcSpectrum, total_influence
from dyad_influence.domain.errors import AnalysisError, GridMismatchError, InsufficientPoolError
from dyad_influence.domain.preprocessing import epoch_split_pair
from dyad_influence.domain.signals import ArrayModel, BivariateEpoch, Channel, FloatArray

logger = logging.getLogger(__name__)

DEFAULT_N_PERM = 506
THRESHOLD_PERCENTILE = 99.0


class SpectrumEstimator(Protocol):
    def estimate(self, epochs: Sequence[BivariateEpoch]) -> GgcSpectrum: ...


class Individual(ArrayModel):
    """One participant's preprocessed force series, one channel per trial in trial order."""

    dyad_id: str
    participant: str
    trials: Tuple[Channel, ...]

    @model_validator(mode="after")
    def validate_trials(self) -> "Individual":
        if not self.trials:
            raise ValueError(f"individual {self.key} has no trials")
        return self

    @property
    def key(self) -> Tuple[str, str]:
        return (self.dyad_id, self.participant)


class NullThreshold(ArrayModel):
    """Pointwise 99th percentile of the surrogate I_ab curves.

    ``pair_totals`` holds each surrogate pair's total influence (both directions over the whole grid)
    when the threshold was built from spectra.
    """

    freqs: FloatArray
    q99: FloatArray
    n_perm: int = Field(ge=1)
    seed: int
    pair_totals: FloatArray = Field(default_factory=lambda: np.zeros(0))

    @model_validator(mode="after")
    def validate_threshold(self) -> "NullThreshold":
        if self.q99.shape != self.freqs.shape:
            raise ValueError("threshold must hold one value per frequency bin")
        if np.any(self.q99 < 0):
            raise ValueError("threshold values must be non-negative")
        return self


class SurrogatePair(NamedTuple):
    first: Individual
    second: Individual


class SignificanceMask(NamedTuple):
    ab: np.ndarray
    ba: np.ndarray


def canonical_pool(pool: Sequence[Individual]) -> List[Individual]:
    ordered = sorted(pool, key=lambda individual: individual.key)
    keys = [individual.key for individual in ordered]
    if len(set(keys)) != len(keys):
        raise InsufficientPoolError("pool contains duplicate individuals")
    return ordered


def draw_pairs(pool: Sequence[Individual], n_perm: int, rng: np.random.Generator) -> List[SurrogatePair]:
    """Cross-dyad pairs drawn without replacement within each round; rounds repeat until ``n_perm`` pairs."""
    ordered = canonical_pool(pool)
    if len(ordered) < 2 or len({individual.dyad_id for individual in ordered}) < 2:
        raise InsufficientPoolError("the pool needs at least 2 individuals from at least 2 dyads")
    candidates = [
        (i, j) for i, j in itertools.combinations(range(len(ordered)), 2) if ordered[i].dyad_id != ordered[j].dyad_id
    ]
    pairs: List[SurrogatePair] = []
    while len(pairs) < n_perm:
        for index in rng.permutation(len(candidates)):
            i, j = candidates[index]
            if rng.random() < 0.5:
                i, j = j, i
            pairs.append(SurrogatePair(ordered[i], ordered[j]))
            if len(pairs) == n_perm:
                break
    return pairs


def pair_epochs(pair: SurrogatePair, epochs_per_trial: int) -> List[BivariateEpoch]:
    """Trial k of one individual against trial k of the other, cut to the shorter length."""
    epochs: List[BivariateEpoch] = []
    for index, (first, second) in enumerate(zip(pair.first.trials, pair.second.trials)):
        length = min(len(first), len(second))
        label = f"{pair.first.dyad_id}:{pair.first.participant}|{pair.second.dyad_id}:{pair.second.participant}|{index}"
        epochs.extend(
            epoch_split_pair(
                first.derive(first.samples[:length]),
                second.derive(second.samples[:length]),
                epochs_per_trial,
                parent_trial=label,
            )
        )
    return epochs


def null_distribution(
    pairs: Sequence[SurrogatePair],
    estimator: SpectrumEstimator,
    epochs_per_trial: int,
    workers: int = 1,
) -> List[GgcSpectrum]:
    """Spectrum of every pair that could be estimated, in pair order; channel 0 is the first individual."""

    def run(pair: SurrogatePair) -> Optional[GgcSpectrum]:
        try:
            return estimator.estimate(pair_epochs(pair, epochs_per_trial))
        except AnalysisError as exc:
            logger.warning("Surrogate pair %s / %s skipped: %s", pair.first.key, pair.second.key, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(run, pairs))
    else:
        spectra = [run(pair) for pair in pairs]
    return [spec for spec in spectra if spec is not None]


def permutation_null(
    pool: Sequence[Individual],
    estimator: SpectrumEstimator,
    n_perm: int = DEFAULT_N_PERM,
    seed: int = 0,
    epochs_per_trial: int = 3,
    workers: int = 1,
) -> NullThreshold:
    if n_perm < 1:
        raise InsufficientPoolError(f"n_perm must be >= 1, got {n_perm}")
    pairs = draw_pairs(pool, n_perm, np.random.default_rng(seed))
    spectra = null_distribution(pairs, estimator, epochs_per_trial, workers)
    if not spectra:
        raise InsufficientPoolError("every surrogate pair failed to produce a spectrum")
    if len(spectra) < n_perm:
        logger.warning("Null distribution built from %d of %d surrogate pairs", len(spectra), n_perm)
    q99 = np.percentile(np.vstack([spec.I_ab for spec in spectra]), THRESHOLD_PERCENTILE, axis=0, method="linear")
    totals = [total_influence(spec) for spec in spectra]
    logger.info("Permutation null: %d pairs, seed %d", len(spectra), seed)
    return NullThreshold(
        freqs=spectra[0].freqs,
        q99=q99,
        n_perm=len(spectra),
        seed=seed,
        pair_totals=[total.integral_ab + total.integral_ba for total in totals],
    )


def significance_mask(spec: GgcSpectrum, thr: NullThreshold) -> SignificanceMask:
    if spec.freqs.shape != thr.freqs.shape or not np.allclose(spec.freqs, thr.freqs):
        raise GridMismatchError("spectrum and threshold grids differ")
    return SignificanceMask(ab=spec.I_ab > thr.q99, ba=spec.I_ba > thr.q99)
