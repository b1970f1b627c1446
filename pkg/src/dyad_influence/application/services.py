from __future__ import annotations

import hashlib
import logging
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from importlib import metadata
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from dyad_influence.application.commands import PipelineConfig, SimulateCommand
from dyad_influence.application.report import (
    AnalysisReport,
    DyadFailure,
    ForceComparison,
    MovementSummary,
    Provenance,
    RoleSwapSummary,
    render_plots,
    write_tables,
)
from dyad_influence.domain.behavior import (
    DyadErrors,
    PerformanceSummary,
    dyad_errors,
    exclusion_filter,
    force_summaries,
)
from dyad_influence.domain.causality import (
    BandBoundaries,
    BandInfluence,
    Direction,
    GgcEstimator,
    GgcSpectrum,
    band_boundaries,
    band_peak_frequency,
    designated_direction,
    role_swap_influence,
    summarize_bands,
    total_influence,
)
from dyad_influence.domain.errors import AnalysisError, ConfigError, NoDataError
from dyad_influence.domain.fixtures import CheckOutcome, Fixture, FixtureReport
from dyad_influence.domain.forces import ForceFrame, ForcePair, to_movement_frame
from dyad_influence.domain.preprocessing import (
    butterworth_lowpass_dualpass,
    decimate,
    dominant_frequency,
    epoch_split_pair,
)
from dyad_influence.domain.signals import BivariateEpoch, Channel
from dyad_influence.domain.simulation import SimTrial, simulate
from dyad_influence.domain.statistics import TestResult, gated_compare, gated_one_sample, ks_two_sample, pearson
from dyad_influence.domain.surrogate import Individual, NullThreshold, permutation_null
from dyad_influence.domain.trials import TrialRecord
from dyad_influence.ports.fixtures import FixtureRepository
from dyad_influence.ports.reports import ReportReader, ReportWriter, encode_table
from dyad_influence.ports.trials import TrialRepository, UnreadableTrial


class DyadAnalysisError(Exception):
    pass


class ReportStore(ReportWriter, ReportReader):
    """A report that can be written and read back."""


class PreparedTrial(NamedTuple):
    trial: TrialRecord
    forces: ForcePair
    F1: Channel
    F2: Channel


class RoleSet(NamedTuple):
    """Epochs of the trials sharing one role assignment, participant A on channel 0."""

    roles: Tuple[str, str]
    epochs: List[BivariateEpoch]


class PreparedDyad(NamedTuple):
    """``epochs`` pools every trial with the first trial's role holders on the same channels."""

    dyad_id: str
    trials: List[PreparedTrial]
    epochs: List[BivariateEpoch]
    role: Optional[Direction]
    role_sets: Tuple[RoleSet, ...] = ()

    def individuals(self) -> Tuple[Individual, Individual]:
        return (
            Individual(dyad_id=self.dyad_id, participant="A", trials=tuple(t.F1 for t in self.trials)),
            Individual(dyad_id=self.dyad_id, participant="B", trials=tuple(t.F2 for t in self.trials)),
        )


class DyadOutcome(NamedTuple):
    dyad_id: str
    prepared: Optional[PreparedDyad] = None
    spectrum: Optional[GgcSpectrum] = None
    failure: Optional[DyadFailure] = None
    role_spectra: Tuple[GgcSpectrum, ...] = ()


def _reversed_roles(roles: Tuple[str, str], reference: Tuple[str, str]) -> bool:
    return roles[0] != roles[1] and roles == reference[::-1]


def _tool_version() -> str:
    try:
        return metadata.version("dyad-influence")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def input_digest(trials: Sequence[TrialRecord]) -> str:
    digest = hashlib.sha256()
    for trial in sorted(trials, key=lambda t: (t.dyad_id, t.trial_id)):
        digest.update(f"{trial.dyad_id}/{trial.trial_id}/{trial.fs!r}".encode())
        for channel in (trial.position, trial.S1, trial.S2):
            digest.update(np.ascontiguousarray(channel.samples).tobytes())
        digest.update(np.ascontiguousarray(trial.beats).tobytes())
        digest.update(trial.condition.model_dump_json().encode())
        digest.update(trial.masses.model_dump_json().encode())
    return digest.hexdigest()


def group_by_dyad(trials: Sequence[TrialRecord]) -> Dict[str, List[TrialRecord]]:
    grouped: Dict[str, List[TrialRecord]] = defaultdict(list)
    for trial in trials:
        grouped[trial.dyad_id].append(trial)
    return {dyad_id: sorted(grouped[dyad_id], key=lambda t: t.trial_id) for dyad_id in sorted(grouped)}


class DyadAnalysisService:
    """Runs the full pipeline: preprocessing, causality spectra, null threshold, bands,
    behaviour metrics and group statistics."""

    def __init__(self, writer: Optional[ReportWriter] = None, workers: int = 1) -> None:
        self.writer = writer
        self.workers = max(1, workers)
        self.logger = logging.getLogger(__name__)

    @contextmanager
    def _stage(self, stage: str, dyad_id: str = "") -> Iterator[None]:
        started = time.perf_counter()
        status = "ok"
        try:
            yield
        except Exception:
            status = "failed"
            raise
        finally:
            if self.writer is not None:
                self.writer.log_stage(
                    {
                        "stage": stage,
                        "dyad_id": dyad_id,
                        "elapsed_s": round(time.perf_counter() - started, 6),
                        "status": status,
                    }
                )

    def _map(self, func: Callable, items: Sequence) -> List:
        if self.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(func, items))
        return [func(item) for item in items]

    # preprocessing

    def prepare_trial(self, trial: TrialRecord, config: PipelineConfig) -> PreparedTrial:
        forces = trial.forces()
        position = butterworth_lowpass_dualpass(trial.position, config.filter.fc, config.filter.order)
        if config.force_frame is ForceFrame.MOVEMENT:
            forces = to_movement_frame(forces, position)
        F1, F2 = (
            decimate(butterworth_lowpass_dualpass(channel, config.filter.fc, config.filter.order), config.downsample_fs)
            for channel in (forces.F1, forces.F2)
        )
        return PreparedTrial(trial.model_copy(update={"position": position}), forces, F1, F2)

    def prepare_dyad(self, dyad_id: str, trials: Sequence[TrialRecord], config: PipelineConfig) -> PreparedDyad:
        if not trials:
            raise NoDataError(f"dyad {dyad_id} has no trials")
        prepared = [self.prepare_trial(trial, config) for trial in trials]
        reference = trials[0].condition.roles
        epochs: List[BivariateEpoch] = []
        by_roles: Dict[Tuple[str, str], List[BivariateEpoch]] = {}
        for item in prepared:
            split = epoch_split_pair(item.F1, item.F2, config.epochs_per_trial, parent_trial=item.trial.trial_id)
            roles = item.trial.condition.roles
            by_roles.setdefault(roles, []).extend(split)
            if _reversed_roles(roles, reference):
                split = [epoch.swapped() for epoch in split]
            epochs.extend(split)
        role = trials[0].condition.direction_from(config.bands.designated_role)
        role_sets = tuple(RoleSet(roles, items) for roles, items in by_roles.items())
        return PreparedDyad(dyad_id, prepared, epochs, role, role_sets)

    # causality

    def role_spectra(self, dyad: PreparedDyad, estimator: GgcEstimator) -> Tuple[GgcSpectrum, ...]:
        """Spectra of the initial and the swapped role assignment, empty when the roles never swap."""
        if len(dyad.role_sets) < 2:
            return ()
        initial, swapped = dyad.role_sets[:2]
        if not _reversed_roles(swapped.roles, initial.roles):
            self.logger.warning(
                "Dyad %s: roles %s and %s are not a swap; no role-swap comparison",
                dyad.dyad_id,
                initial.roles,
                swapped.roles,
            )
            return ()
        try:
            with self._stage("role_swap", dyad.dyad_id):
                return estimator.estimate(initial.epochs), estimator.estimate(swapped.epochs)
        except AnalysisError as exc:
            self.logger.warning("Dyad %s has no role-swap spectra: %s", dyad.dyad_id, exc)
            return ()

    def _analyse_dyad(
        self,
        item: Tuple[str, List[TrialRecord]],
        config: PipelineConfig,
        estimator: GgcEstimator,
        with_roles: bool = True,
    ) -> DyadOutcome:
        dyad_id, trials = item
        stage = "preprocess"
        try:
            with self._stage(stage, dyad_id):
                prepared = self.prepare_dyad(dyad_id, trials, config)
            stage = "ggc"
            with self._stage(stage, dyad_id):
                spectrum = estimator.estimate(prepared.epochs)
            self.logger.info("Dyad %s: %d epochs, order %s", dyad_id, len(prepared.epochs), spectrum.order)
        except AnalysisError as exc:
            self.logger.error("Dyad %s failed during %s: %s", dyad_id, stage, exc)
            failure = DyadFailure(dyad_id=dyad_id, stage=stage, error_type=type(exc).__name__, message=str(exc))
            return DyadOutcome(dyad_id, failure=failure)
        role_spectra = self.role_spectra(prepared, estimator) if with_roles else ()
        return DyadOutcome(dyad_id, prepared, spectrum, role_spectra=role_spectra)

    def surrogate_estimator(self, estimator: GgcEstimator, spectra: Sequence[GgcSpectrum]) -> GgcEstimator:
        """Surrogate pairs share the observed dyads' model order (median of the selected orders)."""
        if estimator.order is not None:
            return estimator
        orders = [spec.order for spec in spectra if spec.order is not None]
        if not orders:
            return estimator
        return estimator.with_order(int(np.median(orders)))

    def build_null(
        self, dyads: Sequence[PreparedDyad], config: PipelineConfig, estimator: GgcEstimator
    ) -> NullThreshold:
        pool: List[Individual] = []
        for dyad in dyads:
            pool.extend(dyad.individuals())
        with self._stage("surrogate"):
            return permutation_null(
                pool,
                estimator,
                n_perm=config.surrogate.n_perm,
                seed=config.surrogate.seed,
                epochs_per_trial=config.epochs_per_trial,
                workers=self.workers,
            )

    def resolve_boundaries(
        self,
        spectra: Sequence[GgcSpectrum],
        roles: Sequence[Optional[Direction]],
        threshold: Optional[NullThreshold],
        config: PipelineConfig,
    ) -> Tuple[BandBoundaries, str]:
        top = float(spectra[0].freqs[-1]) if spectra else config.downsample_fs / 2.0
        if config.bands.mode == "auto":
            if threshold is None:
                self.logger.warning("No null threshold available; falling back to fixed bands %s", config.bands.fixed)
            else:
                try:
                    with self._stage("bands"):
                        return band_boundaries(spectra, roles, threshold), "auto"
                except AnalysisError as exc:
                    self.logger.warning("Band boundary procedure failed (%s); using fixed bands", exc)
        f1, f2 = config.bands.fixed
        if f2 > top + 1e-9:
            raise ConfigError(f"fixed band edge {f2} Hz exceeds the analysed grid (top {top} Hz)")
        source = "fixed" if config.bands.mode == "fixed" else "fixed-fallback"
        return BandBoundaries(f1=f1, f2=f2, f2_from_threshold=False), source

    # behaviour

    def performance(
        self, dyads: Sequence[PreparedDyad], config: PipelineConfig
    ) -> Tuple[List[PerformanceSummary], List[str], List[str]]:
        use_width = config.behavior.normalizer == "width"
        overall: List[DyadErrors] = []
        per_condition: List[DyadErrors] = []
        for dyad in dyads:
            trials = [item.trial for item in dyad.trials]
            try:
                with self._stage("behavior", dyad.dyad_id):
                    overall.append(dyad_errors(trials, "all", use_width))
                    labels = sorted({t.condition.label for t in trials})
                    if len(labels) > 1:
                        for label in labels:
                            subset = [t for t in trials if t.condition.label == label]
                            per_condition.append(dyad_errors(subset, label, use_width))
            except AnalysisError as exc:
                self.logger.warning("Dyad %s has no performance metrics: %s", dyad.dyad_id, exc)
        result = exclusion_filter(overall)
        excluded = {d.dyad_id for d in result.excluded}
        summaries = [d.summary(d.dyad_id in excluded) for d in overall + per_condition]
        summaries.sort(key=lambda s: (s.dyad_id, s.condition))
        return summaries, sorted(excluded), result.log

    def force_comparisons(self, dyads: Sequence[PreparedDyad]) -> Tuple[List[ForceComparison], np.ndarray, np.ndarray]:
        rows: List[ForceComparison] = []
        freqs_a: List[np.ndarray] = []
        freqs_b: List[np.ndarray] = []
        for dyad in dyads:
            try:
                summary = force_summaries([item.forces for item in dyad.trials])
            except AnalysisError as exc:
                self.logger.warning("Dyad %s has no force summary: %s", dyad.dyad_id, exc)
                continue
            rows.append(
                ForceComparison(
                    dyad_id=dyad.dyad_id,
                    mean_abs_F_a=summary.mean_abs_F1,
                    mean_abs_F_b=summary.mean_abs_F2,
                    n_periods_a=summary.histogram_F1.frequencies.size,
                    n_periods_b=summary.histogram_F2.frequencies.size,
                )
            )
            freqs_a.append(summary.histogram_F1.frequencies)
            freqs_b.append(summary.histogram_F2.frequencies)
        pooled_a = np.concatenate(freqs_a) if freqs_a else np.array([])
        pooled_b = np.concatenate(freqs_b) if freqs_b else np.array([])
        return rows, pooled_a, pooled_b

    def role_swap_summaries(self, outcomes: Sequence[DyadOutcome]) -> List[RoleSwapSummary]:
        rows: List[RoleSwapSummary] = []
        for outcome in outcomes:
            if outcome.prepared is None or len(outcome.role_spectra) != 2:
                continue
            initial_roles = outcome.prepared.role_sets[0].roles
            reference = outcome.prepared.role or Direction.A_TO_B
            holder = 0 if reference is Direction.A_TO_B else 1
            influence = role_swap_influence(outcome.role_spectra[0], outcome.role_spectra[1], reference)
            rows.append(
                RoleSwapSummary(
                    dyad_id=outcome.dyad_id,
                    reference_role=initial_roles[holder],
                    holder="AB"[holder],
                    **influence.model_dump(),
                )
            )
        return rows

    def movement_summaries(
        self,
        dyads: Sequence[PreparedDyad],
        spectra: Dict[str, GgcSpectrum],
        bands: Dict[str, Dict[str, BandInfluence]],
        designated: Dict[str, Direction],
    ) -> List[MovementSummary]:
        """Movement frequency from the filtered position against the designated high-band influence."""
        rows: List[MovementSummary] = []
        for dyad in dyads:
            spec = spectra[dyad.dyad_id]
            high = bands[dyad.dyad_id]["high"]
            direction = designated[dyad.dyad_id]
            try:
                freq = float(np.mean([dominant_frequency(item.trial.position) for item in dyad.trials]))
                peak = band_peak_frequency(spec, high.band[0], high.band[1], direction)
            except AnalysisError as exc:
                self.logger.warning("Dyad %s has no movement summary: %s", dyad.dyad_id, exc)
                continue
            total = total_influence(spec)
            rows.append(
                MovementSummary(
                    dyad_id=dyad.dyad_id,
                    movement_freq_hz=freq,
                    movement_period_s=1.0 / freq,
                    high_integral=self._integral(high, direction),
                    high_peak_hz=peak,
                    total_influence=total.integral_ab + total.integral_ba,
                )
            )
        return rows

    @staticmethod
    def condition_labels(dyads: Sequence[PreparedDyad]) -> Dict[str, str]:
        """Condition label per dyad; a dyad run under several conditions gets them joined with '+'."""
        return {
            dyad.dyad_id: "+".join(sorted({item.trial.condition.label for item in dyad.trials})) for dyad in dyads
        }

    # group statistics

    def _try_test(self, tests: Dict[str, TestResult], name: str, run: Callable[[], TestResult]) -> None:
        try:
            tests[name] = run()
        except AnalysisError as exc:
            self.logger.info("Test %s skipped: %s", name, exc)

    def group_statistics(
        self,
        bands: Dict[str, Dict[str, BandInfluence]],
        designated: Dict[str, Direction],
        performance: Sequence[PerformanceSummary],
        forces: Sequence[ForceComparison],
        force_freqs: Tuple[np.ndarray, np.ndarray],
        retained: Sequence[str],
        role_swaps: Sequence[RoleSwapSummary] = (),
        movement: Sequence[MovementSummary] = (),
        conditions: Optional[Dict[str, str]] = None,
        threshold: Optional[NullThreshold] = None,
    ) -> Dict[str, TestResult]:
        tests: Dict[str, TestResult] = {}
        dyads = [d for d in sorted(bands) if d in retained]
        if dyads:
            for band in bands[dyads[0]]:
                deltas = [self._designated_delta(bands[d][band], designated[d]) for d in dyads]
                self._try_test(tests, f"delta_{band}_vs_zero", lambda v=deltas: gated_one_sample(v, 0.0))
            high_designated = [self._integral(bands[d]["high"], designated[d]) for d in dyads]
            high_other = [self._integral(bands[d]["high"], designated[d].reverse()) for d in dyads]
            self._try_test(
                tests, "high_designated_vs_other", lambda: gated_compare(high_designated, high_other, paired=True)
            )

            overall = {s.dyad_id: s for s in performance if s.condition == "all"}
            scored = [d for d in dyads if d in overall]
            for band in bands[dyads[0]]:
                deltas = [self._designated_delta(bands[d][band], designated[d]) for d in scored]
                for metric in ("PE_mean", "PE_sd"):
                    values = [getattr(overall[d], metric) for d in scored]
                    self._try_test(tests, f"pearson_delta_{band}_{metric}", lambda x=deltas, y=values: pearson(x, y))

            self.total_influence_tests(tests, bands, dyads, conditions or {}, threshold)

        self.role_swap_tests(tests, [r for r in role_swaps if r.dyad_id in retained])
        kept_movement = [m for m in movement if m.dyad_id in retained]
        periods = [m.movement_period_s for m in kept_movement]
        paired_with_period = {
            "high_integral": [m.high_integral for m in kept_movement],
            "high_peak": [m.high_peak_hz for m in kept_movement],
        }
        for metric, values in paired_with_period.items():
            self._try_test(tests, f"pearson_{metric}_vs_movement_period", lambda x=values: pearson(x, periods))

        kept_forces = [f for f in forces if f.dyad_id in retained]
        self._try_test(
            tests,
            "force_mean_abs_a_vs_b",
            lambda: gated_compare([f.mean_abs_F_a for f in kept_forces], [f.mean_abs_F_b for f in kept_forces], True),
        )
        self._try_test(tests, "force_frequency_ks_a_vs_b", lambda: ks_two_sample(*force_freqs))
        return tests

    def role_swap_tests(self, tests: Dict[str, TestResult], rows: Sequence[RoleSwapSummary]) -> None:
        """Each partner's total influence in the reference role against the other role, and across partners."""
        differences = {
            "role_swap_reference_first": [r.holder_as_reference - r.holder_as_other for r in rows],
            "role_swap_other_first": [r.partner_as_other - r.partner_as_reference for r in rows],
            "role_swap_reference_initial_vs_swapped": [r.holder_as_reference - r.partner_as_reference for r in rows],
            "role_swap_other_initial_vs_swapped": [r.partner_as_other - r.holder_as_other for r in rows],
        }
        for name, values in differences.items():
            self._try_test(tests, name, lambda v=values: gated_one_sample(v, 0.0))

    def total_influence_tests(
        self,
        tests: Dict[str, TestResult],
        bands: Dict[str, Dict[str, BandInfluence]],
        dyads: Sequence[str],
        conditions: Dict[str, str],
        threshold: Optional[NullThreshold],
    ) -> None:
        totals = {d: bands[d]["total"].integral_ab + bands[d]["total"].integral_ba for d in dyads}
        groups: Dict[str, List[float]] = defaultdict(list)
        for dyad_id, total in totals.items():
            if dyad_id in conditions:
                groups[conditions[dyad_id]].append(total)
        labels = sorted(groups)
        for i, first in enumerate(labels):
            for second in labels[i + 1 :]:
                self._try_test(
                    tests,
                    f"total_influence_{first}_vs_{second}",
                    lambda x=groups[first], y=groups[second]: gated_compare(x, y, paired=False),
                )
        if threshold is not None and threshold.pair_totals.size:
            self._try_test(
                tests,
                "total_influence_vs_null",
                lambda: gated_compare(list(totals.values()), threshold.pair_totals, paired=False),
            )

    @staticmethod
    def _integral(influence: BandInfluence, direction: Direction) -> float:
        return influence.integral_ab if direction is Direction.A_TO_B else influence.integral_ba

    @staticmethod
    def _designated_delta(influence: BandInfluence, direction: Direction) -> float:
        return influence.delta if direction is Direction.A_TO_B else -influence.delta

    # orchestration

    def ingest_failures(self, unreadable: Sequence[UnreadableTrial]) -> List[DyadFailure]:
        """One failure per dyad with an unreadable trial; the first bad file is reported."""
        failures: Dict[str, DyadFailure] = {}
        for item in unreadable:
            if item.dyad_id in failures:
                continue
            self.logger.error("Dyad %s failed during ingest: %s", item.dyad_id, item.message)
            failures[item.dyad_id] = DyadFailure(
                dyad_id=item.dyad_id, stage="ingest", error_type=item.error_type, message=item.message
            )
            if self.writer is not None:
                self.writer.log_stage(
                    {"stage": "ingest", "dyad_id": item.dyad_id, "elapsed_s": 0.0, "status": "failed"}
                )
        return [failures[dyad_id] for dyad_id in sorted(failures)]

    def run_analysis(
        self, trials: Sequence[TrialRecord], config: PipelineConfig, unreadable: Sequence[UnreadableTrial] = ()
    ) -> AnalysisReport:
        """Dyads with an unreadable trial are reported as ingest failures and left out."""
        ingest = self.ingest_failures(unreadable)
        broken = {failure.dyad_id for failure in ingest}
        grouped = {dyad_id: items for dyad_id, items in group_by_dyad(trials).items() if dyad_id not in broken}
        if not grouped:
            if ingest:
                raise DyadAnalysisError(f"all {len(ingest)} dyads failed; first error: {ingest[0].message}")
            raise NoDataError("no trials to analyse")
        estimator = config.estimator()
        outcomes: List[DyadOutcome] = self._map(
            lambda item: self._analyse_dyad(item, config, estimator), list(grouped.items())
        )

        failures = ingest + [outcome.failure for outcome in outcomes if outcome.failure is not None]
        prepared = [outcome.prepared for outcome in outcomes if outcome.prepared is not None]
        spectra = {outcome.dyad_id: outcome.spectrum for outcome in outcomes if outcome.spectrum is not None}
        if not spectra:
            raise DyadAnalysisError(f"all {len(grouped)} dyads failed; first error: {failures[0].message}")

        threshold: Optional[NullThreshold] = None
        if len(prepared) >= 2:
            try:
                threshold = self.build_null(prepared, config, self.surrogate_estimator(estimator, spectra.values()))
            except AnalysisError as exc:
                self.logger.warning("Permutation null unavailable: %s", exc)
                failures.append(DyadFailure(dyad_id="", stage="surrogate", error_type=type(exc).__name__, message=str(exc)))
        else:
            self.logger.warning("Permutation null needs at least 2 dyads; %d available", len(prepared))

        roles = [dyad.role for dyad in prepared]
        ordered_spectra = [spectra[dyad.dyad_id] for dyad in prepared]
        boundaries, source = self.resolve_boundaries(ordered_spectra, roles, threshold, config)
        designated = {
            dyad.dyad_id: designated_direction(spectra[dyad.dyad_id], dyad.role) for dyad in prepared
        }
        bands = {
            dyad_id: summarize_bands(spec, boundaries, config.bands.sub_bands) for dyad_id, spec in spectra.items()
        }

        performance, excluded, exclusion_log = self.performance(prepared, config)
        forces, freqs_a, freqs_b = self.force_comparisons(prepared)
        role_swaps = self.role_swap_summaries(outcomes)
        movement = self.movement_summaries(prepared, spectra, bands, designated)
        conditions = self.condition_labels(prepared)
        retained = [d for d in spectra if d not in excluded]
        with self._stage("stats"):
            tests = self.group_statistics(
                bands,
                designated,
                performance,
                forces,
                (freqs_a, freqs_b),
                retained,
                role_swaps=role_swaps,
                movement=movement,
                conditions=conditions,
                threshold=threshold,
            )

        return AnalysisReport(
            spectra=spectra,
            designated=designated,
            threshold=threshold,
            boundaries=boundaries,
            boundaries_source=source,
            bands=bands,
            performance=performance,
            exclusion_log=exclusion_log,
            forces=forces,
            role_swaps=role_swaps,
            movement=movement,
            conditions=conditions,
            tests=tests,
            failures=failures,
            provenance=Provenance(
                config_sha256=config.digest(),
                input_sha256=input_digest(trials),
                seed=config.surrogate.seed,
                tool_version=_tool_version(),
                n_trials=len(trials),
            ),
        )

    def write_report(self, report: AnalysisReport, writer: ReportWriter, reader: ReportReader) -> None:
        """Tables first, then SVG plots rendered back from those tables."""
        write_tables(report, writer)
        render_plots(reader, writer)

    def build_surrogate(self, trials: Sequence[TrialRecord], config: PipelineConfig) -> NullThreshold:
        """Only the permutation null, for the ``surrogate`` subcommand."""
        estimator = config.estimator()
        outcomes = self._map(
            lambda item: self._analyse_dyad(item, config, estimator, with_roles=False),
            list(group_by_dyad(trials).items()),
        )
        prepared = [outcome.prepared for outcome in outcomes if outcome.prepared is not None]
        spectra = [outcome.spectrum for outcome in outcomes if outcome.spectrum is not None]
        return self.build_null(prepared, config, self.surrogate_estimator(estimator, spectra))


class SimulationService:
    """Generates seeded synthetic sessions into a trial repository."""

    def __init__(self, repository: TrialRepository) -> None:
        self.repository = repository
        self.logger = logging.getLogger(__name__)

    def simulate_session(self, command: SimulateCommand) -> List[SimTrial]:
        base = command.config
        self.repository.set_session_metadata(
            {
                "fs": repr(base.fs),
                "generator": "simulate",
                "base_seed": str(base.seed),
                "n_dyads": str(command.n_dyads),
                "trials_per_dyad": str(command.n_trials),
                "swap_roles": str(int(command.swap_roles)),
            }
        )
        generated: List[SimTrial] = []
        for dyad_index in range(command.n_dyads):
            dyad_id = f"d{dyad_index + 1:02d}"
            for trial_index in range(command.n_trials):
                seed = base.seed + dyad_index * command.n_trials + trial_index
                config = base.model_copy(update={"seed": seed})
                swapped = command.swap_roles and trial_index >= command.n_trials - command.n_trials // 2
                if swapped:
                    config = config.with_roles_swapped()
                sim = simulate(config, trial_id=f"t{trial_index + 1:02d}", dyad_id=dyad_id)
                truth = sim.ground_truth
                self.repository.add(
                    sim.record,
                    metadata={
                        "seed": str(seed),
                        "truth_direction": truth.direction.value if truth.direction else "none",
                        "truth_band": f"{truth.band[0]!r},{truth.band[1]!r}",
                        "truth_gain": repr(truth.gain),
                        "roles_swapped": str(int(swapped)),
                    },
                )
                generated.append(sim)
        self.logger.info("Simulated %d trials for %d dyads", len(generated), command.n_dyads)
        return generated


class FixtureWorkspace(Protocol):
    """Scratch stores a fixture run writes into."""

    def new_session(self) -> TrialRepository:
        ...

    def new_report(self) -> ReportStore:
        ...


class FixtureService:
    """Regenerates a fixture from its seeds, analyses it and checks the report."""

    def __init__(
        self,
        fixtures: FixtureRepository,
        workspace: FixtureWorkspace,
        analysis: Optional[DyadAnalysisService] = None,
    ) -> None:
        self.fixtures = fixtures
        self.workspace = workspace
        self.analysis = analysis or DyadAnalysisService()
        self.logger = logging.getLogger(__name__)

    def run_fixture(self, fixture: Fixture) -> ReportStore:
        session = self.workspace.new_session()
        command = SimulateCommand(
            config=fixture.simulation,
            n_trials=fixture.trials_per_dyad,
            n_dyads=fixture.n_dyads,
            swap_roles=fixture.swap_roles,
            out_dir=".",
        )
        SimulationService(session).simulate_session(command)
        try:
            config = PipelineConfig.model_validate(fixture.pipeline)
        except ValidationError as exc:
            raise ConfigError(f"fixture {fixture.id} has an invalid pipeline config: {exc}") from exc
        report = self.analysis.run_analysis(session.list_trials(), config)
        store = self.workspace.new_report()
        self.analysis.write_report(report, store, store)
        return store

    @staticmethod
    def digests(store: ReportStore) -> Dict[str, str]:
        return {
            f"{name}.csv": hashlib.sha256(encode_table(store.read_table(name))).hexdigest()
            for name in store.list_tables()
        }

    def verify_fixture(self, fixture_id: str) -> FixtureReport:
        fixture = self.fixtures.get(fixture_id)
        store = self.run_fixture(fixture)
        result = FixtureReport(fixture_id=fixture_id)
        for expectation in fixture.expectations:
            if expectation.table not in store.list_tables():
                result.checks.append(
                    CheckOutcome(description=expectation.describe(), passed=False, detail="table missing")
                )
                continue
            result.checks.append(expectation.evaluate(store.read_table(expectation.table)))
        actual = self.digests(store)
        for filename, expected in sorted(fixture.digests.items()):
            observed = actual.get(filename)
            if observed is None:
                result.file_diffs.append(f"{filename}: missing from the regenerated report")
            elif observed != expected:
                result.file_diffs.append(f"{filename}: expected sha256 {expected[:12]}, got {observed[:12]}")
        self.logger.info("Fixture %s: %s", fixture_id, "pass" if result.passed else "fail")
        return result

    def record_fixture(self, fixture_id: str) -> Fixture:
        """Store the digests of a fresh run as the fixture's expected output."""
        fixture = self.fixtures.get(fixture_id)
        updated = fixture.model_copy(update={"digests": self.digests(self.run_fixture(fixture))})
        self.fixtures.save(updated)
        return updated
