from __future__ import annotations

import configparser
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from dyad_influence.domain.errors import AnalysisError, ConfigError, ParseError
from dyad_influence.domain.forces import MassConfig
from dyad_influence.domain.signals import Channel
from dyad_influence.domain.trials import EXPECTED_BEATS, Condition, TrialRecord
from dyad_influence.ports.coefficients import SegmentTableSource
from dyad_influence.ports.trials import SessionLoad, TrialRepository, UnreadableTrial

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"
SESSION_SECTION = "session"
TRIAL_SECTION_PREFIX = "trial "
TRIAL_COLUMNS = ("t_s", "s1_n", "s2_n", "pos_m", "beat")
FLOAT_FORMAT = "%.17g"
FORMAT_VERSION = "1"


def _new_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep "M" distinct from "m1"
    return parser


def write_trial_csv(path: Path, trial: TrialRecord) -> None:
    """One row per sample; ``beat`` is 1 on the sample of each metronome beat."""
    n = len(trial.position)
    times = np.arange(n) / trial.fs
    beat = np.zeros(n, dtype=int)
    beat[np.rint(trial.beats * trial.fs).astype(int)] = 1
    frame = pd.DataFrame(
        {
            "t_s": times,
            "s1_n": trial.S1.samples,
            "s2_n": trial.S2.samples,
            "pos_m": trial.position.samples,
            "beat": beat,
        }
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _numeric_column(frame: pd.DataFrame, column: str, path: Path) -> np.ndarray:
    raw = frame[column]
    try:
        values = raw.astype(float).to_numpy()
    except ValueError:
        coerced = pd.to_numeric(raw, errors="coerce")
        row = int(np.flatnonzero(coerced.isna().to_numpy())[0])
        raise ParseError(
            f"{path.name}: non-numeric value {raw.iloc[row]!r} in column '{column}' at line {row + 2}",
            line=row + 2,
            column=column,
        ) from None
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0])
        raise ParseError(
            f"{path.name}: NaN or Inf in column '{column}' at line {row + 2}", line=row + 2, column=column
        )
    return values


def read_trial_csv(path: Path, fs: float) -> Dict[str, np.ndarray]:
    """Columns of one trial file as float arrays plus beat times; raises ParseError with line numbers."""
    if not path.exists():
        raise ParseError(f"trial file {path} does not exist")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ParseError(f"{path.name}: {exc}") from exc
    missing = [column for column in TRIAL_COLUMNS if column not in frame.columns]
    if missing:
        raise ParseError(f"{path.name}: missing columns {', '.join(missing)}", line=1)
    if len(frame) < 2:
        raise ParseError(f"{path.name}: needs at least two samples", line=2)
    columns = {column: _numeric_column(frame, column, path) for column in TRIAL_COLUMNS}

    steps = np.diff(columns["t_s"])
    if not np.allclose(steps, 1.0 / fs, rtol=1e-6, atol=1e-9):
        raise ConfigError(f"{path.name}: sample spacing {float(np.median(steps)):.6g} s does not match fs = {fs} Hz")
    beat = columns["beat"]
    odd = np.flatnonzero((beat != 0) & (beat != 1))
    if odd.size:
        raise ParseError(f"{path.name}: beat must be 0 or 1 at line {int(odd[0]) + 2}", line=int(odd[0]) + 2, column="beat")
    columns["beat_times"] = np.flatnonzero(beat == 1) / fs
    return columns


class CsvTrialRepository(TrialRepository):
    """Session directory of per-trial CSV files described by ``manifest.txt``.

    The manifest holds a ``[session]`` section (``fs``) and one ``[trial <file>]`` section
    per trial with dyad, condition and mass metadata.
    """

    def __init__(self, root: str | Path, segment_source: Optional[SegmentTableSource] = None) -> None:
        self.root = Path(root)
        self.segment_source = segment_source
        self.logger = logging.getLogger(__name__)

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def _read_manifest(self) -> configparser.ConfigParser:
        parser = _new_parser()
        if not self.manifest_path.exists():
            raise ConfigError(f"no {MANIFEST_NAME} in {self.root}")
        try:
            parser.read(self.manifest_path)
        except configparser.Error as exc:
            raise ParseError(f"{MANIFEST_NAME}: {exc}", line=getattr(exc, "lineno", None)) from exc
        return parser

    def session_metadata(self) -> Mapping[str, str]:
        parser = self._read_manifest()
        return dict(parser[SESSION_SECTION]) if parser.has_section(SESSION_SECTION) else {}

    def _session_fs(self, parser: configparser.ConfigParser) -> float:
        try:
            return parser.getfloat(SESSION_SECTION, "fs")
        except (configparser.Error, ValueError) as exc:
            raise ConfigError(f"{MANIFEST_NAME}: [session] needs a numeric fs") from exc

    def _masses(self, section: configparser.SectionProxy) -> MassConfig:
        try:
            if "m1" in section and "m2" in section:
                return MassConfig(M=float(section["M"]), m1=float(section["m1"]), m2=float(section["m2"]))
            if self.segment_source is None:
                raise ConfigError(f"[{section.name}] gives body masses but no segment table is configured")
            table = self.segment_source.load()
            return MassConfig(
                M=float(section["M"]),
                m1=table.segment_mass(float(section["body_mass_1"]), section["sex_1"]),
                m2=table.segment_mass(float(section["body_mass_2"]), section["sex_2"]),
            )
        except KeyError as exc:
            raise ConfigError(f"[{section.name}] is missing {exc.args[0]}") from exc
        except (ValueError, ValidationError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[{section.name}] has invalid masses: {exc}") from exc

    def _condition(self, section: configparser.SectionProxy) -> Condition:
        try:
            roles = tuple(part.strip() for part in section.get("roles", "A,B").split(","))
            centers = section.get("target_centers")
            return Condition(
                label=section.get("condition", "default"),
                target_distance=float(section["target_distance"]),
                metronome_period=float(section["metronome_period"]),
                roles=roles,
                target_width=float(section.get("target_width", "0.03")),
                target_centers=tuple(float(c) for c in centers.split(",")) if centers else None,
            )
        except KeyError as exc:
            raise ConfigError(f"[{section.name}] is missing {exc.args[0]}") from exc
        except (ValueError, ValidationError) as exc:
            raise ConfigError(f"[{section.name}] has an invalid condition: {exc}") from exc

    def _load_trial(self, section: configparser.SectionProxy, fs: float) -> TrialRecord:
        filename = section.name[len(TRIAL_SECTION_PREFIX) :].strip()
        columns = read_trial_csv(self.root / filename, fs)
        condition = self._condition(section)
        masses = self._masses(section)
        try:
            trial = TrialRecord(
                dyad_id=section.get("dyad_id", "unknown"),
                trial_id=section.get("trial_id", Path(filename).stem),
                position=Channel(samples=columns["pos_m"], fs=fs, label="pos"),
                S1=Channel(samples=columns["s1_n"], fs=fs, label="S1"),
                S2=Channel(samples=columns["s2_n"], fs=fs, label="S2"),
                beats=columns["beat_times"],
                condition=condition,
                masses=masses,
            )
        except ValidationError as exc:
            raise ParseError(f"{filename}: {exc}") from exc
        if not trial.has_expected_beats:
            self.logger.warning(
                "Trial %s has %d beats (expected %d); keeping it", filename, trial.beats.size, EXPECTED_BEATS
            )
        return trial

    @staticmethod
    def _trial_sections(parser: configparser.ConfigParser) -> List[str]:
        return sorted(s for s in parser.sections() if s.startswith(TRIAL_SECTION_PREFIX))

    def list_trials(self) -> List[TrialRecord]:
        parser = self._read_manifest()
        fs = self._session_fs(parser)
        trials = [self._load_trial(parser[name], fs) for name in self._trial_sections(parser)]
        self.logger.info("Loaded %d trials from %s", len(trials), self.root)
        return trials

    def load_session(self) -> SessionLoad:
        """Like :meth:`list_trials`, but a trial that fails to load is reported instead of raised.

        Manifest-level problems (missing manifest, no ``fs``) still raise.
        """
        parser = self._read_manifest()
        fs = self._session_fs(parser)
        trials: List[TrialRecord] = []
        unreadable: List[UnreadableTrial] = []
        for name in self._trial_sections(parser):
            section = parser[name]
            try:
                trials.append(self._load_trial(section, fs))
            except AnalysisError as exc:
                source = name[len(TRIAL_SECTION_PREFIX) :].strip()
                self.logger.error("Trial %s could not be loaded: %s", source, exc)
                unreadable.append(
                    UnreadableTrial(
                        dyad_id=section.get("dyad_id", "unknown"),
                        source=source,
                        error_type=type(exc).__name__,
                        message=str(exc),
                    )
                )
        self.logger.info("Loaded %d trials from %s (%d unreadable)", len(trials), self.root, len(unreadable))
        return SessionLoad(trials, unreadable)

    def metadata(self) -> Dict[str, Dict[str, str]]:
        """Per-trial manifest entries keyed by trial file name."""
        parser = self._read_manifest()
        return {
            name[len(TRIAL_SECTION_PREFIX) :].strip(): dict(parser[name])
            for name in sorted(parser.sections())
            if name.startswith(TRIAL_SECTION_PREFIX)
        }

    def add(self, trial: TrialRecord, metadata: Optional[Mapping[str, str]] = None) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        parser = self._read_manifest() if self.manifest_path.exists() else _new_parser()
        if not parser.has_section(SESSION_SECTION):
            parser.add_section(SESSION_SECTION)
        if "fs" not in parser[SESSION_SECTION]:
            parser[SESSION_SECTION]["fs"] = repr(trial.fs)
            parser[SESSION_SECTION]["format"] = FORMAT_VERSION
        elif not math.isclose(self._session_fs(parser), trial.fs):
            raise ConfigError(f"trial at {trial.fs} Hz does not match session rate {parser[SESSION_SECTION]['fs']} Hz")

        filename = f"{trial.dyad_id}_{trial.trial_id}.csv"
        write_trial_csv(self.root / filename, trial)
        condition = trial.condition
        entry = {
            "dyad_id": trial.dyad_id,
            "trial_id": trial.trial_id,
            "condition": condition.label,
            "roles": ",".join(condition.roles),
            "target_distance": repr(condition.target_distance),
            "metronome_period": repr(condition.metronome_period),
            "target_width": repr(condition.target_width),
            "M": repr(trial.masses.M),
            "m1": repr(trial.masses.m1),
            "m2": repr(trial.masses.m2),
        }
        if condition.target_centers is not None:
            entry["target_centers"] = ",".join(repr(c) for c in condition.target_centers)
        entry.update({key: str(value) for key, value in (metadata or {}).items()})
        parser[f"{TRIAL_SECTION_PREFIX}{filename}"] = entry
        with open(self.manifest_path, "w") as handle:
            parser.write(handle)

    def set_session_metadata(self, entries: Mapping[str, str]) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        parser = self._read_manifest() if self.manifest_path.exists() else _new_parser()
        if not parser.has_section(SESSION_SECTION):
            parser.add_section(SESSION_SECTION)
        for key, value in entries.items():
            parser[SESSION_SECTION][key] = str(value)
        with open(self.manifest_path, "w") as handle:
            parser.write(handle)
