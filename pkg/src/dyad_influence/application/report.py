"""Analysis report model and its tabular / SVG renderings."""

from __future__ import annotations

import json
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from dyad_influence.adapters.plots.svg import Series, dyad_spectrum_plot, spectrum_plot
from dyad_influence.domain.behavior import PerformanceSummary
from dyad_influence.domain.causality import BandBoundaries, BandInfluence, Direction, GgcSpectrum
from dyad_influence.domain.signals import ArrayModel
from dyad_influence.domain.statistics import TestResult
from dyad_influence.domain.surrogate import NullThreshold, significance_mask
from dyad_influence.ports.reports import ReportReader, ReportWriter

SPECTRA_PREFIX = "spectra/"
PLOTS_PREFIX = "plots/"


class DyadFailure(BaseModel):
    model_config = ConfigDict(frozen=True)

    dyad_id: str
    stage: str
    error_type: str
    message: str


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    config_sha256: str
    input_sha256: str
    seed: int
    tool_version: str
    n_trials: int


class ForceComparison(BaseModel):
    model_config = ConfigDict(frozen=True)

    dyad_id: str
    mean_abs_F_a: float
    mean_abs_F_b: float
    n_periods_a: int
    n_periods_b: int


class RoleSwapSummary(BaseModel):
    """Total influence of one dyad's partners before and after they exchange roles."""

    model_config = ConfigDict(frozen=True)

    dyad_id: str
    reference_role: str
    holder: str
    holder_as_reference: float
    holder_as_other: float
    partner_as_other: float
    partner_as_reference: float


class MovementSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    dyad_id: str
    movement_freq_hz: float
    movement_period_s: float
    high_integral: float
    high_peak_hz: float
    total_influence: float


class AnalysisReport(ArrayModel):
    spectra: Dict[str, GgcSpectrum]
    designated: Dict[str, Direction]
    threshold: Optional[NullThreshold] = None
    boundaries: BandBoundaries
    boundaries_source: str
    bands: Dict[str, Dict[str, BandInfluence]]
    performance: List[PerformanceSummary] = []
    exclusion_log: List[str] = []
    forces: List[ForceComparison] = []
    role_swaps: List[RoleSwapSummary] = []
    movement: List[MovementSummary] = []
    conditions: Dict[str, str] = {}
    tests: Dict[str, TestResult] = {}
    failures: List[DyadFailure] = []
    provenance: Provenance

    @property
    def has_failures(self) -> bool:
        return bool(self.failures)


def _fraction_in_band(freqs: np.ndarray, mask: np.ndarray, band: Tuple[float, float]) -> float:
    inside = (freqs >= band[0] - 1e-9) & (freqs <= band[1] + 1e-9)
    return float(mask[inside].mean()) if inside.any() else 0.0


def spectrum_table(spec: GgcSpectrum, threshold: Optional[NullThreshold]) -> pd.DataFrame:
    frame = pd.DataFrame({"freq_hz": spec.freqs, "I_ab": spec.I_ab, "I_ba": spec.I_ba})
    if threshold is not None:
        mask = significance_mask(spec, threshold)
        frame["q99"] = threshold.q99
        frame["sig_ab"] = mask.ab.astype(int)
        frame["sig_ba"] = mask.ba.astype(int)
    return frame


def threshold_table(threshold: NullThreshold) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "freq_hz": threshold.freqs,
            "q99": threshold.q99,
            "n_perm": threshold.n_perm,
            "seed": threshold.seed,
        }
    )


def bands_table(report: AnalysisReport) -> pd.DataFrame:
    rows = []
    for dyad_id in sorted(report.bands):
        spec = report.spectra[dyad_id]
        designated = report.designated[dyad_id]
        mask = significance_mask(spec, report.threshold) if report.threshold is not None else None
        for name, influence in report.bands[dyad_id].items():
            sign = 1.0 if designated is Direction.A_TO_B else -1.0
            row = {
                "dyad_id": dyad_id,
                "band": name,
                "f_lo": influence.band[0],
                "f_hi": influence.band[1],
                "integral_ab": influence.integral_ab,
                "integral_ba": influence.integral_ba,
                "delta": influence.delta,
                "designated": designated.value,
                "delta_designated": sign * influence.delta,
            }
            if mask is not None:
                row["significant_fraction_ab"] = _fraction_in_band(spec.freqs, mask.ab, influence.band)
                row["significant_fraction_ba"] = _fraction_in_band(spec.freqs, mask.ba, influence.band)
            rows.append(row)
    return pd.DataFrame(rows)


def boundaries_table(report: AnalysisReport) -> pd.DataFrame:
    b = report.boundaries
    return pd.DataFrame(
        [
            {
                "f1": b.f1,
                "f2": b.f2,
                "source": report.boundaries_source,
                "f2_from_threshold": int(b.f2_from_threshold),
                "n_first_peaks": len(b.first_peaks),
            }
        ]
    )


def performance_table(report: AnalysisReport) -> pd.DataFrame:
    columns = ["dyad_id", "condition", "PE_mean", "PE_sd", "SE_mean", "SE_sd", "excluded_flag"]
    rows = [
        {**summary.model_dump(exclude={"excluded"}), "excluded_flag": int(summary.excluded)}
        for summary in report.performance
    ]
    return pd.DataFrame(rows, columns=columns)


def stats_table(report: AnalysisReport) -> pd.DataFrame:
    columns = ["name", "test_name", "statistic", "p_value", "df", "n", "route"]
    rows = [
        {
            "name": name,
            "test_name": result.test_name,
            "statistic": result.statistic,
            "p_value": result.p_value,
            "df": result.df,
            "n": " ".join(str(n) for n in result.n),
            "route": result.route or "",
        }
        for name, result in sorted(report.tests.items())
    ]
    return pd.DataFrame(rows, columns=columns)


def role_swaps_table(report: AnalysisReport) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in report.role_swaps], columns=list(RoleSwapSummary.model_fields))


def movement_table(report: AnalysisReport) -> pd.DataFrame:
    rows = [{**m.model_dump(), "condition": report.conditions.get(m.dyad_id, "")} for m in report.movement]
    return pd.DataFrame(rows, columns=[*MovementSummary.model_fields, "condition"])


def failures_table(report: AnalysisReport) -> pd.DataFrame:
    return pd.DataFrame([f.model_dump() for f in report.failures], columns=list(DyadFailure.model_fields))


def forces_table(report: AnalysisReport) -> pd.DataFrame:
    return pd.DataFrame([f.model_dump() for f in report.forces], columns=list(ForceComparison.model_fields))


def write_tables(report: AnalysisReport, writer: ReportWriter) -> None:
    for dyad_id, spec in sorted(report.spectra.items()):
        writer.write_table(f"{SPECTRA_PREFIX}{dyad_id}", spectrum_table(spec, report.threshold))
    if report.threshold is not None:
        writer.write_table("threshold", threshold_table(report.threshold))
    writer.write_table("bands", bands_table(report))
    writer.write_table("boundaries", boundaries_table(report))
    writer.write_table("performance", performance_table(report))
    writer.write_table("stats", stats_table(report))
    writer.write_table("forces", forces_table(report))
    writer.write_table("movement", movement_table(report))
    if report.role_swaps:
        writer.write_table("role_swaps", role_swaps_table(report))
    writer.write_table("failures", failures_table(report))
    writer.write_text("exclusions.txt", "".join(f"{line}\n" for line in report.exclusion_log))
    writer.write_text("provenance.json", json.dumps(report.provenance.model_dump(), indent=2, sort_keys=True) + "\n")


def render_plots(reader: ReportReader, writer: ReportWriter) -> List[str]:
    """SVG views of the spectrum tables: one per dyad plus the ensemble of designated curves."""
    tables = reader.list_tables()
    boundaries = reader.read_table("boundaries") if "boundaries" in tables else None
    bands: List[Tuple[float, float]] = []
    if boundaries is not None and len(boundaries):
        f1, f2 = float(boundaries["f1"].iloc[0]), float(boundaries["f2"].iloc[0])
        bands = [(0.0, f1), (f1, f2)]
    designated: Dict[str, str] = {}
    if "bands" in tables:
        band_frame = reader.read_table("bands")
        if len(band_frame):
            designated = dict(zip(band_frame["dyad_id"].astype(str), band_frame["designated"]))

    written: List[str] = []
    curves: List[np.ndarray] = []
    freqs: Optional[np.ndarray] = None
    q99: Optional[np.ndarray] = None
    for name in tables:
        if not name.startswith(SPECTRA_PREFIX):
            continue
        dyad_id = name[len(SPECTRA_PREFIX) :]
        frame = reader.read_table(name)
        freqs = frame["freq_hz"].to_numpy()
        q99 = frame["q99"].to_numpy() if "q99" in frame else None
        svg = dyad_spectrum_plot(
            freqs, frame["I_ab"].to_numpy(), frame["I_ba"].to_numpy(), q99, bands, title=f"Dyad {dyad_id}"
        )
        target = f"{PLOTS_PREFIX}{dyad_id}.svg"
        writer.write_text(target, svg)
        written.append(target)
        column = "I_ba" if designated.get(dyad_id) == Direction.B_TO_A.value else "I_ab"
        curves.append(frame[column].to_numpy())

    if freqs is not None and len(curves) >= 2:
        ensemble = np.vstack(curves)
        series = [
            Series("designated mean", ensemble.mean(axis=0), "#1f77b4"),
            Series("mean + 3 sd", ensemble.mean(axis=0) + 3.0 * ensemble.std(axis=0, ddof=1), "#9467bd", dashed=True),
        ]
        if q99 is not None:
            series.append(Series("null q99", q99, "#555555", dashed=True))
        writer.write_text(f"{PLOTS_PREFIX}ensemble.svg", spectrum_plot(freqs, series, bands, "Designated direction"))
        written.append(f"{PLOTS_PREFIX}ensemble.svg")
    return written
