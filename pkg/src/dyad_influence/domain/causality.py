"""Granger-Geweke causality spectra, band integrals and band boundaries.

Channel 0 of every bivariate epoch is participant A and channel 1 is participant B.
``I_ab`` is the influence of A on B.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from dyad_influence.domain.errors import (
    ConfigError,
    GridMismatchError,
    InsufficientSamplesError,
    InvalidBandError,
    MissingPeakError,
    NumericDomainError,
)
from dyad_influence.domain.signals import ArrayModel, BivariateEpoch, FloatArray
from dyad_influence.domain.spectral import (
    DEFAULT_FREQ_STEP_HZ,
    DEFAULT_P_MAX,
    SpectralDecomposition,
    cross_spectral_density,
    fit_stable_var,
    frequency_grid,
    select_order,
    spectral_matrix,
    wilson_factorize,
)

if TYPE_CHECKING:
    from dyad_influence.domain.surrogate import NullThreshold

logger = logging.getLogger(__name__)

ROUNDING_FLOOR = 1e-12
PEAK_SEARCH_START_HZ = 0.1
PEAK_PROMINENCE_FRACTION = 0.1
BELOW_THRESHOLD_BINS = 3
DEFAULT_SUB_BAND_EDGES = (4.0, 6.0)


class Direction(str, Enum):
    A_TO_B = "a_to_b"
    B_TO_A = "b_to_a"

    def reverse(self) -> "Direction":
        return Direction.B_TO_A if self is Direction.A_TO_B else Direction.A_TO_B


class GgcSpectrum(ArrayModel):
    freqs: FloatArray
    I_ab: FloatArray
    I_ba: FloatArray
    order: Optional[int] = None

    @model_validator(mode="after")
    def validate_curves(self) -> "GgcSpectrum":
        if self.I_ab.shape != self.freqs.shape or self.I_ba.shape != self.freqs.shape:
            raise ValueError("causality curves must match the frequency grid")
        for curve in (self.I_ab, self.I_ba):
            if not np.all(np.isfinite(curve)):
                raise ValueError("causality curves must be finite")
            if np.any(curve < 0):
                raise ValueError("causality curves must be non-negative")
        return self

    def curve(self, direction: Direction) -> np.ndarray:
        return self.I_ab if direction is Direction.A_TO_B else self.I_ba

    def swapped(self) -> "GgcSpectrum":
        return GgcSpectrum(freqs=self.freqs, I_ab=self.I_ba, I_ba=self.I_ab, order=self.order)


class BandInfluence(BaseModel):
    model_config = ConfigDict(frozen=True)

    band: Tuple[float, float]
    integral_ab: float = Field(ge=0)
    integral_ba: float = Field(ge=0)

    @model_validator(mode="after")
    def validate_band(self) -> "BandInfluence":
        if not self.band[0] < self.band[1]:
            raise ValueError(f"band must satisfy f_lo < f_hi, got {self.band}")
        return self

    @property
    def delta(self) -> float:
        return self.integral_ab - self.integral_ba


class BandBoundaries(BaseModel):
    model_config = ConfigDict(frozen=True)

    f1: float
    f2: float
    first_peaks: Tuple[float, ...] = ()
    f2_from_threshold: bool = True

    @model_validator(mode="after")
    def validate_order(self) -> "BandBoundaries":
        if not 0.0 < self.f1 < self.f2:
            raise ValueError(f"band boundaries must satisfy 0 < f1 < f2, got f1={self.f1}, f2={self.f2}")
        return self

    def bands(self) -> List[Tuple[float, float]]:
        return [(0.0, self.f1), (self.f1, self.f2)]


def _directional_ggc(
    sigma_own: float, sigma_other: float, sigma_cross: float, h_cross: np.ndarray, s_own: np.ndarray, freqs: np.ndarray
) -> np.ndarray:
    if np.any(s_own <= 0):
        bad = int(np.flatnonzero(s_own <= 0)[0])
        raise NumericDomainError(f"auto-spectrum is not positive at {freqs[bad]:.3f} Hz", frequency=float(freqs[bad]))
    partial = sigma_other - sigma_cross**2 / sigma_own
    argument = 1.0 - partial * np.abs(h_cross) ** 2 / s_own
    if np.any(argument <= 0):
        bad = int(np.flatnonzero(argument <= 0)[0])
        raise NumericDomainError(
            f"log argument {argument[bad]:.3e} is not positive at {freqs[bad]:.3f} Hz", frequency=float(freqs[bad])
        )
    values = -np.log(argument)
    negative = values < -ROUNDING_FLOOR
    if np.any(negative):
        bad = int(np.flatnonzero(negative)[0])
        raise NumericDomainError(
            f"causality {values[bad]:.3e} is negative beyond rounding at {freqs[bad]:.3f} Hz",
            frequency=float(freqs[bad]),
        )
    return np.clip(values, 0.0, None)


def ggc_spectrum(decomp: SpectralDecomposition, order: Optional[int] = None) -> GgcSpectrum:
    """Geweke's frequency-domain causality in both directions.

    I_{B->A}(f) = -ln(1 - (Sigma_BB - Sigma_AB^2 / Sigma_AA) |H_AB(f)|^2 / S_AA(f)).
    """
    sigma = decomp.Sigma
    S_aa = decomp.S[:, 0, 0].real
    S_bb = decomp.S[:, 1, 1].real
    I_ba = _directional_ggc(sigma[0, 0], sigma[1, 1], sigma[0, 1], decomp.H[:, 0, 1], S_aa, decomp.freqs)
    I_ab = _directional_ggc(sigma[1, 1], sigma[0, 0], sigma[0, 1], decomp.H[:, 1, 0], S_bb, decomp.freqs)
    return GgcSpectrum(freqs=decomp.freqs, I_ab=I_ab, I_ba=I_ba, order=order)


def _band_curve(freqs: np.ndarray, values: np.ndarray, f_lo: float, f_hi: float) -> Tuple[np.ndarray, np.ndarray]:
    if not f_lo < f_hi:
        raise InvalidBandError(f"band [{f_lo}, {f_hi}] is empty")
    tolerance = 1e-9 * max(1.0, abs(freqs[-1]))
    if f_lo < freqs[0] - tolerance or f_hi > freqs[-1] + tolerance:
        raise InvalidBandError(f"band [{f_lo}, {f_hi}] exceeds the grid [{freqs[0]}, {freqs[-1]}]")
    f_lo = max(f_lo, freqs[0])
    f_hi = min(f_hi, freqs[-1])
    inside = (freqs > f_lo + tolerance) & (freqs < f_hi - tolerance)
    band_freqs = np.concatenate([[f_lo], freqs[inside], [f_hi]])
    band_values = np.concatenate([[np.interp(f_lo, freqs, values)], values[inside], [np.interp(f_hi, freqs, values)]])
    return band_freqs, band_values


def band_integral(spec: GgcSpectrum, f_lo: float, f_hi: float, direction: Direction = Direction.A_TO_B) -> float:
    """Trapezoidal integral of one direction over [f_lo, f_hi], interpolating the edge values."""
    band_freqs, band_values = _band_curve(spec.freqs, spec.curve(direction), f_lo, f_hi)
    return float(trapezoid(band_values, band_freqs))


def band_influence(spec: GgcSpectrum, f_lo: float, f_hi: float) -> BandInfluence:
    return BandInfluence(
        band=(f_lo, f_hi),
        integral_ab=band_integral(spec, f_lo, f_hi, Direction.A_TO_B),
        integral_ba=band_integral(spec, f_lo, f_hi, Direction.B_TO_A),
    )


def delta_influence(spec: GgcSpectrum, boundaries: BandBoundaries) -> List[BandInfluence]:
    return [band_influence(spec, f_lo, f_hi) for f_lo, f_hi in boundaries.bands()]


def default_sub_bands(boundaries: BandBoundaries) -> List[Tuple[float, float]]:
    """[f1, 4], [4, 6], [6, f2] Hz; sub-bands that collapse outside (f1, f2) are skipped."""
    edges = [boundaries.f1] + [e for e in DEFAULT_SUB_BAND_EDGES if boundaries.f1 < e < boundaries.f2] + [boundaries.f2]
    return list(zip(edges[:-1], edges[1:]))


def sub_band_influences(spec: GgcSpectrum, bands: Sequence[Tuple[float, float]]) -> List[BandInfluence]:
    return [band_influence(spec, f_lo, f_hi) for f_lo, f_hi in bands]


def total_influence(spec: GgcSpectrum) -> BandInfluence:
    return band_influence(spec, float(spec.freqs[0]), float(spec.freqs[-1]))


def band_peak_frequency(
    spec: GgcSpectrum, f_lo: float, f_hi: float, direction: Direction = Direction.A_TO_B
) -> float:
    """Grid frequency of the largest value of one direction inside [f_lo, f_hi]."""
    inside = (spec.freqs >= f_lo - 1e-9) & (spec.freqs <= f_hi + 1e-9)
    if not inside.any():
        raise InvalidBandError(f"band [{f_lo}, {f_hi}] holds no grid frequency")
    curve = spec.curve(direction)
    index = np.flatnonzero(inside)[int(np.argmax(curve[inside]))]
    return float(spec.freqs[index])


class RoleSwapInfluence(BaseModel):
    """Total influence of the two partners before and after they exchange roles.

    The holder is the participant who carries the reference role in the initial trials.
    """

    model_config = ConfigDict(frozen=True)

    holder_as_reference: float
    holder_as_other: float
    partner_as_other: float
    partner_as_reference: float


def role_swap_influence(initial: GgcSpectrum, swapped: GgcSpectrum, reference: Direction) -> RoleSwapInfluence:
    """``reference`` is the initial direction whose source holds the reference role; both spectra keep
    participant A on channel 0."""
    holder_first = initial if reference is Direction.A_TO_B else initial.swapped()
    holder_after = swapped if reference is Direction.A_TO_B else swapped.swapped()
    before = total_influence(holder_first)
    after = total_influence(holder_after)
    return RoleSwapInfluence(
        holder_as_reference=before.integral_ab,
        holder_as_other=after.integral_ab,
        partner_as_other=before.integral_ba,
        partner_as_reference=after.integral_ba,
    )


def first_peak_frequency(freqs: np.ndarray, curve: np.ndarray, start_hz: float = PEAK_SEARCH_START_HZ) -> float:
    """First local maximum above ``start_hz`` whose prominence is at least 10% of the curve's maximum."""
    peak_height = float(np.max(curve)) if curve.size else 0.0
    if peak_height <= 0:
        raise MissingPeakError("causality curve is identically zero")
    peaks, _ = find_peaks(curve, prominence=PEAK_PROMINENCE_FRACTION * peak_height)
    peaks = peaks[freqs[peaks] > start_hz]
    if peaks.size == 0:
        raise MissingPeakError(f"no prominent peak above {start_hz} Hz")
    return float(freqs[peaks[0]])


def designated_direction(spec: GgcSpectrum, role: Optional[Direction] = None) -> Direction:
    """The role label when given, otherwise the direction with the larger total influence."""
    if role is not None:
        return role
    total = total_influence(spec)
    return Direction.A_TO_B if total.integral_ab >= total.integral_ba else Direction.B_TO_A


def band_boundaries(
    spectra: Sequence[GgcSpectrum],
    roles: Sequence[Optional[Direction]],
    threshold: "NullThreshold",
) -> BandBoundaries:
    """f1 from the spread of every participant's first influence peak, f2 from where the
    designated-direction ensemble (mean + 3 std) drops under the null threshold."""
    if len(spectra) < 2:
        raise InsufficientSamplesError(f"band boundaries need at least 2 dyads, got {len(spectra)}")
    if len(roles) != len(spectra):
        raise ConfigError("one role entry is needed per dyad")
    freqs = spectra[0].freqs
    for spec in spectra:
        if spec.freqs.shape != freqs.shape or not np.allclose(spec.freqs, freqs):
            raise GridMismatchError("all dyad spectra must share one frequency grid")
    if threshold.freqs.shape != freqs.shape or not np.allclose(threshold.freqs, freqs):
        raise GridMismatchError("threshold grid does not match the spectra grid")

    first_peaks: List[float] = []
    for index, spec in enumerate(spectra):
        for direction in Direction:
            try:
                first_peaks.append(first_peak_frequency(freqs, spec.curve(direction)))
            except MissingPeakError as exc:
                logger.warning("Dyad %d %s excluded from f1: %s", index, direction.value, exc)
    if len(first_peaks) < 2:
        raise MissingPeakError(f"only {len(first_peaks)} participant peaks found; f1 needs at least 2")
    peaks = np.asarray(first_peaks)
    f1 = float(peaks.mean() + 3.0 * peaks.std(ddof=1))
    nyquist = float(freqs[-1])
    if not f1 < nyquist:
        raise InvalidBandError(f"f1 = {f1:.3f} Hz is not below the top of the grid ({nyquist} Hz)")

    designated = np.vstack(
        [spec.curve(designated_direction(spec, role)) for spec, role in zip(spectra, roles)]
    )
    upper = designated.mean(axis=0) + 3.0 * designated.std(axis=0, ddof=1)
    below = upper < threshold.q99
    for index in np.flatnonzero(freqs > f1):
        run = below[index : index + BELOW_THRESHOLD_BINS]
        if run.size == BELOW_THRESHOLD_BINS and np.all(run):
            return BandBoundaries(f1=f1, f2=float(freqs[index]), first_peaks=tuple(first_peaks))
    logger.warning("Designated curves never stay below the null threshold above f1; using f2 = %.3f Hz", nyquist)
    return BandBoundaries(f1=f1, f2=nyquist, first_peaks=tuple(first_peaks), f2_from_threshold=False)


class EstimationMethod(str, Enum):
    PARAMETRIC = "parametric"
    NONPARAMETRIC = "nonparametric"


class GgcEstimator(BaseModel):
    """Epochs in, causality spectrum out; shared by observed dyads and surrogate pairs."""

    model_config = ConfigDict(frozen=True)

    method: EstimationMethod = EstimationMethod.PARAMETRIC
    order: Optional[int] = Field(default=None, ge=1)
    p_max: int = Field(default=DEFAULT_P_MAX, ge=1)
    freq_step: float = Field(default=DEFAULT_FREQ_STEP_HZ, gt=0)
    f_max: Optional[float] = Field(default=None, gt=0)
    time_bandwidth: float = Field(default=2.0, gt=0)

    def resolve_order(self, epochs: Sequence[BivariateEpoch]) -> int:
        return self.order if self.order is not None else select_order(epochs, self.p_max)

    def with_order(self, order: int) -> "GgcEstimator":
        return self.model_copy(update={"order": order})

    def grid(self, fs: float) -> np.ndarray:
        return frequency_grid(fs, self.freq_step, self.f_max)

    def decompose(self, epochs: Sequence[BivariateEpoch]) -> Tuple[SpectralDecomposition, Optional[int]]:
        if not epochs:
            raise InsufficientSamplesError("no epochs to analyse")
        fs = epochs[0].fs
        if self.method is EstimationMethod.PARAMETRIC:
            order = self.resolve_order(epochs)
            model = fit_stable_var(epochs, order)
            return spectral_matrix(model, self.grid(fs)), model.order
        full_grid = frequency_grid(fs, self.freq_step)
        factor = wilson_factorize(full_grid, cross_spectral_density(epochs, full_grid, self.time_bandwidth), fs)
        keep = full_grid <= self.grid(fs)[-1] + 1e-9
        return (
            SpectralDecomposition(freqs=full_grid[keep], H=factor.H[keep], S=factor.S[keep], Sigma=factor.Sigma),
            None,
        )

    def estimate(self, epochs: Sequence[BivariateEpoch]) -> GgcSpectrum:
        decomp, order = self.decompose(epochs)
        return ggc_spectrum(decomp, order=order)


def summarize_bands(
    spec: GgcSpectrum, boundaries: BandBoundaries, sub_bands: Optional[Sequence[Tuple[float, float]]] = None
) -> Dict[str, BandInfluence]:
    """Named band integrals: ``low``, ``high``, ``total`` and one ``sub_<lo>_<hi>`` entry per sub-band."""
    low, high = delta_influence(spec, boundaries)
    summary = {"low": low, "high": high, "total": total_influence(spec)}
    for band in sub_band_influences(spec, sub_bands if sub_bands is not None else default_sub_bands(boundaries)):
        summary[f"sub_{band.band[0]:g}_{band.band[1]:g}"] = band
    return summary
