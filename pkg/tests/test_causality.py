import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from dyad_influence.domain.causality import (
    BandBoundaries,
    Direction,
    EstimationMethod,
    GgcEstimator,
    GgcSpectrum,
    band_boundaries,
    band_integral,
    default_sub_bands,
    delta_influence,
    designated_direction,
    first_peak_frequency,
    ggc_spectrum,
    sub_band_influences,
    summarize_bands,
    total_influence,
)
from dyad_influence.domain.errors import InsufficientSamplesError, InvalidBandError, MissingPeakError
from dyad_influence.domain import spectral
from dyad_influence.domain.signals import BivariateEpoch
from dyad_influence.domain.simulation import time_domain_gc_oracle
from dyad_influence.domain.spectral import VarModel, fit_var, frequency_grid, spectral_matrix, wilson_factorize
from dyad_influence.domain.surrogate import NullThreshold

FS = 25.0
FREQS = frequency_grid(FS, 0.05)


def var_model(A, sigma=None) -> VarModel:
    A = np.asarray(A, dtype=float)
    return VarModel(order=A.shape[0], A=A, Sigma=np.eye(2) if sigma is None else sigma, fs=FS, n_obs=0)


def epochs_from(series: np.ndarray, n_epochs: int) -> list:
    width = series.shape[0] // n_epochs
    return [
        BivariateEpoch(samples=series[k * width : (k + 1) * width], fs=FS, parent_trial="t", window_index=k)
        for k in range(n_epochs)
    ]


def spectrum(I_ab, I_ba=None, freqs=FREQS) -> GgcSpectrum:
    I_ab = np.broadcast_to(np.asarray(I_ab, dtype=float), freqs.shape)
    I_ba = I_ab if I_ba is None else np.broadcast_to(np.asarray(I_ba, dtype=float), freqs.shape)
    return GgcSpectrum(freqs=freqs, I_ab=I_ab, I_ba=I_ba)


def bump(center: float, width: float = 0.05) -> np.ndarray:
    return np.exp(-((FREQS - center) ** 2) / (2 * width**2))


COUPLED = var_model([[[0.5, 0.0], [0.4, 0.5]]])


def test_independent_channels_have_no_influence():
    model = var_model([[[0.5, 0.0], [0.0, -0.3]]], np.diag([1.0, 2.0]))
    spec = ggc_spectrum(spectral_matrix(model, FREQS))
    assert np.max(spec.I_ab) < 1e-12
    assert np.max(spec.I_ba) < 1e-12


def test_unidirectional_model_has_one_sided_influence():
    spec = ggc_spectrum(spectral_matrix(COUPLED, FREQS))
    assert np.max(spec.I_ba) < 1e-12
    assert np.max(spec.I_ab) > 0.0
    assert np.all(spec.I_ab >= 0.0)


def test_frequency_integral_matches_time_domain_causality():
    series = COUPLED.simulate(100000, np.random.default_rng(42))
    model = fit_var(epochs_from(series, 1), 1)
    spec = ggc_spectrum(spectral_matrix(model, FREQS))
    integrated_ab = 2.0 / FS * trapezoid(spec.I_ab, FREQS)
    integrated_ba = 2.0 / FS * trapezoid(spec.I_ba, FREQS)
    oracle_ab, oracle_ba = time_domain_gc_oracle(series[:, 0], series[:, 1], 20)
    assert integrated_ab == pytest.approx(oracle_ab, rel=0.02)
    assert abs(integrated_ba - oracle_ba) < 0.02 * oracle_ab


def test_channel_swap_swaps_directions():
    series = COUPLED.simulate(6000, np.random.default_rng(3))
    epochs = epochs_from(series, 6)
    estimator = GgcEstimator(order=2)
    forward = estimator.estimate(epochs)
    backward = estimator.estimate([epoch.swapped() for epoch in epochs])
    assert np.allclose(forward.I_ab, backward.I_ba, atol=1e-10)
    assert np.allclose(forward.I_ba, backward.I_ab, atol=1e-10)


def test_rescaling_forces_leaves_spectrum_unchanged():
    series = COUPLED.simulate(6000, np.random.default_rng(4))
    estimator = GgcEstimator(order=2)
    base = estimator.estimate(epochs_from(series, 6))
    scaled = estimator.estimate(epochs_from(series * 1000.0, 6))
    assert np.max(np.abs(base.I_ab - scaled.I_ab)) <= 1e-8
    assert np.max(np.abs(base.I_ba - scaled.I_ba)) <= 1e-8


def test_parametric_and_nonparametric_paths_agree_on_exact_spectrum():
    model = var_model([[[0.5, 0.0], [0.4, 0.3]], [[-0.3, 0.0], [0.2, -0.2]]])
    exact = spectral_matrix(model, FREQS)
    parametric = ggc_spectrum(exact)
    nonparametric = ggc_spectrum(wilson_factorize(FREQS, exact.S, FS))
    assert np.max(np.abs(parametric.I_ab - nonparametric.I_ab)) <= 1e-4 * np.max(parametric.I_ab)


def test_parametric_and_nonparametric_paths_agree_on_data():
    model = var_model([[[0.5, 0.0], [0.4, 0.3]], [[-0.3, 0.0], [0.2, -0.2]]])
    series = model.simulate(400 * 500, np.random.default_rng(12))
    epochs = epochs_from(series, 400)
    parametric = GgcEstimator(order=2).estimate(epochs)
    nonparametric = GgcEstimator(method=EstimationMethod.NONPARAMETRIC, time_bandwidth=4.0).estimate(epochs)
    assert nonparametric.order is None
    peak = np.max(parametric.I_ab)
    assert np.max(np.abs(parametric.I_ab - nonparametric.I_ab)) <= 0.05 * peak
    assert np.max(np.abs(parametric.I_ba - nonparametric.I_ba)) <= 0.05 * peak


def test_estimator_truncates_grid_and_reports_order():
    series = COUPLED.simulate(3000, np.random.default_rng(5))
    spec = GgcEstimator(order=1, f_max=10.0).estimate(epochs_from(series, 6))
    assert spec.freqs[-1] == pytest.approx(10.0)
    assert spec.order == 1
    nonparametric = GgcEstimator(method=EstimationMethod.NONPARAMETRIC, f_max=10.0).estimate(epochs_from(series, 6))
    assert nonparametric.freqs[-1] == pytest.approx(10.0)


def test_estimator_falls_back_to_a_stable_order(monkeypatch):
    fit = spectral.fit_var

    def unstable_above_two(epochs, p):
        model = fit(epochs, p)
        if p <= 2:
            return model
        A = np.zeros((p, 2, 2))
        A[0] = np.eye(2)
        return VarModel(order=p, A=A, Sigma=model.Sigma, fs=model.fs, n_obs=model.n_obs)

    monkeypatch.setattr(spectral, "fit_var", unstable_above_two)
    series = COUPLED.simulate(3000, np.random.default_rng(5))
    spec = GgcEstimator(order=5).estimate(epochs_from(series, 6))
    assert spec.order == 2
    assert spec.I_ab.max() > spec.I_ba.max()


def test_estimator_without_epochs_fails():
    with pytest.raises(InsufficientSamplesError):
        GgcEstimator().estimate([])


def test_band_integral_of_constant_and_linear_curves():
    assert band_integral(spectrum(0.3), 2.0, 7.0) == pytest.approx(1.5)
    linear = spectrum(FREQS * 0.1)
    assert band_integral(linear, 2.0, 7.0) == pytest.approx(0.05 * (49.0 - 4.0))
    # edges off the grid are interpolated
    assert band_integral(linear, 2.02, 6.97) == pytest.approx(0.05 * (6.97**2 - 2.02**2))


def test_band_integral_converges_under_grid_refinement():
    series = COUPLED.simulate(6000, np.random.default_rng(6))
    epochs = epochs_from(series, 6)
    coarse = GgcEstimator(order=2, freq_step=0.1).estimate(epochs)
    fine = GgcEstimator(order=2, freq_step=0.05).estimate(epochs)
    assert band_integral(fine, 2.15, 7.0) == pytest.approx(band_integral(coarse, 2.15, 7.0), rel=0.005)


def test_band_integral_rejects_empty_and_outside_bands():
    spec = spectrum(0.1)
    with pytest.raises(InvalidBandError):
        band_integral(spec, 5.0, 5.0)
    with pytest.raises(InvalidBandError):
        band_integral(spec, 2.0, 20.0)


def test_delta_influence_of_symmetric_and_offset_spectra():
    boundaries = BandBoundaries(f1=2.15, f2=7.0)
    symmetric = delta_influence(spectrum(0.2), boundaries)
    assert [band.delta for band in symmetric] == [pytest.approx(0.0), pytest.approx(0.0)]
    offset = delta_influence(spectrum(0.3, 0.2), boundaries)
    assert offset[1].band == (2.15, 7.0)
    assert offset[1].delta == pytest.approx(0.1 * (7.0 - 2.15))


def test_designated_direction_prefers_role_then_total():
    spec = spectrum(0.1, 0.2)
    assert designated_direction(spec) is Direction.B_TO_A
    assert designated_direction(spec, Direction.A_TO_B) is Direction.A_TO_B
    assert total_influence(spec).delta == pytest.approx(-0.1 * 12.5)


def test_first_peak_skips_slow_edge_and_small_ripples():
    curve = bump(0.05) + 0.8 * bump(0.9) + 0.02 * bump(0.5) + bump(3.0)
    assert first_peak_frequency(FREQS, curve) == pytest.approx(0.9)
    with pytest.raises(MissingPeakError):
        first_peak_frequency(FREQS, np.zeros_like(FREQS))


def plateau_ensemble(peaks, edge: float = 5.975):
    plateau = 0.3 * ((FREQS >= 0.3) & (FREQS < edge))
    return [spectrum(bump(p) + plateau, bump(p)) for p in peaks]


def test_band_boundaries_closed_form_f1_and_threshold_f2():
    spectra = plateau_ensemble([0.6, 0.7, 0.8])
    threshold = NullThreshold(freqs=FREQS, q99=np.full(FREQS.shape, 0.1), n_perm=10, seed=0)
    roles = [Direction.A_TO_B] * 3
    boundaries = band_boundaries(spectra, roles, threshold)
    planted = np.array([0.6, 0.6, 0.7, 0.7, 0.8, 0.8])
    assert boundaries.f1 == pytest.approx(planted.mean() + 3.0 * planted.std(ddof=1))
    assert boundaries.f2 == pytest.approx(6.0)
    assert boundaries.f2_from_threshold
    assert len(boundaries.first_peaks) == 6


def test_band_boundaries_fall_back_to_nyquist():
    spectra = plateau_ensemble([0.6, 0.7, 0.8])
    threshold = NullThreshold(freqs=FREQS, q99=np.zeros(FREQS.shape), n_perm=10, seed=0)
    boundaries = band_boundaries(spectra, [None] * 3, threshold)
    assert boundaries.f2 == pytest.approx(12.5)
    assert not boundaries.f2_from_threshold


def test_band_boundaries_skip_participants_without_peak():
    spectra = plateau_ensemble([0.6, 0.8])
    spectra.append(spectrum(0.0))
    threshold = NullThreshold(freqs=FREQS, q99=np.full(FREQS.shape, 0.1), n_perm=10, seed=0)
    boundaries = band_boundaries(spectra, [Direction.A_TO_B] * 3, threshold)
    planted = np.array([0.6, 0.6, 0.8, 0.8])
    assert boundaries.f1 == pytest.approx(planted.mean() + 3.0 * planted.std(ddof=1))


def test_band_boundaries_need_two_dyads():
    threshold = NullThreshold(freqs=FREQS, q99=np.zeros(FREQS.shape), n_perm=1, seed=0)
    with pytest.raises(InsufficientSamplesError):
        band_boundaries(plateau_ensemble([0.6]), [None], threshold)


def test_summary_names_bands_and_sub_bands():
    boundaries = BandBoundaries(f1=2.15, f2=7.0)
    assert default_sub_bands(boundaries) == [(2.15, 4.0), (4.0, 6.0), (6.0, 7.0)]
    summary = summarize_bands(spectrum(0.2, 0.1), boundaries)
    assert sorted(summary) == ["high", "low", "sub_2.15_4", "sub_4_6", "sub_6_7", "total"]
    assert summary["low"].integral_ab == pytest.approx(0.2 * 2.15)
    parts = sum(summary[name].delta for name in ("sub_2.15_4", "sub_4_6", "sub_6_7"))
    assert parts == pytest.approx(summary["high"].delta)


def test_curve_validation_rejects_negative_values():
    with pytest.raises(ValueError):
        GgcSpectrum(freqs=FREQS, I_ab=-np.ones(FREQS.shape), I_ba=np.zeros(FREQS.shape))
    assert math.isclose(spectrum(0.1).swapped().I_ab[0], 0.1)


def test_sub_band_influences_integrate_each_band():
    spec = GgcSpectrum(freqs=FREQS, I_ab=np.full(FREQS.shape, 0.4), I_ba=np.full(FREQS.shape, 0.1))
    low, high = sub_band_influences(spec, [(2.0, 4.0), (4.0, 6.5)])
    assert low.band == (2.0, 4.0)
    assert low.delta == pytest.approx(0.6)
    assert high.integral_ab == pytest.approx(1.0)
