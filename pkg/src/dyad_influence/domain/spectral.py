"""Bivariate autoregressive modelling and spectral quantities.

Conventions: ``S(f) = H(f) Sigma H(f)^H`` with no sampling-rate factor, so the
process covariance equals ``(1/fs) * integral of S over [-fs/2, fs/2]``.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, model_validator
from scipy.signal.windows import dpss

from dyad_influence.domain.errors import (
    ConfigError,
    GridMismatchError,
    InsufficientSamplesError,
    InvalidSpectrumError,
    NoConvergenceError,
    NonInvertibleError,
    RankDeficientError,
    UnstableModelError,
)
from dyad_influence.domain.signals import ArrayModel, BivariateEpoch, ComplexArray, FloatArray

logger = logging.getLogger(__name__)

DEFAULT_FREQ_STEP_HZ = 0.05
DEFAULT_P_MAX = 20
MIN_EXTRA_SAMPLES = 10
WILSON_TOL = 1e-8
WILSON_MAX_ITER = 500
CONDITION_LIMIT = 1e12


class VarModel(ArrayModel):
    """Fitted model x_t = sum_k A_k x_{t-k} + e_t with innovation covariance Sigma."""

    order: int = Field(ge=1)
    A: FloatArray
    Sigma: FloatArray
    fs: float = Field(gt=0)
    n_obs: int = Field(ge=0)

    @model_validator(mode="after")
    def validate_shapes(self) -> "VarModel":
        if self.A.shape != (self.order, 2, 2):
            raise ValueError(f"expected {self.order} lag matrices of shape 2x2, got {self.A.shape}")
        if self.Sigma.shape != (2, 2):
            raise ValueError("innovation covariance must be 2x2")
        if not np.allclose(self.Sigma, self.Sigma.T, rtol=1e-10, atol=1e-14):
            raise ValueError("innovation covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(self.Sigma)) <= 0:
            raise ValueError("innovation covariance must be positive definite")
        return self

    def companion(self) -> np.ndarray:
        p = self.order
        matrix = np.zeros((2 * p, 2 * p))
        matrix[:2, :] = np.hstack(list(self.A))
        if p > 1:
            matrix[2:, :-2] = np.eye(2 * (p - 1))
        return matrix

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    @property
    def is_stable(self) -> bool:
        return self.spectral_radius() < 1.0

    def ensure_stable(self) -> "VarModel":
        radius = self.spectral_radius()
        if radius >= 1.0:
            raise UnstableModelError(f"VAR({self.order}) fit is unstable (spectral radius {radius:.4f})")
        return self

    def simulate(self, n_samples: int, rng: np.random.Generator, burn_in: int = 500) -> np.ndarray:
        """Draw a realisation with Gaussian innovations; used by tests and the simulator."""
        chol = np.linalg.cholesky(self.Sigma)
        total = n_samples + burn_in
        noise = rng.standard_normal((total, 2)) @ chol.T
        series = np.zeros((total, 2))
        for t in range(total):
            value = noise[t].copy()
            for k in range(1, min(self.order, t) + 1):
                value += self.A[k - 1] @ series[t - k]
            series[t] = value
        return series[burn_in:]


class SpectralDecomposition(ArrayModel):
    freqs: FloatArray
    H: ComplexArray
    S: ComplexArray
    Sigma: FloatArray

    @model_validator(mode="after")
    def validate_spectra(self) -> "SpectralDecomposition":
        n = self.freqs.size
        if self.H.shape != (n, 2, 2) or self.S.shape != (n, 2, 2):
            raise ValueError("transfer and spectral matrices must have shape (n_freqs, 2, 2)")
        if not np.allclose(self.S, np.conj(np.swapaxes(self.S, 1, 2)), rtol=1e-9, atol=1e-12):
            raise ValueError("spectral matrices must be Hermitian")
        return self

    @property
    def fs(self) -> float:
        return 2.0 * float(self.freqs[-1])


def frequency_grid(fs: float, step: float = DEFAULT_FREQ_STEP_HZ, f_max: Optional[float] = None) -> np.ndarray:
    """Uniform grid from 0 to ``f_max`` (default Nyquist) inclusive."""
    f_max = fs / 2.0 if f_max is None else f_max
    if step <= 0 or f_max <= 0 or f_max > fs / 2.0 + 1e-12:
        raise ConfigError(f"invalid frequency grid: step={step}, f_max={f_max}, fs={fs}")
    n_steps = int(round(f_max / step))
    if not math.isclose(n_steps * step, f_max, rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigError(f"grid step {step} Hz does not divide {f_max} Hz")
    return np.linspace(0.0, f_max, n_steps + 1)


def _ordered_series(epochs: Sequence[BivariateEpoch]) -> List[np.ndarray]:
    ordered = sorted(epochs, key=lambda e: (e.parent_trial, e.window_index, e.samples.tobytes()))
    return [epoch.samples - epoch.samples.mean(axis=0) for epoch in ordered]


def lag_matrix(series: np.ndarray, p: int, start: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Targets ``x[start:]`` and regressors ``[x_{t-1}, ..., x_{t-p}]`` for one series of shape (n, d)."""
    start = p if start is None else start
    n = series.shape[0]
    targets = series[start:]
    regressors = np.hstack([series[start - k : n - k] for k in range(1, p + 1)])
    return targets, regressors


def _pooled_design(series: Sequence[np.ndarray], p: int, start: int) -> Tuple[np.ndarray, np.ndarray]:
    blocks = [lag_matrix(x, p, start) for x in series]
    return np.vstack([b[0] for b in blocks]), np.vstack([b[1] for b in blocks])


def _check_epochs(epochs: Sequence[BivariateEpoch], p: int) -> None:
    if not epochs:
        raise InsufficientSamplesError("at least one epoch is required")
    lengths = {len(epoch) for epoch in epochs}
    if len(lengths) != 1:
        raise InsufficientSamplesError(f"epochs must share one length, got {sorted(lengths)}")
    length = lengths.pop()
    if length <= p + MIN_EXTRA_SAMPLES:
        raise InsufficientSamplesError(
            f"epochs of {length} samples are too short for order {p} (need > {p + MIN_EXTRA_SAMPLES})"
        )


def _least_squares(targets: np.ndarray, regressors: np.ndarray) -> np.ndarray:
    coefficients, _, rank, _ = np.linalg.lstsq(regressors, targets, rcond=None)
    if rank < regressors.shape[1]:
        raise RankDeficientError(f"regressor matrix has rank {rank} < {regressors.shape[1]}")
    return coefficients


def fit_var(epochs: Sequence[BivariateEpoch], p: int) -> VarModel:
    """Pooled multi-epoch least-squares fit; lags never cross epoch boundaries.

    Each epoch is demeaned first. Epochs are stacked in (trial, window) order so the
    result does not depend on the order they are passed in.
    """
    if p < 1:
        raise ConfigError(f"model order must be >= 1, got {p}")
    _check_epochs(epochs, p)
    targets, regressors = _pooled_design(_ordered_series(epochs), p, p)
    coefficients = _least_squares(targets, regressors)
    residuals = targets - regressors @ coefficients
    n_obs = targets.shape[0]
    sigma = residuals.T @ residuals / (n_obs - 2 * p)
    sigma = 0.5 * (sigma + sigma.T)
    lags = np.stack([coefficients[2 * k : 2 * k + 2, :].T for k in range(p)])
    model = VarModel(order=p, A=lags, Sigma=sigma, fs=epochs[0].fs, n_obs=n_obs)
    if not model.is_stable:
        logger.debug("VAR(%d) fit on %d epochs is unstable (radius %.4f)", p, len(epochs), model.spectral_radius())
    return model


def fit_stable_var(epochs: Sequence[BivariateEpoch], p: int) -> VarModel:
    """Fit at order ``p``, stepping the order down until the companion matrix is stable.

    Raises :class:`UnstableModelError` when no order from ``p`` down to 1 gives a stable fit.
    """
    radius = float("nan")
    for order in range(p, 0, -1):
        model = fit_var(epochs, order)
        if model.is_stable:
            if order < p:
                logger.info("VAR(%d) is unstable (radius %.5f); using VAR(%d)", p, radius, order)
            return model
        if order == p:
            radius = model.spectral_radius()
    raise UnstableModelError(f"no stable VAR fit at any order up to {p} (radius {radius:.4f} at order {p})")


def information_criteria(epochs: Sequence[BivariateEpoch], p_max: int) -> np.ndarray:
    """AIC for p = 1..p_max on identical effective samples (first p_max samples of each epoch skipped)."""
    if p_max < 1:
        raise ConfigError(f"p_max must be >= 1, got {p_max}")
    _check_epochs(epochs, p_max)
    series = _ordered_series(epochs)
    scores = np.empty(p_max)
    for p in range(1, p_max + 1):
        targets, regressors = _pooled_design(series, p, p_max)
        residuals = targets - regressors @ _least_squares(targets, regressors)
        n_obs = targets.shape[0]
        _, log_det = np.linalg.slogdet(residuals.T @ residuals / n_obs)
        scores[p - 1] = n_obs * log_det + 2.0 * (4 * p)
    return scores


def select_order(epochs: Sequence[BivariateEpoch], p_max: int = DEFAULT_P_MAX) -> int:
    scores = information_criteria(epochs, p_max)
    order = int(np.argmin(scores)) + 1
    logger.debug("AIC selected order %d of %d", order, p_max)
    return order


def transfer_function(model: VarModel, freqs: np.ndarray) -> np.ndarray:
    """H(f) = (I - sum_k A_k exp(-i 2 pi f k / fs))^-1 for each frequency; shape (n_freqs, 2, 2)."""
    freqs = np.asarray(freqs, dtype=float)
    lags = np.arange(1, model.order + 1)
    phase = np.exp(-2j * np.pi * np.outer(freqs, lags) / model.fs)
    system = np.eye(2)[None, :, :] - np.einsum("fk,kij->fij", phase, model.A)
    conditions = np.linalg.cond(system)
    bad = np.flatnonzero(~np.isfinite(conditions) | (conditions > CONDITION_LIMIT))
    if bad.size:
        raise NonInvertibleError(f"I - A(f) is singular at {freqs[bad[0]]:.3f} Hz")
    return np.linalg.inv(system)


def _hermitian(matrices: np.ndarray) -> np.ndarray:
    symmetric = 0.5 * (matrices + np.conj(np.swapaxes(matrices, -1, -2)))
    diagonal = np.arange(matrices.shape[-1])
    symmetric[..., diagonal, diagonal] = symmetric[..., diagonal, diagonal].real
    return symmetric


def spectral_matrix(model: VarModel, freqs: np.ndarray) -> SpectralDecomposition:
    H = transfer_function(model, freqs)
    S = _hermitian(H @ model.Sigma @ np.conj(np.swapaxes(H, 1, 2)))
    return SpectralDecomposition(freqs=freqs, H=H, S=S, Sigma=model.Sigma)


def _check_one_sided_grid(freqs: np.ndarray, fs: float) -> None:
    if freqs.size < 3 or freqs[0] != 0.0:
        raise GridMismatchError("spectral grid must start at 0 Hz and hold at least 3 bins")
    steps = np.diff(freqs)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise GridMismatchError("spectral grid must be uniform")
    if not math.isclose(freqs[-1], fs / 2.0, rel_tol=1e-9):
        raise GridMismatchError(f"spectral grid must end at Nyquist ({fs / 2.0} Hz), ends at {freqs[-1]}")


def _causal_part(g: np.ndarray) -> np.ndarray:
    """Keep non-negative lags: half the lag-0 diagonal, its upper triangle, and lags up to N/2."""
    n_fft = g.shape[0]
    coefficients = np.fft.ifft(g, axis=0)
    lag0 = coefficients[0]
    coefficients[0] = np.triu(lag0, 1) + 0.5 * np.diag(np.diag(lag0))
    coefficients[n_fft // 2 + 1 :] = 0.0
    return np.fft.fft(coefficients, axis=0)


def wilson_factorize(
    freqs: np.ndarray,
    S: np.ndarray,
    fs: float,
    tol: float = WILSON_TOL,
    max_iter: int = WILSON_MAX_ITER,
) -> SpectralDecomposition:
    """Minimum-phase factorisation S = H Sigma H^H by Wilson's iteration.

    ``S`` covers the one-sided grid ``freqs`` from 0 Hz to Nyquist; the two-sided
    spectrum is rebuilt by Hermitian symmetry.
    """
    freqs = np.asarray(freqs, dtype=float)
    S = np.asarray(S, dtype=complex)
    _check_one_sided_grid(freqs, fs)
    if S.shape != (freqs.size, 2, 2):
        raise GridMismatchError(f"spectral matrices of shape {S.shape} do not match {freqs.size} bins")
    S = _hermitian(S)
    eigenvalues = np.linalg.eigvalsh(S)
    if np.min(eigenvalues) <= 0:
        worst = int(np.argmin(eigenvalues.min(axis=1)))
        raise InvalidSpectrumError(f"spectral matrix is not positive definite at {freqs[worst]:.3f} Hz")

    full = np.concatenate([S, np.conj(S[-2:0:-1])], axis=0)
    gamma0 = np.fft.ifft(full, axis=0)[0].real
    psi = np.repeat(np.linalg.cholesky(gamma0).T[None, :, :], full.shape[0], axis=0).astype(complex)
    identity = np.eye(2)

    for iteration in range(1, max_iter + 1):
        psi_inv = np.linalg.inv(psi)
        g = psi_inv @ full @ np.conj(np.swapaxes(psi_inv, 1, 2)) + identity
        updated = psi @ _causal_part(g)
        change = np.max(np.abs(updated - psi)) / np.max(np.abs(updated))
        psi = updated
        if change < tol:
            logger.debug("Wilson factorisation converged after %d iterations", iteration)
            break
    else:
        raise NoConvergenceError(f"Wilson factorisation did not converge in {max_iter} iterations")

    a0 = np.fft.ifft(psi, axis=0)[0]
    sigma = (a0 @ np.conj(a0.T)).real
    sigma = 0.5 * (sigma + sigma.T)
    H = (psi @ np.linalg.inv(a0))[: freqs.size]
    rebuilt = H @ sigma @ np.conj(np.swapaxes(H, 1, 2))
    residual = np.max(np.abs(rebuilt - S)) / np.max(np.abs(S))
    if residual > 1e-6:
        raise NoConvergenceError(f"Wilson factorisation residual {residual:.2e} exceeds 1e-6")
    return SpectralDecomposition(freqs=freqs, H=H, S=S, Sigma=sigma)


def cross_spectral_density(
    epochs: Sequence[BivariateEpoch],
    freqs: np.ndarray,
    time_bandwidth: float = 2.0,
) -> np.ndarray:
    """Multitaper cross-spectral matrices averaged over tapers and epochs.

    Uses the same normalisation as ``spectral_matrix`` so both feed the same
    causality formula.
    """
    freqs = np.asarray(freqs, dtype=float)
    if not epochs:
        raise InsufficientSamplesError("at least one epoch is required")
    fs = epochs[0].fs
    _check_one_sided_grid(freqs, fs)
    n_fft = int(round(fs / (freqs[1] - freqs[0])))
    length = len(epochs[0])
    if any(len(epoch) != length for epoch in epochs):
        raise InsufficientSamplesError("epochs must share one length")
    if length > n_fft:
        raise GridMismatchError(f"grid step {freqs[1] - freqs[0]} Hz is coarser than the epoch resolution")
    n_tapers = max(1, int(2 * time_bandwidth) - 1)
    tapers = np.atleast_2d(dpss(length, time_bandwidth, Kmax=n_tapers))
    tapers = tapers / np.sqrt(np.sum(tapers**2, axis=1, keepdims=True))

    total = np.zeros((freqs.size, 2, 2), dtype=complex)
    for series in _ordered_series(epochs):
        spectra = np.fft.rfft(tapers[:, :, None] * series[None, :, :], n=n_fft, axis=1)[:, : freqs.size]
        total += np.einsum("kfi,kfj->fij", spectra, np.conj(spectra))
    return _hermitian(total / (len(epochs) * tapers.shape[0]))
