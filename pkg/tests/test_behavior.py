import math

import numpy as np
import pytest

from dyad_influence.domain.behavior import (
    DyadErrors,
    Reversal,
    dyad_errors,
    exclusion_filter,
    force_summaries,
    position_errors,
    reversal_points,
    synchronization_errors,
    trial_errors,
)
from dyad_influence.domain.errors import NoDataError
from dyad_influence.domain.forces import MassConfig, reconstruct_forces
from dyad_influence.domain.signals import Channel
from dyad_influence.domain.trials import Condition, TrialRecord

FS = 500.0
PERIOD = 0.5
DISTANCE = 0.3
MASSES = MassConfig(M=16.5, m1=2.0, m2=2.0)


def swinging_trial(amplitude: float = DISTANCE / 2, dyad_id: str = "d01", beats=None) -> TrialRecord:
    """Cosine movement reversing exactly every metronome period."""
    t = np.arange(int(5.0 * FS)) / FS
    position = Channel(samples=amplitude * np.cos(math.pi * t / PERIOD), fs=FS, label="pos")
    flat = Channel(samples=np.zeros(t.size), fs=FS)
    return TrialRecord(
        dyad_id=dyad_id,
        trial_id="t01",
        position=position,
        S1=flat,
        S2=flat,
        beats=np.array([] if beats is None else beats, dtype=float),
        condition=Condition(target_distance=DISTANCE, metronome_period=PERIOD),
        masses=MASSES,
    )


def alternating(magnitude: float, n: int = 10) -> tuple:
    return tuple(magnitude * (-1.0) ** k for k in range(n))


def test_reversals_of_cosine_sit_on_each_period():
    reversals = reversal_points(swinging_trial().position)
    times = np.array([r.time for r in reversals])
    assert np.allclose(times, PERIOD * np.arange(1, times.size + 1))
    assert np.allclose(np.abs([r.position for r in reversals]), DISTANCE / 2)


def test_position_error_hand_example():
    errors = position_errors([Reversal(0.0, 0.16), Reversal(0.5, -0.13)], (-0.15, 0.15), 0.3)
    assert errors == pytest.approx([100 * 0.01 / 0.3, 100 * 0.02 / 0.3])
    with pytest.raises(NoDataError):
        position_errors([], (-0.15, 0.15), 0.3)


def test_synchronization_error_hand_example():
    assert synchronization_errors([0.0, 0.55, 1.05], 0.5) == pytest.approx([10.0, 0.0])
    assert synchronization_errors([0.0, 0.55, 1.05, 1.5], 0.5, first_beat=0.5) == pytest.approx([0.0, -10.0])
    with pytest.raises(NoDataError):
        synchronization_errors([0.0, 0.55], 0.5, first_beat=0.5)


def test_perfect_movement_has_zero_errors():
    pe, se = trial_errors(swinging_trial())
    assert np.allclose(pe, 0.0, atol=1e-9)
    assert np.allclose(se, 0.0, atol=1e-9)


def test_overshoot_scales_with_normalizer():
    trials = [swinging_trial(amplitude=1.1 * DISTANCE / 2)]
    by_distance = dyad_errors(trials)
    by_width = dyad_errors(trials, use_target_width=True)
    assert np.allclose(by_distance.position_errors, 5.0)
    assert np.allclose(by_width.position_errors, 100 * 0.015 / 0.03)
    summary = by_distance.summary()
    assert summary.PE_mean == pytest.approx(5.0)
    assert summary.PE_sd == pytest.approx(0.0, abs=1e-9)


def test_reversals_before_first_beat_are_ignored():
    early = trial_errors(swinging_trial())[1]
    late = trial_errors(swinging_trial(beats=[2.0, 2.5]))[1]
    assert late.size == early.size - 3


def test_dyad_without_trials_has_no_data():
    with pytest.raises(NoDataError):
        dyad_errors([])


def test_exclusion_drops_erratic_dyad_and_is_stable():
    dyads = [
        DyadErrors(dyad_id=f"d{k}", position_errors=alternating(1.0), synchronization_errors=alternating(1.0))
        for k in range(5)
    ]
    erratic = DyadErrors(dyad_id="d9", position_errors=alternating(10.0), synchronization_errors=alternating(1.0))
    result = exclusion_filter(dyads + [erratic])
    assert [d.dyad_id for d in result.excluded] == ["d9"]
    assert len(result.retained) == 5
    assert "PE sd" in result.log[0]
    assert exclusion_filter(result.retained).excluded == []


def test_exclusion_needs_three_dyads():
    dyads = [
        DyadErrors(dyad_id="d1", position_errors=alternating(1.0), synchronization_errors=alternating(1.0)),
        DyadErrors(dyad_id="d2", position_errors=alternating(50.0), synchronization_errors=alternating(1.0)),
    ]
    result = exclusion_filter(dyads)
    assert result.excluded == []
    assert len(result.retained) == 2


def test_force_summaries_of_steady_push():
    sensor = Channel(samples=np.full(100, 3.0), fs=FS)
    summary = force_summaries([reconstruct_forces(sensor, sensor, MASSES)] * 2)
    assert summary.mean_abs_F1 == pytest.approx(3.0)
    assert summary.mean_abs_F2 == pytest.approx(3.0)
    assert summary.histogram_F1.is_empty
    with pytest.raises(NoDataError):
        force_summaries([])
