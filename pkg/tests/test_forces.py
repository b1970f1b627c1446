import numpy as np
import pytest
from pydantic import ValidationError

from dyad_influence.domain.errors import ChannelMismatchError, ConfigError, InvalidMassError
from dyad_influence.domain.forces import (
    MassConfig,
    SegmentCoefficient,
    SegmentTable,
    invert_forces,
    reconstruct_forces,
    segment_mass,
    to_movement_frame,
)
from dyad_influence.domain.signals import Channel
from dyad_influence.infrastructure.coefficients.file import CsvSegmentTableSource
from dyad_influence.infrastructure.coefficients.in_memory import InMemorySegmentTableSource

FS = 500.0
MASSES = MassConfig(M=16.5, m1=2.0, m2=2.0)


def channel(values, label: str = "") -> Channel:
    return Channel(samples=np.asarray(values, dtype=float), fs=FS, label=label)


def test_equal_constant_sensors_mean_no_acceleration():
    pair = reconstruct_forces(channel([3.0] * 5), channel([3.0] * 5), MASSES)
    assert np.allclose(pair.a.samples, 0.0)
    assert np.allclose(pair.F2.samples, 3.0)
    assert np.allclose(pair.F1.samples, -3.0)


def test_direct_substitution_example():
    pair = reconstruct_forces(channel([0.0]), channel([16.5]), MASSES)
    assert pair.a.samples[0] == pytest.approx(1.0)
    assert pair.F2.samples[0] == pytest.approx(18.5)
    assert pair.F1.samples[0] == pytest.approx(2.0)


def test_zero_sensors_give_zero_forces():
    pair = reconstruct_forces(channel(np.zeros(4)), channel(np.zeros(4)), MASSES)
    for component in (pair.F1, pair.F2, pair.a):
        assert np.all(component.samples == 0.0)


def test_inverse_of_opposed_forces():
    sensors = invert_forces(channel([-2.0, -2.0]), channel([2.0, 2.0]), MASSES)
    assert np.allclose(sensors.a.samples, 0.0)
    assert np.allclose(sensors.S1.samples, 2.0)
    assert np.allclose(sensors.S2.samples, 2.0)


def test_round_trip_and_newton_identity_on_random_forces():
    rng = np.random.default_rng(11)
    masses = MassConfig(M=16.5, m1=1.37, m2=1.81)
    F1 = channel(rng.normal(0.0, 20.0, 1000))
    F2 = channel(rng.normal(0.0, 20.0, 1000))
    sensors = invert_forces(F1, F2, masses)
    pair = reconstruct_forces(sensors.S1, sensors.S2, masses)
    scale = np.max(np.abs(F1.samples))
    assert np.max(np.abs(pair.F1.samples - F1.samples)) <= 1e-10 * scale
    assert np.max(np.abs(pair.F2.samples - F2.samples)) <= 1e-10 * scale
    newton = pair.F1.samples + pair.F2.samples - masses.total * pair.a.samples
    assert np.max(np.abs(newton)) <= 1e-10 * scale


def test_reconstruct_rejects_misaligned_sensors():
    with pytest.raises(ChannelMismatchError):
        reconstruct_forces(channel([1.0, 2.0]), channel([1.0]), MASSES)


def test_non_positive_masses_are_rejected():
    with pytest.raises(ValidationError):
        MassConfig(M=0.0, m1=1.0, m2=1.0)
    unchecked = MassConfig.model_construct(M=0.0, m1=1.0, m2=1.0)
    with pytest.raises(InvalidMassError):
        reconstruct_forces(channel([1.0]), channel([1.0]), unchecked)


def test_movement_frame_flips_leftward_samples():
    pair = reconstruct_forces(channel([0.0] * 6), channel([1.0] * 6), MASSES)
    position = channel([0.0, 1.0, 2.0, 1.0, 0.0, -1.0])
    flipped = to_movement_frame(pair, position)
    assert np.array_equal(np.sign(flipped.F2.samples), [1.0, 1.0, 1.0, -1.0, -1.0, -1.0])
    assert np.allclose(np.abs(flipped.F2.samples), np.abs(pair.F2.samples))


def test_segment_mass_arithmetic():
    assert segment_mass(70.0, {"hand": 0.01, "forearm": 0.02}) == pytest.approx(2.1)


def test_segment_mass_rejects_zero_fraction_and_missing_segment():
    with pytest.raises(ConfigError):
        segment_mass(70.0, {"hand": 0.0, "forearm": 0.02})
    with pytest.raises(ConfigError):
        segment_mass(70.0, {"hand": 0.01})


def test_bundled_table_gives_hand_plus_forearm_fractions():
    table = CsvSegmentTableSource().load()
    assert table.fractions_for("male")["hand"] == pytest.approx(0.0061)
    assert table.segment_mass(70.0, "Male") == pytest.approx(70.0 * (0.0061 + 0.0162))
    assert table.segment_mass(60.0, "female") == pytest.approx(60.0 * (0.0056 + 0.0138))


def test_unknown_sex_is_a_config_error():
    table = InMemorySegmentTableSource(
        SegmentTable(rows=[SegmentCoefficient(segment="hand", sex="female", mass_fraction=0.0056)])
    ).load()
    with pytest.raises(ConfigError):
        table.fractions_for("male")


def test_table_without_required_columns_is_rejected(tmp_path):
    path = tmp_path / "coefficients.csv"
    path.write_text("segment,fraction\nhand,0.01\n")
    with pytest.raises(ConfigError):
        CsvSegmentTableSource(path).load()
