import pytest
from pydantic import ValidationError

from dyad_influence.application.commands import PipelineConfig, SimulateCommand
from dyad_influence.domain.causality import EstimationMethod
from dyad_influence.domain.errors import ConfigError
from dyad_influence.domain.forces import ForceFrame


def test_defaults_follow_recording_protocol():
    config = PipelineConfig()
    assert config.filter.fc == 10.0
    assert config.filter.order == 2
    assert config.downsample_fs == 25.0
    assert config.epochs_per_trial == 3
    assert config.surrogate.n_perm == 506
    assert config.freq_grid.step == 0.05
    assert config.bands.mode == "auto"
    assert config.force_frame is ForceFrame.GLOBAL


def test_cutoff_must_stay_below_output_nyquist():
    with pytest.raises(ValidationError):
        PipelineConfig(filter={"fc": 12.5})
    with pytest.raises(ValidationError):
        PipelineConfig(freq_grid={"max": 20.0})


def test_fixed_bands_must_be_ordered():
    with pytest.raises(ValidationError):
        PipelineConfig(bands={"mode": "fixed", "fixed": [7.0, 2.15]})


def test_load_reads_json_with_aliases(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        '{"var": {"fixed_p": 4, "method": "nonparametric"}, "freq_grid": {"step": 0.1, "max": 10},'
        ' "surrogate": {"n_perm": 50, "seed": 3}}'
    )
    config = PipelineConfig.load(path)
    estimator = config.estimator()
    assert estimator.order == 4
    assert estimator.method is EstimationMethod.NONPARAMETRIC
    assert estimator.freq_step == 0.1
    assert estimator.f_max == 10.0
    assert config.surrogate.n_perm == 50


def test_load_failures_are_config_errors(tmp_path):
    assert PipelineConfig.load(None) == PipelineConfig()
    with pytest.raises(ConfigError):
        PipelineConfig.load(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"downsample_fs": -1}')
    with pytest.raises(ConfigError):
        PipelineConfig.load(broken)


def test_seed_override_changes_digest():
    config = PipelineConfig()
    assert config.with_seed(None) is config
    seeded = config.with_seed(7)
    assert seeded.surrogate.seed == 7
    assert seeded.digest() != config.digest()
    assert PipelineConfig().digest() == config.digest()


def test_simulation_config_loading(tmp_path):
    assert SimulateCommand.load_sim_config(None).seed == 0
    path = tmp_path / "sim.json"
    path.write_text('{"seed": 5, "coupling_direction": "b_to_a", "coupling_gain": 0.5}')
    loaded = SimulateCommand.load_sim_config(path)
    assert loaded.seed == 5
    assert loaded.coupling_direction.value == "b_to_a"
    path.write_text('{"fs": 5}')
    with pytest.raises(ConfigError):
        SimulateCommand.load_sim_config(path)
