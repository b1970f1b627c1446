import shutil
from pathlib import Path

import pandas as pd
import pytest

from dyad_influence.application.services import FixtureService
from dyad_influence.domain.errors import ConfigError, FixtureNotFoundError
from dyad_influence.domain.fixtures import Expectation, Fixture
from dyad_influence.domain.simulation import SimConfig
from dyad_influence.infrastructure.fixtures.file import JsonFixtureRepository
from dyad_influence.infrastructure.fixtures.in_memory import InMemoryFixtureRepository, InMemoryFixtureWorkspace

BUNDLED = Path(__file__).resolve().parents[1] / "fixtures"

SMALL_PIPELINE = {
    "var": {"fixed_p": 3},
    "freq_grid": {"step": 0.25},
    "surrogate": {"n_perm": 20, "seed": 2},
    "bands": {"mode": "fixed", "designated_role": "leader"},
}


def small_fixture(**overrides) -> Fixture:
    fields = {
        "id": "small",
        "simulation": SimConfig(seed=50),
        "n_dyads": 3,
        "trials_per_dyad": 2,
        "pipeline": SMALL_PIPELINE,
        "expectations": [
            Expectation(table="bands", column="integral_ab", where={"band": "total"}, op=">=", value=0.0),
        ],
    }
    fields.update(overrides)
    return Fixture(**fields)


def service_with(fixture: Fixture):
    repository = InMemoryFixtureRepository()
    repository.save(fixture)
    return repository, FixtureService(repository, InMemoryFixtureWorkspace())


def test_recorded_fixture_verifies():
    repository, service = service_with(small_fixture())
    recorded = service.record_fixture("small")
    assert "bands.csv" in recorded.digests
    assert "spectra/d01.csv" in recorded.digests
    assert repository.get("small").digests == recorded.digests

    result = service.verify_fixture("small")
    assert result.passed
    assert result.lines()[0] == "fixture small: PASS"


def test_corrupted_digest_names_the_file():
    _, service = service_with(small_fixture(digests={"bands.csv": "0" * 64, "gone.csv": "1" * 64}))
    result = service.verify_fixture("small")
    assert not result.passed
    assert result.file_diffs[0] == "bands.csv: expected sha256 000000000000, got " + result.file_diffs[0][-12:]
    assert result.file_diffs[1] == "gone.csv: missing from the regenerated report"
    assert any(line.startswith("  [FAIL] bands.csv") for line in result.lines())


def test_failing_expectation_and_missing_table():
    fixture = small_fixture(
        expectations=[
            Expectation(table="bands", column="integral_ab", where={"band": "total"}, op="<", value=0.0),
            Expectation(table="nowhere", column="x", op=">", value=0.0),
        ]
    )
    _, service = service_with(fixture)
    result = service.verify_fixture("small")
    assert [check.passed for check in result.checks] == [False, False]
    assert result.checks[1].detail == "table missing"


def test_invalid_pipeline_is_a_config_error():
    _, service = service_with(small_fixture(pipeline={"downsample_fs": -5}))
    with pytest.raises(ConfigError):
        service.verify_fixture("small")


def test_unknown_fixture():
    _, service = service_with(small_fixture())
    with pytest.raises(FixtureNotFoundError):
        service.verify_fixture("absent")


def test_expectation_aggregates():
    frame = pd.DataFrame({"band": ["high", "high", "low"], "x": [1.0, 3.0, -5.0]})
    mean = Expectation(table="t", column="x", where={"band": "high"}, aggregate="mean", op=">", value=1.5).evaluate(frame)
    assert mean.passed
    assert mean.observed == 2.0
    every = Expectation(table="t", column="x", aggregate="all", op=">", value=0.0).evaluate(frame)
    assert not every.passed
    assert every.observed == -5.0
    assert Expectation(table="t", column="x", aggregate="any", op="<", value=0.0).evaluate(frame).passed
    empty = Expectation(table="t", column="x", where={"band": "mid"}, op=">", value=0.0).evaluate(frame)
    assert empty.detail == "no matching rows"


def test_json_repository_round_trip(tmp_path):
    repository = JsonFixtureRepository(tmp_path)
    repository.save(small_fixture(digests={"bands.csv": "ab" * 32}))
    assert repository.list_ids() == ["small"]
    assert repository.get("small") == small_fixture(digests={"bands.csv": "ab" * 32})
    (tmp_path / "broken.json").write_text('{"id": "broken", "n_dyads": 0}')
    with pytest.raises(ConfigError):
        repository.get("broken")
    with pytest.raises(FixtureNotFoundError):
        repository.get("absent")


def test_bundled_fixtures_parse():
    repository = JsonFixtureRepository(BUNDLED)
    assert repository.list_ids() == ["coupled", "zero_coupling"]
    coupled = repository.get("coupled")
    assert coupled.simulation.coupling_direction.value == "a_to_b"
    assert coupled.n_dyads * coupled.trials_per_dyad == 54
    assert repository.get("zero_coupling").simulation.coupling_gain == 0.0


@pytest.mark.slow
@pytest.mark.parametrize("fixture_id", ["coupled", "zero_coupling"])
def test_bundled_fixture_passes_and_regenerates_bit_exactly(fixture_id, tmp_path):
    shutil.copy(BUNDLED / f"{fixture_id}.json", tmp_path)
    service = FixtureService(JsonFixtureRepository(tmp_path), InMemoryFixtureWorkspace())
    recorded = service.record_fixture(fixture_id)
    assert {"bands.csv", "stats.csv", "threshold.csv"} <= set(recorded.digests)
    report = service.verify_fixture(fixture_id)
    assert [check.description for check in report.checks if not check.passed] == []
    assert report.file_diffs == []
    assert report.passed
