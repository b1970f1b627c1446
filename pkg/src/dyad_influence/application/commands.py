from __future__ import annotations

import hashlib
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dyad_influence.domain.causality import EstimationMethod, GgcEstimator
from dyad_influence.domain.errors import ConfigError
from dyad_influence.domain.forces import ForceFrame
from dyad_influence.domain.simulation import SimConfig
from dyad_influence.domain.spectral import DEFAULT_FREQ_STEP_HZ, DEFAULT_P_MAX
from dyad_influence.domain.surrogate import DEFAULT_N_PERM


class FilterSettings(BaseModel):
    fc: float = Field(default=10.0, gt=0, description="Low-pass cutoff in Hz")
    order: int = Field(default=2, ge=1)


class VarSettings(BaseModel):
    p_max: int = Field(default=DEFAULT_P_MAX, ge=1)
    fixed_p: Optional[int] = Field(default=None, ge=1)
    method: EstimationMethod = EstimationMethod.PARAMETRIC
    time_bandwidth: float = Field(default=2.0, gt=0, description="Multitaper half bandwidth (nonparametric path)")


class FrequencyGridSettings(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    step: float = Field(default=DEFAULT_FREQ_STEP_HZ, gt=0)
    f_max: Optional[float] = Field(default=None, gt=0, alias="max")


class SurrogateSettings(BaseModel):
    n_perm: int = Field(default=DEFAULT_N_PERM, ge=1)
    seed: int = 0


class BandSettings(BaseModel):
    mode: Literal["auto", "fixed"] = "auto"
    fixed: Tuple[float, float] = (2.15, 7.0)
    designated_role: Optional[str] = Field(
        default=None, description="Role whose outgoing influence defines f2; highest total influence when unset"
    )
    sub_bands: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def validate_fixed(self) -> "BandSettings":
        if not 0 < self.fixed[0] < self.fixed[1]:
            raise ValueError(f"fixed bands must satisfy 0 < f1 < f2, got {self.fixed}")
        return self


class BehaviorSettings(BaseModel):
    normalizer: Literal["distance", "width"] = "distance"


class PipelineConfig(BaseModel):
    """Every knob of the analysis; defaults follow the recording protocol (25 Hz, 3 windows per trial)."""

    model_config = ConfigDict(populate_by_name=True)

    filter: FilterSettings = Field(default_factory=FilterSettings)
    downsample_fs: float = Field(default=25.0, gt=0)
    epochs_per_trial: int = Field(default=3, ge=1)
    var: VarSettings = Field(default_factory=VarSettings)
    freq_grid: FrequencyGridSettings = Field(default_factory=FrequencyGridSettings)
    surrogate: SurrogateSettings = Field(default_factory=SurrogateSettings)
    bands: BandSettings = Field(default_factory=BandSettings)
    behavior: BehaviorSettings = Field(default_factory=BehaviorSettings)
    force_frame: ForceFrame = ForceFrame.GLOBAL
    coefficient_table: Optional[Path] = None

    @model_validator(mode="after")
    def validate_ranges(self) -> "PipelineConfig":
        if self.filter.fc >= self.downsample_fs / 2.0:
            raise ValueError(
                f"cutoff {self.filter.fc} Hz must lie below the Nyquist rate of the {self.downsample_fs} Hz output"
            )
        if self.freq_grid.f_max is not None and self.freq_grid.f_max > self.downsample_fs / 2.0:
            raise ValueError("frequency grid cannot extend past the Nyquist rate")
        if self.coefficient_table is not None and not self.coefficient_table.exists():
            raise ValueError(f"coefficient table {self.coefficient_table} does not exist")
        return self

    @classmethod
    def load(cls, path: Optional[str | Path]) -> "PipelineConfig":
        """JSON config file; no path gives the defaults."""
        if path is None:
            return cls()
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            return cls.model_validate_json(path.read_text())
        except ValidationError as exc:
            raise ConfigError(f"invalid config {path}: {exc}") from exc

    def with_seed(self, seed: Optional[int]) -> "PipelineConfig":
        if seed is None:
            return self
        return self.model_copy(update={"surrogate": self.surrogate.model_copy(update={"seed": seed})})

    def estimator(self) -> GgcEstimator:
        return GgcEstimator(
            method=self.var.method,
            order=self.var.fixed_p,
            p_max=self.var.p_max,
            freq_step=self.freq_grid.step,
            f_max=self.freq_grid.f_max,
            time_bandwidth=self.var.time_bandwidth,
        )

    def digest(self) -> str:
        return hashlib.sha256(self.model_dump_json(by_alias=True).encode()).hexdigest()


class AnalyzeCommand(BaseModel):
    input_dir: Path
    out_dir: Path
    config: PipelineConfig = Field(default_factory=PipelineConfig)
    seed: Optional[int] = None
    workers: int = Field(default=1, ge=1)


class SimulateCommand(BaseModel):
    config: SimConfig = Field(default_factory=SimConfig)
    n_trials: int = Field(default=9, ge=0, description="Trials per dyad")
    n_dyads: int = Field(default=1, ge=1)
    swap_roles: bool = Field(default=False, description="Partners exchange roles for the second half of each dyad's trials")
    out_dir: Path

    @classmethod
    def load_sim_config(cls, path: Optional[str | Path]) -> SimConfig:
        if path is None:
            return SimConfig()
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"simulation config {path} does not exist")
        try:
            return SimConfig.model_validate_json(path.read_text())
        except ValidationError as exc:
            raise ConfigError(f"invalid simulation config {path}: {exc}") from exc


class SurrogateCommand(BaseModel):
    input_dir: Path
    out_file: Path
    config: PipelineConfig = Field(default_factory=PipelineConfig)
    n_perm: int = Field(default=DEFAULT_N_PERM, ge=1)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
