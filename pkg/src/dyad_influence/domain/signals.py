from __future__ import annotations

from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, model_validator


def _as_readonly_float(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


def _as_readonly_complex(value: Any) -> np.ndarray:
    array = np.array(value, dtype=complex)
    array.setflags(write=False)
    return array


def _as_readonly_int(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.int64)
    array.setflags(write=False)
    return array


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_readonly_float),
    PlainSerializer(lambda array: array.tolist(), return_type=list),
]
IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_readonly_int),
    PlainSerializer(lambda array: array.tolist(), return_type=list),
]
ComplexArray = Annotated[np.ndarray, BeforeValidator(_as_readonly_complex)]


class ArrayModel(BaseModel):
    """Immutable model carrying numpy payloads."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class Channel(ArrayModel):
    """One sampled quantity (force in N or position in m)."""

    samples: FloatArray
    fs: float = Field(gt=0)
    label: str = ""

    @model_validator(mode="after")
    def validate_samples(self) -> "Channel":
        if self.samples.ndim != 1:
            raise ValueError("channel samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"channel '{self.label}' contains NaN or Inf samples")
        return self

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.fs

    def derive(self, samples: np.ndarray, *, fs: float | None = None, label: str | None = None) -> "Channel":
        return Channel(
            samples=samples,
            fs=self.fs if fs is None else fs,
            label=self.label if label is None else label,
        )


class Epoch(ArrayModel):
    """A contiguous window of one channel."""

    samples: FloatArray
    fs: float = Field(gt=0)
    parent_trial: str = ""
    window_index: int = Field(default=0, ge=0)

    def __len__(self) -> int:
        return int(self.samples.shape[0])


class BivariateEpoch(ArrayModel):
    """Time-aligned window of the two participants' forces; column 0 is A, column 1 is B."""

    samples: FloatArray
    fs: float = Field(gt=0)
    parent_trial: str = ""
    window_index: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def validate_shape(self) -> "BivariateEpoch":
        if self.samples.ndim != 2 or self.samples.shape[1] != 2:
            raise ValueError("bivariate epoch samples must have shape (n, 2)")
        return self

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @classmethod
    def pair(cls, first: Epoch, second: Epoch) -> "BivariateEpoch":
        if len(first) != len(second) or first.fs != second.fs:
            raise ValueError("epochs to pair must share length and sampling rate")
        return cls(
            samples=np.column_stack([first.samples, second.samples]),
            fs=first.fs,
            parent_trial=first.parent_trial,
            window_index=first.window_index,
        )

    def swapped(self) -> "BivariateEpoch":
        return self.model_copy(update={"samples": _as_readonly_float(self.samples[:, ::-1])})


class PeriodHistogram(ArrayModel):
    """Distribution of oscillation frequencies measured from extrema spacing."""

    frequencies: FloatArray
    bin_edges: FloatArray
    counts: IntArray

    @model_validator(mode="after")
    def validate_counts(self) -> "PeriodHistogram":
        if int(self.counts.sum()) != self.frequencies.size:
            raise ValueError("histogram counts must add up to the number of detected periods")
        if np.any(self.frequencies <= 0):
            raise ValueError("period frequencies must be positive")
        if self.bin_edges.size != self.counts.size + 1:
            raise ValueError("histogram needs one more edge than counts")
        return self

    @property
    def is_empty(self) -> bool:
        return self.frequencies.size == 0

