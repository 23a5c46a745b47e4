"""Run configuration: TOML schema, validation, defaults.

A run is fully specified by one TOML file with five sections ([field],
[protocol], [tomography], [analysis], [output]); every key has a default
matching the reference cold-atom parameter set, every default can be
overridden, and unknown keys are rejected.  SI-facing units (um, nK, Hz)
appear only here; everything downstream runs in internal units.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .field import FieldParameters

_FORMATS = ("binary", "json")
_BETA_SOURCES = ("theory", "reconstructed")
_ZM_SOURCES = ("theory", "vacuum")


@dataclass(frozen=True)
class ProtocolSettings:
    t_max_ms: float = 65.0
    n_times: int = 14
    shots_per_time: int = 500
    seed: int = 12345
    detection_noise_sigma: float = 0.0

    @property
    def times_ms(self) -> tuple:
        return tuple(float(t) for t in np.linspace(0.0, self.t_max_ms, self.n_times))

    def validate(self):
        if self.t_max_ms <= 0:
            raise ValidationError("t_max_ms must be positive")
        if self.n_times < 2:
            raise ValidationError("n_times must be >= 2")
        if self.shots_per_time < 1:
            raise ValidationError("shots_per_time must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 bits")
        if self.detection_noise_sigma < 0:
            raise ValidationError("detection_noise_sigma must be >= 0")


@dataclass(frozen=True)
class TomographySettings:
    window_ms: float = 32.5
    n_modes_fit: Optional[int] = None  # default: all oscillating modes
    ridge: float = 0.0
    reference_pixel: int = 0
    zero_mode_source: str = "theory"

    def validate(self, n_pixels: int):
        if self.window_ms <= 0:
            raise ValidationError("window_ms must be positive")
        if self.n_modes_fit is not None and not 1 <= self.n_modes_fit < n_pixels + 1:
            raise ValidationError(f"n_modes_fit out of range for {n_pixels} pixels")
        if self.ridge < 0:
            raise ValidationError("ridge must be >= 0")
        if not 0 <= self.reference_pixel < n_pixels:
            raise ValidationError("reference_pixel outside the grid")
        if self.zero_mode_source not in _ZM_SOURCES:
            raise ValidationError(
                f"zero_mode_source must be one of {_ZM_SOURCES}"
            )


@dataclass(frozen=True)
class AnalysisSettings:
    splits: tuple = (1, 2, 3, 4, 5, 6)
    bootstrap_resamples: int = 999
    bootstrap_alpha: float = 0.68
    bootstrap_seed: int = 7
    beta_source: str = "theory"

    def validate(self, n_pixels: int):
        if len(self.splits) == 0:
            raise ValidationError("analysis needs at least one split")
        for ns in self.splits:
            if not 1 <= int(ns) <= n_pixels - 1:
                raise ValidationError(f"split {ns} invalid for {n_pixels} pixels")
        if self.bootstrap_resamples < 1:
            raise ValidationError("bootstrap_resamples must be >= 1")
        if not 0 < self.bootstrap_alpha < 1:
            raise ValidationError("bootstrap_alpha must be in (0, 1)")
        if self.beta_source not in _BETA_SOURCES:
            raise ValidationError(f"beta_source must be one of {_BETA_SOURCES}")


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "runs/default"
    format: str = "binary"

    def validate(self):
        if self.format not in _FORMATS:
            raise ValidationError(f"format must be one of {_FORMATS}")


@dataclass(frozen=True)
class RunConfig:
    field: FieldParameters = dc_field(default_factory=FieldParameters)
    protocol: ProtocolSettings = dc_field(default_factory=ProtocolSettings)
    tomography: TomographySettings = dc_field(default_factory=TomographySettings)
    analysis: AnalysisSettings = dc_field(default_factory=AnalysisSettings)
    output: OutputSettings = dc_field(default_factory=OutputSettings)

    def validate(self) -> "RunConfig":
        self.field.validate()
        self.protocol.validate()
        self.tomography.validate(self.field.n_pixels)
        self.analysis.validate(self.field.n_pixels)
        self.output.validate()
        return self


_SECTIONS = {
    "field": FieldParameters,
    "protocol": ProtocolSettings,
    "tomography": TomographySettings,
    "analysis": AnalysisSettings,
    "output": OutputSettings,
}


def _build_section(name: str, cls, data: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(
            f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}"
        )
    converted = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if f.name == "splits":
            value = tuple(int(v) for v in value)
        converted[f.name] = value
    try:
        return cls(**converted)
    except TypeError as exc:
        raise ValidationError(f"bad value in [{name}]: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ValidationError(f"unknown section(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ValidationError(f"[{name}] must be a table")
        kwargs[name] = _build_section(name, cls, section)
    return RunConfig(**kwargs).validate()


def load_config(path: Optional[str] = None) -> RunConfig:
    """Load a TOML config; with no path, return the validated defaults."""
    if path is None:
        return RunConfig().validate()
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config parse error in {path}: {exc}") from exc
    return config_from_dict(data)


def resolved_dict(config: RunConfig) -> dict:
    """Plain-JSON view of the fully resolved configuration."""
    out = {}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(config, name))
        for key, value in section.items():
            if isinstance(value, tuple):
                section[key] = list(value)
        out[name] = section
    return out


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(resolved_dict(config), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]
