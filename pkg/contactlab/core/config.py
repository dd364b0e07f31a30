import os
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from contactlab.core.report import DEFAULT_TOLERANCE
from contactlab.core.sampling import DEFAULT_GRID, DEFAULT_SEED, SamplingSpec

DEFAULT_CONFIG = ".contactlab.yaml"


class SamplingConfig(BaseModel):
    grid: tuple[int, int, int] = DEFAULT_GRID
    random: int | None = None  # point count; overrides grid when set
    seed: int = DEFAULT_SEED
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")

    @field_validator("grid")
    @classmethod
    def validate_grid(cls, v):
        if any(k < 1 for k in v):
            raise ValueError("grid dimensions must be >= 1")
        return v

    @field_validator("random")
    @classmethod
    def validate_random(cls, v):
        if v is not None and v < 1:
            raise ValueError("random point count must be >= 1")
        return v

    def spec(self) -> SamplingSpec:
        if self.random is not None:
            return SamplingSpec(strategy="random", count=self.random, seed=self.seed)
        return SamplingSpec(strategy="grid", grid=self.grid, seed=self.seed)


class CheckConfig(BaseModel):
    tolerance: float = DEFAULT_TOLERANCE
    workers: int = 1  # joblib threads for point chunks
    chunk_size: int = 1024  # fixed, so output does not depend on workers
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")

    @field_validator("tolerance")
    @classmethod
    def validate_tolerance(cls, v):
        if not v > 0:
            raise ValueError("tolerance must be positive")
        return v

    @field_validator("workers", "chunk_size")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v


class OutputConfig(BaseModel):
    format: Literal["table", "jsonl", "csv"] = "table"
    out: str | None = None  # stdout when unset
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")


class TraceConfig(BaseModel):  # OpenTelemetry span export
    file: str | None = None  # JSON span dump
    endpoint: str | None = None  # OTLP/HTTP collector, e.g. http://localhost:4318/v1/traces
    service_name: str = "contactlab"
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")


class Config(BaseModel):
    """Top-level run configuration: sampling, checks, output and tracing."""

    sampling: SamplingConfig = SamplingConfig()
    checks: CheckConfig = CheckConfig()
    output: OutputConfig = OutputConfig()
    trace: TraceConfig | None = None
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")


def _read_config_file(path: str) -> dict:
    try:
        with open(os.path.expanduser(path)) as f:
            raw = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise RuntimeError(f"Configuration file '{path}' not found.") from e
    except yaml.YAMLError as e:
        raise RuntimeError(f"YAML syntax error in '{path}': {e}") from e
    except OSError as e:
        raise RuntimeError(f"Error loading config file '{path}': {e}") from e
    if raw is None:  # empty file
        return {}
    if not isinstance(raw, dict):
        raise ValueError(f"Config file '{path}' must contain a dictionary at the root.")
    return raw


def load_config(paths: list[str]) -> Config:
    """Merge YAML config files into a `Config`.

    Later files override earlier ones key by key inside each section, so a
    file that only sets `checks.tolerance` keeps `checks.workers` from before.
    """
    merged: dict = {}
    for p in paths:
        for section, value in _read_config_file(p).items():
            if isinstance(value, dict) and isinstance(merged.get(section), dict):
                merged[section] = {**merged[section], **value}
            else:
                merged[section] = value
    try:
        return Config(**merged)
    except ValidationError as e:
        raise RuntimeError(f"Config validation error: {e}") from e


def default_config_paths(paths: list[str] | None) -> list[str]:
    """Explicit paths as given; otherwise the default file when it exists."""
    if paths:
        return paths
    return [DEFAULT_CONFIG] if os.path.exists(DEFAULT_CONFIG) else []
