"""Experiment configuration (JSON), validated before any computation."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

from .exceptions import SphereflowError
from .harmonics import read_spectrum_csv

__all__ = ["ConfigError", "TaskConfig", "GraphConfig", "ModelConfig", "TrainingConfig", "BaselineConfig",
           "ExperimentConfig", "load_config"]


class ConfigError(SphereflowError, ValueError):
    """Configuration is well-formed but inconsistent with its inputs."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TaskConfig(_Strict):
    n_side: PositiveInt = 16
    order: PositiveInt = 2
    spectra: list[str] = Field(min_length=2)
    sigma_n: float = Field(default=0.0, ge=0.0)
    train_maps_per_class: PositiveInt = 20
    test_maps_per_class: PositiveInt = 10
    val_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    rotate_test: bool = True

    @model_validator(mode="after")
    def _check_geometry(self):
        for name, v in (("n_side", self.n_side), ("order", self.order)):
            if v & (v - 1):
                raise ValueError(f"{name} must be a power of two")
        if self.order > self.n_side:
            raise ValueError("order cannot exceed n_side")
        return self


class GraphConfig(_Strict):
    neighbors: Union[Literal["healpix8"], PositiveInt] = "healpix8"
    sigma: Union[Literal["auto"], PositiveFloat] = "auto"
    laplacian: Literal["normalized", "combinatorial"] = "normalized"


class ModelConfig(_Strict):
    variant: Literal["fcn", "cnn"] = "fcn"
    K: PositiveInt = 5
    channels: list[PositiveInt] = [16, 32, 64]
    pools: list[Literal["none", "avg4", "max4"]] = ["avg4", "avg4", "avg4"]
    hidden: list[PositiveInt] = []

    @model_validator(mode="after")
    def _check_layers(self):
        if not self.channels or len(self.pools) != len(self.channels):
            raise ValueError("channels and pools must be nonempty and of equal length")
        return self


class TrainingConfig(_Strict):
    lr: PositiveFloat = 1e-3
    batch: PositiveInt = 32
    epochs: int = Field(default=20, ge=0)


class BaselineConfig(_Strict):
    l2: PositiveFloat = 1.0
    bins: PositiveInt = 32
    max_gram_condition: PositiveFloat = 1e6


class ExperimentConfig(_Strict):
    task: TaskConfig
    graph: GraphConfig = GraphConfig()
    model: ModelConfig = ModelConfig()
    training: TrainingConfig = TrainingConfig()
    baseline: BaselineConfig = BaselineConfig()
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _check_pools(self):
        n_pools = sum(p != "none" for p in self.model.pools)
        n_patch = 12 * self.task.n_side ** 2 // (12 * self.task.order ** 2)
        if 4 ** n_pools > n_patch:
            raise ValueError(f"{n_pools} pooling layers do not fit patches of {n_patch} pixels")
        return self


def load_config(path, seed=None):
    """Parse and validate a config file; spectrum paths resolve relative to it.

    Raises ``pydantic.ValidationError`` on schema violations and
    :class:`ConfigError` when a spectrum file is missing, unreadable, or does
    not fit the sampling.
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    if isinstance(raw, dict) and isinstance(raw.get("task"), dict):
        spectra = raw["task"].get("spectra")
        if isinstance(spectra, list):
            raw["task"]["spectra"] = [str((path.parent / s).resolve()) if isinstance(s, str)
                                      else s for s in spectra]
    if seed is not None:
        raw["seed"] = seed
    cfg = ExperimentConfig.model_validate(raw)
    lengths = set()
    for s in cfg.task.spectra:
        try:
            c = read_spectrum_csv(s)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"spectrum {s}: {exc}") from exc
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ConfigError(f"spectrum {s}: values must be finite and nonnegative")
        lengths.add(len(c))
    if len(lengths) != 1:
        raise ConfigError(f"class spectra have different lengths {sorted(lengths)}")
    ell_max = lengths.pop() - 1
    if (ell_max + 1) ** 2 > 12 * cfg.task.n_side ** 2:
        raise ConfigError(f"spectra up to ell={ell_max} need more than the "
                          f"{12 * cfg.task.n_side ** 2} pixels of n_side={cfg.task.n_side}")
    return cfg
